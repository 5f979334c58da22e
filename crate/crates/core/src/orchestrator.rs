//! Job manifests, the append-only result store, and local or file-based execution
//! with memory-tier retries.

use std::collections::{BTreeMap, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Mutex};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::betti::RankSource;
use crate::error::{Error, Result};
use crate::grading::{EmbeddingSpec, Multidegree};
use crate::io::{read_json, write_json};
use crate::linalg::{memory_estimate, sparse_rank, RankOptions, RankReport, Strategy};
use crate::strands::{
    build_strand_matrix, plan_range, read_smf, write_smf, PlanOptions, StrandMatrix, Window,
};

pub const GIB: u64 = 1 << 30;
pub const DEFAULT_TIERS: [u64; 4] = [2 * GIB, 8 * GIB, 32 * GIB, 128 * GIB];
pub const DEFAULT_SAMPLE_RATE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Built,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondPrimeCheck {
    pub prime: u32,
    pub rank: u64,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub p: i64,
    pub q: i64,
    pub a: Multidegree,
    pub rows: u64,
    pub cols: u64,
    /// Relative to the run directory.
    pub matrix: String,
    pub status: JobStatus,
    /// Memory tier in bytes the job last ran under.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<RankReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_prime: Option<SecondPrimeCheck>,
}

impl JobRecord {
    /// Upper bound on the nonzeros: every column has at most p entries.
    pub fn nnz_bound(&self) -> u64 {
        self.cols * self.p.max(0) as u64
    }

    pub fn estimate(&self) -> u64 {
        memory_estimate(self.rows, self.cols, self.nnz_bound())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecRecord {
    pub d1: i64,
    pub d2: i64,
    pub b1: i64,
    pub b2: i64,
}

/// Prime-independent description of the batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobManifest {
    pub spec: SpecRecord,
    pub window: Option<String>,
    pub full_rank: bool,
    pub spec_hash: String,
    pub generator: String,
    pub job_count: usize,
    pub largest: Option<(u64, u64)>,
    pub jobs: Vec<JobRecord>,
}

impl JobManifest {
    pub fn plan_options(&self) -> Result<PlanOptions> {
        let window = match &self.window {
            Some(w) => Some(w.parse::<Window>()?),
            None => None,
        };
        Ok(PlanOptions {
            window,
            full_rank: self.full_rank,
        })
    }

    pub fn spec_with_modulus(&self, modulus: u32) -> Result<EmbeddingSpec> {
        EmbeddingSpec::new(
            self.spec.d1,
            self.spec.d2,
            self.spec.b1,
            self.spec.b2,
            modulus,
        )
    }
}

pub fn spec_hash(spec: &EmbeddingSpec, opts: &PlanOptions) -> String {
    let canonical = format!(
        "d1={};d2={};b1={};b2={};window={};full_rank={}",
        spec.d1,
        spec.d2,
        spec.b1,
        spec.b2,
        opts.window
            .as_ref()
            .map_or("default".to_string(), Window::to_string),
        opts.full_rank
    );
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(&digest[..8])
}

pub fn plan(spec: &EmbeddingSpec, opts: &PlanOptions) -> JobManifest {
    let range = plan_range(spec, opts);
    let jobs: Vec<JobRecord> = range
        .jobs
        .iter()
        .map(|j| JobRecord {
            id: j.id(),
            p: j.p,
            q: j.q,
            a: j.a,
            rows: j.rows,
            cols: j.cols,
            matrix: format!("matrices/{}.smf", j.id()),
            status: JobStatus::Pending,
            tier: None,
            result: None,
            reason: None,
            second_prime: None,
        })
        .collect();
    JobManifest {
        spec: SpecRecord {
            d1: spec.d1,
            d2: spec.d2,
            b1: spec.b1,
            b2: spec.b2,
        },
        window: range.window.clone(),
        full_rank: opts.full_rank,
        spec_hash: spec_hash(spec, opts),
        generator: format!("syz {}", env!("CARGO_PKG_VERSION")),
        job_count: jobs.len(),
        largest: range.largest().map(|j| (j.rows, j.cols)),
        jobs,
    }
}

/// `<out>/<hash>-p<prime>`: one directory per spec, window and field.
pub fn run_dir(out: &Path, manifest: &JobManifest, modulus: u32) -> PathBuf {
    out.join(format!("{}-p{modulus}", manifest.spec_hash))
}

pub fn write_manifest(dir: &Path, manifest: &JobManifest) -> Result<()> {
    let path = dir.join("manifest.json");
    if path.exists() {
        let old: JobManifest = read_json(&path)?;
        if old.spec_hash != manifest.spec_hash {
            return Err(Error::Integrity(format!(
                "{} belongs to spec hash {}, not {}",
                path.display(),
                old.spec_hash,
                manifest.spec_hash
            )));
        }
    }
    write_json(&path, manifest)
}

pub fn read_manifest(dir: &Path) -> Result<JobManifest> {
    read_json(&dir.join("manifest.json"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub spec_hash: String,
    pub modulus: u32,
}

/// Append-only JSON-lines log: a header line, then one terminal JobRecord per line.
#[derive(Debug)]
pub struct ResultStore {
    pub path: PathBuf,
    pub header: StoreHeader,
    pub records: BTreeMap<String, JobRecord>,
}

impl ResultStore {
    /// Open or create `results.jsonl` in `dir`, checking it belongs to the manifest.
    pub fn open(dir: &Path, manifest: &JobManifest, modulus: u32) -> Result<Self> {
        let path = dir.join("results.jsonl");
        let header = StoreHeader {
            spec_hash: manifest.spec_hash.clone(),
            modulus,
        };
        if !path.exists() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let mut line =
                serde_json::to_string(&header).map_err(|e| Error::json("store header", e))?;
            line.push('\n');
            crate::io::atomic_write(&path, line.as_bytes())?;
            return Ok(ResultStore {
                path,
                header,
                records: BTreeMap::new(),
            });
        }
        let store = ResultStore::load(&path)?;
        if store.header != header {
            return Err(Error::Integrity(format!(
                "{} was written for spec hash {} at prime {}; refusing to resume with {} at prime {}",
                path.display(),
                store.header.spec_hash,
                store.header.modulus,
                header.spec_hash,
                header.modulus
            )));
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.split_inclusive('\n');
        let first = lines
            .next()
            .ok_or_else(|| Error::format(path.display().to_string(), "empty result store"))?;
        let header: StoreHeader =
            serde_json::from_str(first).map_err(|e| Error::json(path.display().to_string(), e))?;
        let mut records: BTreeMap<String, JobRecord> = BTreeMap::new();
        let mut offset = first.len();
        for line in lines {
            let start = offset;
            offset += line.len();
            if line.trim().is_empty() {
                continue;
            }
            let rec: JobRecord = match serde_json::from_str(line) {
                Ok(r) if line.ends_with('\n') => r,
                // A torn final line from an interrupted append is cut off so later appends start clean.
                _ if offset == text.len() => {
                    warn!("dropping incomplete last line of {}", path.display());
                    let f = OpenOptions::new()
                        .write(true)
                        .open(path)
                        .map_err(|e| Error::io(path, e))?;
                    f.set_len(start as u64).map_err(|e| Error::io(path, e))?;
                    f.sync_data().map_err(|e| Error::io(path, e))?;
                    continue;
                }
                Ok(_) => unreachable!("only the last line can lack a newline"),
                Err(e) => return Err(Error::json(path.display().to_string(), e)),
            };
            match records.get(&rec.id) {
                Some(old) if old.status == JobStatus::Done => {
                    let same = rec.status != JobStatus::Done
                        || old.result.as_ref().map(|r| r.rank)
                            == rec.result.as_ref().map(|r| r.rank);
                    if !same {
                        return Err(Error::Integrity(format!(
                            "conflicting ranks stored for {}",
                            rec.id
                        )));
                    }
                }
                _ => {
                    records.insert(rec.id.clone(), rec);
                }
            }
        }
        Ok(ResultStore {
            path: path.to_path_buf(),
            header,
            records,
        })
    }

    fn append(&mut self, rec: JobRecord) -> Result<()> {
        if self
            .records
            .get(&rec.id)
            .is_some_and(|r| r.status == JobStatus::Done)
        {
            return Ok(());
        }
        let mut line = serde_json::to_string(&rec).map_err(|e| Error::json("job record", e))?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        f.write_all(line.as_bytes())
            .map_err(|e| Error::io(&self.path, e))?;
        f.sync_data().map_err(|e| Error::io(&self.path, e))?;
        self.records.insert(rec.id.clone(), rec);
        Ok(())
    }

    pub fn is_done(&self, id: &str) -> bool {
        self.records
            .get(id)
            .is_some_and(|r| r.status == JobStatus::Done)
    }

    pub fn ranks(&self) -> BTreeMap<String, u64> {
        self.records
            .values()
            .filter(|r| r.status == JobStatus::Done)
            .filter_map(|r| r.result.as_ref().map(|x| (r.id.clone(), x.rank)))
            .collect()
    }

    pub fn failed(&self) -> Vec<&JobRecord> {
        self.records
            .values()
            .filter(|r| r.status == JobStatus::Failed)
            .collect()
    }

    pub fn second_prime_disagreements(&self) -> Vec<&JobRecord> {
        self.records
            .values()
            .filter(|r| r.second_prime.as_ref().is_some_and(|c| !c.agrees))
            .collect()
    }
}

impl RankSource for ResultStore {
    fn rank(&self, id: &str) -> Option<u64> {
        self.records
            .get(id)
            .filter(|r| r.status == JobStatus::Done)
            .and_then(|r| r.result.as_ref().map(|x| x.rank))
    }
}

/// Status of every manifest job as seen on disk.
pub fn job_statuses(
    dir: &Path,
    manifest: &JobManifest,
    store: &ResultStore,
) -> BTreeMap<String, JobStatus> {
    manifest
        .jobs
        .iter()
        .map(|j| {
            let s = match store.records.get(&j.id) {
                Some(r) => r.status,
                None if dir.join("claims").join(&j.id).exists() => JobStatus::Running,
                None if dir.join(&j.matrix).exists() => JobStatus::Built,
                None => JobStatus::Pending,
            };
            (j.id.clone(), s)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExecOptions {
    pub workers: usize,
    /// Strictly ascending byte budgets.
    pub tiers: Vec<u64>,
    pub strategy: Strategy,
    pub second_prime: Option<u32>,
    pub sample_rate: f64,
    /// Keep SMF files for every job (otherwise only existing ones are read).
    pub write_matrices: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            workers: 1,
            tiers: DEFAULT_TIERS.to_vec(),
            strategy: Strategy::Auto,
            second_prime: None,
            sample_rate: DEFAULT_SAMPLE_RATE,
            write_matrices: false,
        }
    }
}

impl ExecOptions {
    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() || self.tiers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Usage(
                "memory tiers must be nonempty and strictly ascending".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.sample_rate) {
            return Err(Error::Usage("sample rate must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn initial_tier(&self, estimate: u64) -> usize {
        self.tiers
            .iter()
            .position(|&t| t >= estimate)
            .unwrap_or(self.tiers.len() - 1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExecSummary {
    pub scheduled: usize,
    pub done: usize,
    pub failed: usize,
    pub retries: usize,
    pub already_done: usize,
}

/// Deterministic membership in the second-prime sample.
pub fn in_sample(id: &str, rate: f64) -> bool {
    if rate <= 0.0 {
        return false;
    }
    let d = Sha256::digest(id.as_bytes());
    let x = u64::from_be_bytes(d[..8].try_into().expect("8 bytes"));
    (x as f64) < rate * (u64::MAX as f64)
}

fn load_matrix(
    dir: &Path,
    spec: &EmbeddingSpec,
    job: &JobRecord,
    write: bool,
) -> Result<StrandMatrix> {
    let path = dir.join(&job.matrix);
    if path.exists() {
        let m = read_smf(&path)?;
        if m.p != job.p || m.q != job.q || m.a != job.a {
            return Err(Error::Integrity(format!(
                "{} does not hold strand {}",
                path.display(),
                job.id
            )));
        }
        return Ok(StrandMatrix {
            matrix: m.matrix.with_modulus(spec.modulus),
            ..m
        });
    }
    let m = build_strand_matrix(spec, job.p, job.q, &job.a);
    if write {
        write_smf(&m, &path)?;
    }
    Ok(m)
}

/// Run one job through the tier ladder starting at its estimated tier.
fn run_job(
    dir: &Path,
    spec: &EmbeddingSpec,
    job: &JobRecord,
    opts: &ExecOptions,
) -> (JobRecord, usize) {
    let mut rec = job.clone();
    let m = match load_matrix(dir, spec, job, opts.write_matrices) {
        Ok(m) => m,
        Err(e) => {
            rec.status = JobStatus::Failed;
            rec.reason = Some(e.to_string());
            return (rec, 0);
        }
    };
    let mut tier = opts.initial_tier(job.estimate());
    let mut retries = 0;
    loop {
        let ro = RankOptions {
            strategy: opts.strategy,
            budget: Some(opts.tiers[tier]),
            ..RankOptions::default()
        };
        rec.tier = Some(opts.tiers[tier]);
        match sparse_rank(&m.matrix, &job.id, &ro) {
            Ok(report) => {
                if let Some(prime) = opts
                    .second_prime
                    .filter(|_| in_sample(&job.id, opts.sample_rate))
                {
                    let other = m.matrix.with_modulus(prime);
                    match sparse_rank(&other, &job.id, &ro) {
                        Ok(r2) => {
                            rec.second_prime = Some(SecondPrimeCheck {
                                prime,
                                rank: r2.rank,
                                agrees: r2.rank == report.rank,
                            })
                        }
                        Err(e) => warn!("second-prime rank of {} skipped: {e}", job.id),
                    }
                }
                rec.status = JobStatus::Done;
                rec.result = Some(report);
                rec.reason = None;
                return (rec, retries);
            }
            Err(Error::Resource { estimate, budget }) if tier + 1 < opts.tiers.len() => {
                info!(
                    "{} needs {estimate} bytes over tier {budget}; retrying higher",
                    job.id
                );
                tier += 1;
                retries += 1;
            }
            Err(e) => {
                rec.status = JobStatus::Failed;
                rec.reason = Some(e.to_string());
                return (rec, retries);
            }
        }
    }
}

/// Absorb records left in `outbox/` by external workers.
pub fn collect_outbox(dir: &Path, store: &mut ResultStore) -> Result<usize> {
    let outbox = dir.join("outbox");
    let Ok(entries) = fs::read_dir(&outbox) else {
        return Ok(0);
    };
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    let mut n = 0;
    for path in paths {
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let rec: JobRecord = read_json(&path)?;
        store.append(rec.clone())?;
        fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        let _ = fs::remove_file(dir.join("claims").join(&rec.id));
        n += 1;
    }
    Ok(n)
}

/// Run every job that is not already done. The coordinator is the only writer
/// of the store; workers hand results back over a channel.
pub fn execute(
    dir: &Path,
    manifest: &JobManifest,
    spec: &EmbeddingSpec,
    store: &mut ResultStore,
    opts: &ExecOptions,
) -> Result<ExecSummary> {
    opts.validate()?;
    if store.header.spec_hash != manifest.spec_hash {
        return Err(Error::Integrity(
            "result store and manifest disagree on the spec hash".into(),
        ));
    }
    collect_outbox(dir, store)?;
    let mut pending: Vec<&JobRecord> = manifest
        .jobs
        .iter()
        .filter(|j| !store.is_done(&j.id))
        .collect();
    let mut summary = ExecSummary {
        already_done: manifest.jobs.len() - pending.len(),
        scheduled: pending.len(),
        ..ExecSummary::default()
    };
    pending.sort_by(|x, y| {
        y.estimate()
            .cmp(&x.estimate())
            .then_with(|| x.id.cmp(&y.id))
    });
    let queue = Mutex::new(pending.into_iter().collect::<VecDeque<_>>());
    let (tx, rx) = mpsc::channel::<(JobRecord, usize)>();
    let mut write_err = None;
    std::thread::scope(|s| {
        for _ in 0..opts.workers.max(1) {
            let tx = tx.clone();
            let queue = &queue;
            s.spawn(move || loop {
                let Some(job) = queue.lock().expect("queue lock").pop_front() else {
                    break;
                };
                if tx.send(run_job(dir, spec, job, opts)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (rec, retries) in rx {
            summary.retries += retries;
            match rec.status {
                JobStatus::Done => summary.done += 1,
                _ => {
                    warn!(
                        "{} failed: {}",
                        rec.id,
                        rec.reason.as_deref().unwrap_or("unknown")
                    );
                    summary.failed += 1;
                }
            }
            if let Err(e) = store.append(rec) {
                write_err.get_or_insert(e);
                queue.lock().expect("queue lock").clear();
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    Ok(summary)
}

/// Continue an interrupted run: only jobs without a done record are executed.
pub fn resume(
    dir: &Path,
    spec: &EmbeddingSpec,
    opts: &ExecOptions,
) -> Result<(ResultStore, ExecSummary)> {
    let manifest = read_manifest(dir)?;
    let mut store = ResultStore::open(dir, &manifest, spec.modulus)?;
    let summary = execute(dir, &manifest, spec, &mut store, opts)?;
    Ok((store, summary))
}

/// External-worker loop: claim pending jobs through exclusive files in `claims/`,
/// write results to `outbox/`. Returns the number of jobs processed.
pub fn external_worker(
    dir: &Path,
    spec: &EmbeddingSpec,
    opts: &ExecOptions,
    limit: Option<usize>,
) -> Result<usize> {
    let manifest = read_manifest(dir)?;
    let store = ResultStore::load(&dir.join("results.jsonl"))?;
    if store.header.spec_hash != manifest.spec_hash || store.header.modulus != spec.modulus {
        return Err(Error::Integrity(
            "run directory does not match the requested spec and prime".into(),
        ));
    }
    let claims = dir.join("claims");
    let outbox = dir.join("outbox");
    fs::create_dir_all(&claims).map_err(|e| Error::io(&claims, e))?;
    fs::create_dir_all(&outbox).map_err(|e| Error::io(&outbox, e))?;
    let mut n = 0;
    for job in &manifest.jobs {
        if limit.is_some_and(|l| n >= l) {
            break;
        }
        if store.is_done(&job.id) || outbox.join(format!("{}.json", job.id)).exists() {
            continue;
        }
        let claim = claims.join(&job.id);
        match OpenOptions::new().write(true).create_new(true).open(&claim) {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&claim, e)),
        }
        let (rec, _) = run_job(dir, spec, job, opts);
        write_json(&outbox.join(format!("{}.json", job.id)), &rec)?;
        n += 1;
    }
    Ok(n)
}
