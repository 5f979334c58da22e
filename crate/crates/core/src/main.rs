use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use syzygy::betti::{assemble, check_duality, render_table, MultigradedBettiTable, TableFormat};
use syzygy::bs::{
    bs_coeffs_csv, bs_decompose, conjecture_suite, normalize_coefficients, Artifacts, Verdict,
};
use syzygy::grading::{koszul_dual_spec, DEFAULT_PRIME};
use syzygy::io::{atomic_write, read_json, write_json};
use syzygy::linalg::Strategy;
use syzygy::orchestrator::{
    execute, external_worker, job_statuses, plan, read_manifest, run_dir, write_manifest,
    ExecOptions, JobManifest, JobStatus, ResultStore, DEFAULT_SAMPLE_RATE, GIB,
};
use syzygy::pipeline::compose_failures;
use syzygy::schur::{
    decompose_table, decompositions_json, dual_bipartition, redundancy_report,
    render_decompositions,
};
use syzygy::stats::{row_distribution, schur_counts_csv, unimodality_checks};
use syzygy::strands::{build_strand_matrix, plan_range, write_smf, PlanOptions, Window};
use syzygy::{EmbeddingSpec, Error, Result};

#[derive(Parser)]
#[command(
    name = "syz",
    version,
    about = "Multigraded syzygies of P1 x P1 under Segre-Veronese embeddings"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct SpecArgs {
    #[arg(long)]
    d1: i64,
    #[arg(long)]
    d2: i64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    b1: i64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    b2: i64,
    #[arg(long, default_value_t = DEFAULT_PRIME)]
    prime: u32,
    /// Rows to rank, e.g. "q0:4-8,q1:3-7"; "none" ranks nothing. Default: every row
    /// the Hilbert function cannot settle.
    #[arg(long)]
    window: Option<String>,
    /// Also rank the top row of each stratum so the Hilbert identity becomes a check.
    #[arg(long)]
    full_rank: bool,
    /// Root directory for run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    M2,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VerifyMode {
    Hilbert,
    Duality,
    Compose,
    SecondPrime,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Write the job manifest for a spec.
    Plan {
        #[command(flatten)]
        spec: SpecArgs,
        /// Also plan with the default window and report whether it contains this plan.
        #[arg(long)]
        compare_default: bool,
    },
    /// Write the SMF matrix of every planned job.
    Build {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Compute (or resume computing) every rank in the manifest.
    Rank {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Ascending memory tiers, e.g. "2G,8G,32G,128G" (bare numbers are GiB).
        #[arg(long, default_value = "2G,8G,32G,128G")]
        tiers: String,
        #[arg(long, default_value = "auto")]
        strategy: String,
        /// Recompute a sample of ranks over this prime and report disagreements.
        #[arg(long)]
        second_prime: Option<u32>,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        sample_rate: f64,
        /// Act as a file-based external worker: claim jobs, write results to outbox/.
        #[arg(long)]
        external_worker: bool,
        /// Stop an external worker after this many jobs.
        #[arg(long)]
        max_jobs: Option<usize>,
        /// Write SMF files for jobs that do not have one yet.
        #[arg(long)]
        keep_matrices: bool,
    },
    /// Assemble Betti tables from the stored ranks.
    Assemble {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value = "m2")]
        format: FormatArg,
    },
    /// Schur decompositions of every nonzero K_{p,q}.
    Schur {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        json: bool,
    },
    /// Boij-Soderberg decomposition of the graded table.
    Bs {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Integrity suites: Hilbert identity, Koszul duality, d∘d = 0, second-prime agreement.
    Verify {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_enum, default_value = "all")]
        mode: VerifyMode,
    },
    /// CSV and JSON bundle: row profile, Schur counts, BS coefficients, conjecture checks.
    Report {
        #[command(flatten)]
        spec: SpecArgs,
        /// Row for row_profile.csv.
        #[arg(long, default_value_t = 1)]
        row: i64,
    },
}

struct Run {
    spec: EmbeddingSpec,
    opts: PlanOptions,
    manifest: JobManifest,
    dir: PathBuf,
}

impl Run {
    fn new(args: &SpecArgs) -> Result<Self> {
        let spec = EmbeddingSpec::new(args.d1, args.d2, args.b1, args.b2, args.prime)?;
        let window = match &args.window {
            Some(w) => Some(w.parse::<Window>()?),
            None => None,
        };
        let opts = PlanOptions {
            window,
            full_rank: args.full_rank,
        };
        let manifest = plan(&spec, &opts);
        let dir = run_dir(&args.out, &manifest, spec.modulus);
        Ok(Run {
            spec,
            opts,
            manifest,
            dir,
        })
    }

    fn ensure_manifest(&self) -> Result<()> {
        if !self.dir.join("manifest.json").exists() {
            write_manifest(&self.dir, &self.manifest)?;
        }
        Ok(())
    }

    fn table(&self) -> Result<MultigradedBettiTable> {
        load_table(&self.dir)
    }
}

fn load_table(dir: &Path) -> Result<MultigradedBettiTable> {
    let path = dir.join("betti.json");
    if !path.exists() {
        return Err(Error::Usage(format!(
            "{} is missing; run `syz assemble` first",
            path.display()
        )));
    }
    let v: serde_json::Value = read_json(&path)?;
    MultigradedBettiTable::from_json(&v)
}

fn parse_tiers(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let (num, mult) = match t.chars().last() {
                Some('G' | 'g') => (&t[..t.len() - 1], GIB),
                Some('M' | 'm') => (&t[..t.len() - 1], 1 << 20),
                Some('K' | 'k') => (&t[..t.len() - 1], 1 << 10),
                Some('B' | 'b') => (&t[..t.len() - 1], 1),
                _ => (t, GIB),
            };
            num.parse::<u64>()
                .map(|n| n * mult)
                .map_err(|_| Error::Usage(format!("bad memory tier `{t}`")))
        })
        .collect()
}

fn cmd_plan(args: &SpecArgs, compare_default: bool) -> Result<()> {
    let run = Run::new(args)?;
    write_manifest(&run.dir, &run.manifest)?;
    println!("spec {}", run.spec.label());
    println!(
        "window {}",
        run.manifest.window.as_deref().unwrap_or("default")
    );
    println!("jobs {}", run.manifest.job_count);
    if let Some((r, c)) = run.manifest.largest {
        println!("largest {r}x{c}");
    }
    if compare_default && run.opts.window.is_some() {
        let default = plan_range(
            &run.spec,
            &PlanOptions {
                window: None,
                full_rank: run.opts.full_rank,
            },
        );
        let windowed = plan_range(&run.spec, &run.opts);
        let sup = default.is_superset_of(&windowed);
        println!(
            "default window: {} jobs, {} the windowed plan",
            default.len(),
            if sup {
                "a superset of"
            } else {
                "NOT a superset of"
            }
        );
    }
    println!("manifest {}", run.dir.join("manifest.json").display());
    Ok(())
}

fn cmd_build(args: &SpecArgs) -> Result<()> {
    let run = Run::new(args)?;
    run.ensure_manifest()?;
    let mut written = 0;
    let mut largest: Option<(u64, String)> = None;
    for job in &run.manifest.jobs {
        let path = run.dir.join(&job.matrix);
        if path.exists() {
            continue;
        }
        let m = build_strand_matrix(&run.spec, job.p, job.q, &job.a);
        write_smf(&m, &path)?;
        written += 1;
        let size = job.rows * job.cols;
        if largest.as_ref().is_none_or(|l| size > l.0) {
            let shape = format!(
                "{} {}x{}, {} nonzero rows",
                job.id,
                job.rows,
                job.cols,
                m.hit_rows()
            );
            largest = Some((size, shape));
        }
    }
    println!(
        "built {written} matrices ({} already present)",
        run.manifest.jobs.len() - written
    );
    if let Some((_, shape)) = largest {
        println!("largest built {shape}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_rank(
    args: &SpecArgs,
    workers: usize,
    tiers: &str,
    strategy: &str,
    second_prime: Option<u32>,
    sample_rate: f64,
    external: bool,
    max_jobs: Option<usize>,
    keep_matrices: bool,
) -> Result<bool> {
    let run = Run::new(args)?;
    run.ensure_manifest()?;
    if let Some(p) = second_prime {
        run.spec.with_modulus(p)?;
    }
    let opts = ExecOptions {
        workers,
        tiers: parse_tiers(tiers)?,
        strategy: strategy.parse::<Strategy>()?,
        second_prime,
        sample_rate,
        write_matrices: keep_matrices,
    };
    opts.validate()?;
    let manifest = read_manifest(&run.dir)?;
    if manifest.spec_hash != run.manifest.spec_hash {
        return Err(Error::Integrity(format!(
            "{} holds a different spec",
            run.dir.display()
        )));
    }
    let mut store = ResultStore::open(&run.dir, &manifest, run.spec.modulus)?;
    if external {
        let n = external_worker(&run.dir, &run.spec, &opts, max_jobs)?;
        println!("worker processed {n} jobs");
        return Ok(true);
    }
    let summary = execute(&run.dir, &manifest, &run.spec, &mut store, &opts)?;
    println!(
        "jobs {} done {} failed {} retries {} skipped {}",
        summary.scheduled, summary.done, summary.failed, summary.retries, summary.already_done
    );
    let bad = store.second_prime_disagreements();
    for r in &bad {
        eprintln!("second-prime disagreement on {}", r.id);
    }
    Ok(store.failed().is_empty() && bad.is_empty())
}

fn cmd_assemble(args: &SpecArgs, format: FormatArg) -> Result<bool> {
    let run = Run::new(args)?;
    let manifest = read_manifest(&run.dir)?;
    let store = ResultStore::open(&run.dir, &manifest, run.spec.modulus)?;
    let statuses = job_statuses(&run.dir, &manifest, &store);
    let open = statuses.values().filter(|s| **s != JobStatus::Done).count();
    if open > 0 {
        return Err(Error::Integrity(format!(
            "{open} jobs are not done; run `syz rank` first"
        )));
    }
    let table = assemble(&run.spec, &run.opts, &store)?;
    let mismatches = table.hilbert_mismatches();
    let json = render_table(&table, TableFormat::Json);
    atomic_write(&run.dir.join("betti.json"), json.as_bytes())?;
    atomic_write(
        &run.dir.join("betti.m2"),
        render_table(&table, TableFormat::M2).as_bytes(),
    )?;
    atomic_write(
        &run.dir.join("betti.csv"),
        render_table(&table, TableFormat::Csv).as_bytes(),
    )?;
    let fmt = match format {
        FormatArg::M2 => TableFormat::M2,
        FormatArg::Json => TableFormat::Json,
        FormatArg::Csv => TableFormat::Csv,
    };
    print!("{}", render_table(&table, fmt));
    for (a, lhs, rhs) in &mismatches {
        eprintln!("Hilbert identity fails at {a}: alternating sum {lhs}, numerator {rhs}");
    }
    Ok(mismatches.is_empty())
}

fn cmd_schur(args: &SpecArgs, json: bool) -> Result<()> {
    let run = Run::new(args)?;
    let table = run.table()?;
    let decomps = decompose_table(&table)?;
    write_json(
        &run.dir.join("schur.json"),
        &decompositions_json(&run.spec, &decomps),
    )?;
    let text = render_decompositions(&decomps);
    atomic_write(&run.dir.join("schur.txt"), text.as_bytes())?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&decompositions_json(&run.spec, &decomps)).expect("json")
        );
    } else {
        print!("{text}");
    }
    Ok(())
}

fn cmd_bs(args: &SpecArgs) -> Result<()> {
    let run = Run::new(args)?;
    let graded = run.table()?.collapse();
    let dec = bs_decompose(&graded)?;
    let (_, report) = normalize_coefficients(&dec, &run.spec);
    let mut v = dec.to_json();
    v["normalization"] = serde_json::to_value(&report).expect("json");
    write_json(&run.dir.join("bs.json"), &v)?;
    for t in &dec.terms {
        println!("{} {:?}", t.coefficient, t.delta);
    }
    println!(
        "sum of a/N! = {} (rising product {}, falling product {})",
        report.sum, report.rising_formula, report.falling_formula
    );
    Ok(())
}

fn find_dual_run(out: &Path, dual: &EmbeddingSpec) -> Option<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    dirs.sort();
    dirs.into_iter().find(|d| {
        d.file_name().is_some_and(|n| {
            n.to_string_lossy()
                .ends_with(&format!("-p{}", dual.modulus))
        }) && d.join("betti.json").exists()
            && read_manifest(d).is_ok_and(|m| {
                (m.spec.d1, m.spec.d2, m.spec.b1, m.spec.b2) == (dual.d1, dual.d2, dual.b1, dual.b2)
            })
    })
}

fn report_line(ok: bool, what: &str) -> bool {
    println!("{} {what}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn cmd_verify(args: &SpecArgs, mode: VerifyMode) -> Result<bool> {
    let run = Run::new(args)?;
    let all = mode == VerifyMode::All;
    let mut ok = true;
    if all || mode == VerifyMode::Compose {
        let bad = compose_failures(&run.spec);
        for (p, q, a) in &bad {
            eprintln!("d∘d != 0 at strand ({p},{q}) multidegree {a}");
        }
        ok &= report_line(bad.is_empty(), "compose: d∘d = 0 on every strand");
    }
    if all || mode == VerifyMode::Hilbert {
        let table = run.table()?;
        let bad = table.hilbert_mismatches();
        ok &= report_line(
            bad.is_empty(),
            &format!(
                "hilbert: alternating sum, {} multidegrees disagree; unsigned sum {}",
                bad.len(),
                if table.unsigned_hilbert_holds() {
                    "also holds"
                } else {
                    "fails"
                }
            ),
        );
    }
    if all || mode == VerifyMode::SecondPrime {
        let manifest = read_manifest(&run.dir)?;
        let store = ResultStore::open(&run.dir, &manifest, run.spec.modulus)?;
        let checked = store
            .records
            .values()
            .filter(|r| r.second_prime.is_some())
            .count();
        let bad = store.second_prime_disagreements().len();
        ok &= report_line(
            bad == 0,
            &format!("second-prime: {checked} sampled, {bad} disagree"),
        );
    }
    if all || mode == VerifyMode::Duality {
        let dm = koszul_dual_spec(&run.spec);
        match find_dual_run(&args.out, &dm.dual_spec) {
            None if mode == VerifyMode::Duality => {
                return Err(Error::Usage(format!(
                    "no assembled run for the dual spec {} under {}",
                    dm.dual_spec.label(),
                    args.out.display()
                )))
            }
            None => println!(
                "SKIP duality: no assembled run for {}",
                dm.dual_spec.label()
            ),
            Some(dual_dir) => {
                let table = run.table()?;
                let dual_table = load_table(&dual_dir)?;
                let disc = check_duality(&table.collapse(), &dual_table.collapse(), &dm)?;
                for d in &disc {
                    eprintln!(
                        "dual K_{{{},{}}} = {} but rotated entry is {}",
                        d.p, d.q, d.dual_value, d.rotated_value
                    );
                }
                ok &= report_line(
                    disc.is_empty(),
                    &format!("duality: table of {} rotated by 180°", dm.dual_spec.label()),
                );
                if dm.alpha.is_some() {
                    let ours = decompose_table(&table)?;
                    let theirs = decompose_table(&dual_table)?;
                    let mut schur_ok = ours.len() == theirs.len();
                    for ((p, q), d) in &theirs {
                        let (rp, rq) = dm.index_map(*p, *q);
                        let mut mapped = BTreeMap::new();
                        for (bp, m) in &d.summands {
                            mapped.insert(dual_bipartition(bp, &dm)?, *m);
                        }
                        schur_ok &= ours.get(&(rp, rq)).is_some_and(|o| o.summands == mapped);
                    }
                    ok &= report_line(
                        schur_ok,
                        "duality: Schur summands match under weight duality",
                    );
                } else {
                    println!("SKIP weight duality: alpha is not integral");
                }
            }
        }
    }
    Ok(ok)
}

fn cmd_report(args: &SpecArgs, row: i64) -> Result<()> {
    let run = Run::new(args)?;
    let table = run.table()?;
    let graded = table.collapse();
    let dir = run.dir.join("report");
    let profile = row_distribution(&graded, row);
    atomic_write(&dir.join("row_profile.csv"), profile.to_csv().as_bytes())?;
    let decomps = decompose_table(&table)?;
    atomic_write(
        &dir.join("schur_counts.csv"),
        schur_counts_csv(&decomps).as_bytes(),
    )?;
    let redundancy = redundancy_report(&decomps);
    write_json(&dir.join("redundancy.json"), &redundancy)?;
    write_json(
        &dir.join("unimodality.json"),
        &unimodality_checks(&graded, Some(&decomps)),
    )?;
    let dec = match bs_decompose(&graded) {
        Ok(d) => {
            atomic_write(
                &dir.join("bs_coeffs.csv"),
                bs_coeffs_csv(&d, &run.spec).as_bytes(),
            )?;
            Some(d)
        }
        Err(e) => {
            eprintln!("no BS decomposition: {e}");
            None
        }
    };
    let suite = conjecture_suite(
        &run.spec,
        &Artifacts {
            graded: &graded,
            schur: Some(&decomps),
            bs: dec.as_ref(),
            redundancy: Some(&redundancy),
        },
    );
    write_json(&dir.join("conjectures.json"), &suite)?;
    for c in &suite {
        let v = match c.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "n/a",
            Verdict::Unavailable => "unavailable",
        };
        println!("{v:<12} {}", c.name);
    }
    if let Some((mean, var)) = profile.moments() {
        println!("row {row}: mean p {mean:.4}, variance {var:.4}");
    }
    println!("report written to {}", dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Plan {
            spec,
            compare_default,
        } => cmd_plan(&spec, compare_default).map(|_| true),
        Command::Build { spec } => cmd_build(&spec).map(|_| true),
        Command::Rank {
            spec,
            workers,
            tiers,
            strategy,
            second_prime,
            sample_rate,
            external_worker,
            max_jobs,
            keep_matrices,
        } => cmd_rank(
            &spec,
            workers,
            &tiers,
            &strategy,
            second_prime,
            sample_rate,
            external_worker,
            max_jobs,
            keep_matrices,
        ),
        Command::Assemble { spec, format } => cmd_assemble(&spec, format),
        Command::Schur { spec, json } => cmd_schur(&spec, json).map(|_| true),
        Command::Bs { spec } => cmd_bs(&spec).map(|_| true),
        Command::Verify { spec, mode } => cmd_verify(&spec, mode),
        Command::Report { spec, row } => cmd_report(&spec, row).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    info!("syz {}", env!("CARGO_PKG_VERSION"));
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
