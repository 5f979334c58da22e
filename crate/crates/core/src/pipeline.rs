//! In-process driver: plan, rank every job, assemble. No files are touched.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::betti::{assemble, MultigradedBettiTable};
use crate::error::{Error, Result};
use crate::grading::EmbeddingSpec;
use crate::linalg::{sparse_rank, RankOptions};
use crate::strands::{build_strand_matrix, compose_check, plan_range, PlanOptions, PlannedJob};

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Ranks of the given jobs, largest first across `workers` threads.
pub fn rank_jobs(
    spec: &EmbeddingSpec,
    jobs: &[PlannedJob],
    opts: &RankOptions,
    workers: usize,
) -> Result<BTreeMap<String, u64>> {
    let mut order: Vec<&PlannedJob> = jobs.iter().collect();
    order.sort_by(|x, y| {
        (y.rows * y.cols)
            .cmp(&(x.rows * x.cols))
            .then_with(|| x.id().cmp(&y.id()))
    });
    let next = AtomicUsize::new(0);
    let out = Mutex::new(BTreeMap::new());
    let first_err: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..workers.max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = order.get(i) else { break };
                if first_err.lock().expect("lock").is_some() {
                    break;
                }
                let m = build_strand_matrix(spec, job.p, job.q, &job.a);
                match sparse_rank(&m.matrix, &job.id(), opts) {
                    Ok(r) => {
                        out.lock().expect("lock").insert(job.id(), r.rank);
                    }
                    Err(e) => {
                        first_err.lock().expect("lock").get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = first_err.into_inner().expect("lock") {
        return Err(e);
    }
    Ok(out.into_inner().expect("lock"))
}

/// Full in-memory computation of the multigraded Betti table.
pub fn compute_table(spec: &EmbeddingSpec, plan: &PlanOptions) -> Result<MultigradedBettiTable> {
    compute_table_with(spec, plan, &RankOptions::default(), default_workers())
}

pub fn compute_table_with(
    spec: &EmbeddingSpec,
    plan: &PlanOptions,
    rank: &RankOptions,
    workers: usize,
) -> Result<MultigradedBettiTable> {
    let jobs = plan_range(spec, plan);
    let ranks = rank_jobs(spec, &jobs.jobs, rank, workers)?;
    assemble(spec, plan, &ranks)
}

/// Strands (p, q, a) where ∂∘∂ fails to vanish; empty means the complex is sound.
pub fn compose_failures(spec: &EmbeddingSpec) -> Vec<(i64, i64, crate::grading::Multidegree)> {
    let mut bad = Vec::new();
    for k in 0..=spec.codim() + 2 {
        for a in spec.canonical_multidegrees(k) {
            for q in 0..=k {
                let p = k - q;
                if p >= 2 && !compose_check(spec, p, q, &a) {
                    bad.push((p, q, a));
                }
            }
        }
    }
    bad
}
