mod common;

use std::collections::BTreeMap;
use std::fs;

use common::{spec, window, GOLDEN};
use syzygy::betti::{
    assemble, edge_vanishes, render_table, MultigradedBettiTable, Provenance, TableFormat,
};
use syzygy::grading::{EmbeddingSpec, Multidegree};
use syzygy::hilbert::strand_dimension;
use syzygy::linalg::{dense_rank_oracle, sparse_rank, RankOptions};
use syzygy::orchestrator::{
    execute, external_worker, plan, resume, run_dir, write_manifest, ExecOptions, JobStatus,
    ResultStore,
};
use syzygy::pipeline::{compute_table, compute_table_with};
use syzygy::strands::{build_strand_matrix, plan_range, strata, PlanOptions};
use syzygy::Error;

#[test]
fn quadric_entry() {
    let s = spec(0, 0, 1, 1);
    let t = compute_table(&s, &PlanOptions::default()).unwrap();
    assert_eq!(t.get(1, &Multidegree::new(1, 1, 1, 1)), 1);
    let g = t.collapse();
    assert_eq!(g.entries, BTreeMap::from([((0, 0), 1), ((1, 1), 1)]));
}

#[test]
fn small_golden_tables_with_default_plan() {
    for g in &GOLDEN[..3] {
        let t = compute_table(&g.spec(), &PlanOptions::default()).unwrap();
        assert_eq!(t.collapse(), g.table(), "{}", g.spec().label());
        assert!(t.hilbert_mismatches().is_empty());
    }
}

#[test]
fn full_rank_mode_agrees_with_forcing() {
    let s = spec(0, 0, 2, 3);
    let opts = PlanOptions {
        window: None,
        full_rank: true,
    };
    let t = compute_table(&s, &opts).unwrap();
    assert_eq!(t.collapse(), GOLDEN[1].table());
    // Only strata with a single present row are still placed by the Hilbert function.
    for (p, a, _, prov) in t.canonical_entries() {
        let st = strata(&s, None).into_iter().find(|st| st.a == a).unwrap();
        assert_eq!(
            prov == Provenance::HilbertForced,
            st.present.len() < 2,
            "K_{p} at {a}"
        );
    }
}

#[test]
fn empty_window_forces_everything_for_10_24() {
    let s = spec(1, 0, 2, 4);
    let none = window("none");
    assert!(plan_range(&s, &none).is_empty());
    let forced = compute_table(&s, &none).unwrap();
    assert!(forced
        .canonical_entries()
        .all(|e| e.3 == Provenance::HilbertForced));
    let ranked = compute_table(&s, &PlanOptions::default()).unwrap();
    assert_eq!(forced.collapse(), ranked.collapse());
}

#[test]
fn json_round_trip_and_csv() {
    let s = spec(1, 1, 2, 3);
    let t = compute_table(&s, &PlanOptions::default()).unwrap();
    let text = render_table(&t, TableFormat::Json);
    let back = MultigradedBettiTable::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back, t);
    let csv = render_table(&t, TableFormat::Csv);
    let total: u64 = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(6).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, t.collapse().entries.values().sum::<u64>());
}

#[test]
fn orbit_entries_agree() {
    let s = spec(1, 2, 2, 3);
    let t = compute_table(&s, &PlanOptions::default()).unwrap();
    for (p, a, v, _) in t.expanded() {
        for b in a.orbit() {
            assert_eq!(t.get(p, &b), v);
        }
    }
}

#[test]
fn strand_ranks_match_dense_oracle_and_rank_nullity() {
    for s in [spec(0, 0, 2, 3), spec(1, 1, 2, 3), spec(1, 2, 2, 3)] {
        let mut ranks: BTreeMap<(i64, i64, Multidegree), u64> = BTreeMap::new();
        for st in strata(&s, None) {
            for q in 0..=2 {
                let p = st.k - q;
                if p < 1 {
                    continue;
                }
                let m = build_strand_matrix(&s, p, q, &st.a);
                if (m.matrix.rows * m.matrix.cols) as u64 > 1_000_000 {
                    continue;
                }
                let r = sparse_rank(&m.matrix, &m.id(), &RankOptions::default())
                    .unwrap()
                    .rank;
                assert_eq!(r, dense_rank_oracle(&m.matrix).unwrap(), "{}", m.id());
                ranks.insert((p, q, st.a), r);
            }
        }
        for (&(p, q, a), &r) in &ranks {
            if let Some(&r_in) = ranks.get(&(p + 1, q - 1, a)) {
                assert!(r + r_in <= strand_dimension(&s, p, q, &a));
            }
        }
    }
}

#[test]
fn non_cohen_macaulay_spec_is_reported() {
    let s = spec(0, 2, 2, 2);
    assert!(!s.is_cohen_macaulay());
    let err = compute_table(&s, &PlanOptions::default()).unwrap_err();
    assert!(
        matches!(&err, Error::Integrity(m) if m.contains("Cohen-Macaulay")),
        "{err}"
    );
}

#[test]
fn wrong_rank_is_caught() {
    let s = spec(0, 0, 2, 2);
    let opts = PlanOptions::default();
    let jobs = plan_range(&s, &opts);
    let mut ranks: BTreeMap<String, u64> = jobs
        .jobs
        .iter()
        .map(|j| {
            let m = build_strand_matrix(&s, j.p, j.q, &j.a);
            (
                j.id(),
                sparse_rank(&m.matrix, &j.id(), &RankOptions::default())
                    .unwrap()
                    .rank,
            )
        })
        .collect();
    let victim = jobs.largest().unwrap().id();
    *ranks.get_mut(&victim).unwrap() += 50;
    assert!(matches!(
        assemble(&s, &opts, &ranks),
        Err(Error::Integrity(_))
    ));
}

fn exec(workers: usize) -> ExecOptions {
    ExecOptions {
        workers,
        ..ExecOptions::default()
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let s = spec(0, 0, 2, 2);
    let opts = PlanOptions::default();
    let m = plan(&s, &opts);
    let mut tables = Vec::new();
    let mut ranks = Vec::new();
    for workers in [1, 8] {
        let tmp = tempfile::tempdir().unwrap();
        let dir = run_dir(tmp.path(), &m, s.modulus);
        write_manifest(&dir, &m).unwrap();
        let mut store = ResultStore::open(&dir, &m, s.modulus).unwrap();
        let summary = execute(&dir, &m, &s, &mut store, &exec(workers)).unwrap();
        assert_eq!(summary.done, m.jobs.len());
        ranks.push(store.ranks());
        tables.push(render_table(
            &assemble(&s, &opts, &store).unwrap(),
            TableFormat::Json,
        ));
    }
    assert_eq!(ranks[0], ranks[1]);
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn tiers_follow_estimates_and_top_tier_failure() {
    let s = spec(0, 0, 2, 3);
    let opts = PlanOptions::default();
    let m = plan(&s, &opts);
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_dir(tmp.path(), &m, s.modulus);
    write_manifest(&dir, &m).unwrap();
    let mut store = ResultStore::open(&dir, &m, s.modulus).unwrap();
    let small = 64 << 10;
    let o = ExecOptions {
        tiers: vec![small, 1 << 30],
        ..exec(2)
    };
    let summary = execute(&dir, &m, &s, &mut store, &o).unwrap();
    assert_eq!(summary.failed, 0);
    let mut big = 0;
    for r in store.records.values() {
        let tier = r.tier.unwrap();
        if r.estimate() > small {
            assert_eq!(tier, 1 << 30, "{}", r.id);
            big += 1;
        }
    }
    assert!(big > 0);

    let tmp = tempfile::tempdir().unwrap();
    let dir = run_dir(tmp.path(), &m, s.modulus);
    write_manifest(&dir, &m).unwrap();
    let mut store = ResultStore::open(&dir, &m, s.modulus).unwrap();
    let o = ExecOptions {
        tiers: vec![512, 1024],
        ..exec(1)
    };
    let summary = execute(&dir, &m, &s, &mut store, &o).unwrap();
    assert!(summary.failed > 0);
    assert!(store
        .failed()
        .iter()
        .all(|r| r.reason.as_deref().is_some_and(|x| x.contains("budget"))));
}

#[test]
fn resume_runs_only_missing_jobs() {
    let s = spec(0, 0, 2, 2);
    let m = plan(&s, &PlanOptions::default());
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_dir(tmp.path(), &m, s.modulus);
    write_manifest(&dir, &m).unwrap();
    let mut store = ResultStore::open(&dir, &m, s.modulus).unwrap();
    execute(&dir, &m, &s, &mut store, &exec(2)).unwrap();

    // Drop half the records, leaving a torn last line as an interrupted append would.
    let text = fs::read_to_string(dir.join("results.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let keep = 1 + (lines.len() - 1) / 2;
    let mut cut = lines[..keep].join("\n");
    cut.push_str("\n{\"id\": \"p3-q1");
    fs::write(dir.join("results.jsonl"), cut).unwrap();

    let (store, summary) = resume(&dir, &s, &exec(3)).unwrap();
    assert_eq!(summary.already_done, keep - 1);
    assert_eq!(summary.scheduled, m.jobs.len() - (keep - 1));
    assert_eq!(store.ranks().len(), m.jobs.len());
    let (_, again) = resume(&dir, &s, &exec(3)).unwrap();
    assert_eq!(again.scheduled, 0);
}

#[test]
fn resume_refuses_other_spec() {
    let s = spec(0, 0, 2, 2);
    let m = plan(&s, &PlanOptions::default());
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_dir(tmp.path(), &m, s.modulus);
    write_manifest(&dir, &m).unwrap();
    ResultStore::open(&dir, &m, s.modulus).unwrap();
    let text = fs::read_to_string(dir.join("results.jsonl")).unwrap();
    fs::write(
        dir.join("results.jsonl"),
        text.replace(&m.spec_hash, "0000000000000000"),
    )
    .unwrap();
    assert!(matches!(
        resume(&dir, &s, &exec(1)),
        Err(Error::Integrity(_))
    ));
}

#[test]
fn external_workers_share_a_directory() {
    let s = spec(1, 1, 2, 3);
    let opts = PlanOptions::default();
    let m = plan(&s, &opts);
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_dir(tmp.path(), &m, s.modulus);
    write_manifest(&dir, &m).unwrap();
    ResultStore::open(&dir, &m, s.modulus).unwrap();
    let o = ExecOptions {
        write_matrices: true,
        ..exec(1)
    };
    let a = external_worker(&dir, &s, &o, Some(5)).unwrap();
    let b = external_worker(&dir, &s, &o, None).unwrap();
    assert_eq!(a + b, m.jobs.len());
    assert_eq!(external_worker(&dir, &s, &o, None).unwrap(), 0);
    let mut store = ResultStore::open(&dir, &m, s.modulus).unwrap();
    let summary = execute(&dir, &m, &s, &mut store, &exec(1)).unwrap();
    assert_eq!(summary.scheduled, 0);
    assert!(store.records.values().all(|r| r.status == JobStatus::Done));
    assert_eq!(
        assemble(&s, &opts, &store).unwrap().collapse(),
        GOLDEN[2].table()
    );
}

#[test]
fn manifest_is_prime_independent() {
    let s = spec(0, 0, 2, 3);
    let a = plan(&s, &PlanOptions::default());
    let b = plan(&s.with_modulus(101).unwrap(), &PlanOptions::default());
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn second_prime_sampling_agrees() {
    let s = spec(0, 0, 2, 3);
    let m = plan(&s, &PlanOptions::default());
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_dir(tmp.path(), &m, s.modulus);
    write_manifest(&dir, &m).unwrap();
    let mut store = ResultStore::open(&dir, &m, s.modulus).unwrap();
    let o = ExecOptions {
        second_prime: Some(65521),
        sample_rate: 1.0,
        ..exec(2)
    };
    execute(&dir, &m, &s, &mut store, &o).unwrap();
    assert!(store
        .records
        .values()
        .all(|r| r.second_prime.as_ref().is_some_and(|c| c.agrees)));
}

#[test]
fn other_primes_give_the_same_table() {
    let s: EmbeddingSpec = spec(0, 0, 2, 3).with_modulus(101).unwrap();
    let t = compute_table_with(&s, &PlanOptions::default(), &RankOptions::default(), 2).unwrap();
    assert_eq!(t.collapse().entries, GOLDEN[1].table().entries);
}

#[test]
fn edge_rows_vanish_past_sections() {
    for g in &GOLDEN[..3] {
        let t = compute_table(&g.spec(), &PlanOptions::default())
            .unwrap()
            .collapse();
        for (&(p, q), &v) in &t.entries {
            assert!(
                v == 0 || !edge_vanishes(&t.spec, p, q),
                "{} K_{p},{q}",
                t.spec.label()
            );
        }
    }
    for (b1, b2, d1, d2) in [(1, 2, 2, 3), (0, 1, 2, 3), (2, 1, 3, 2), (0, 0, 1, 3)] {
        let s = spec(b1, b2, d1, d2);
        let t = compute_table(&s, &PlanOptions::default())
            .unwrap()
            .collapse();
        for (&(p, q), &v) in &t.entries {
            assert!(
                v == 0 || !edge_vanishes(&s, p, q),
                "{} K_{p},{q}",
                s.label()
            );
        }
    }
}
