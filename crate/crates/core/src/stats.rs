//! Row distributions, unimodality audits and Schur-count statistics.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::betti::GradedBettiTable;
use crate::schur::SchurDecomposition;

#[derive(Clone, Debug, PartialEq)]
pub struct RowProfile {
    pub q: i64,
    /// (p, β_{p,p+q}) over the nonzero entries.
    pub values: Vec<(i64, u64)>,
    pub normalized: Vec<BigRational>,
}

impl RowProfile {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mean and variance of p weighted by the row.
    pub fn moments(&self) -> Option<(f64, f64)> {
        let total: f64 = self.values.iter().map(|&(_, v)| v as f64).sum();
        if total == 0.0 {
            return None;
        }
        let mean = self
            .values
            .iter()
            .map(|&(p, v)| p as f64 * v as f64)
            .sum::<f64>()
            / total;
        let var = self
            .values
            .iter()
            .map(|&(p, v)| (p as f64 - mean).powi(2) * v as f64)
            .sum::<f64>()
            / total;
        Some((mean, var))
    }

    /// row_profile.csv: p, value, normalized_num, normalized_den.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,value,normalized_num,normalized_den\n");
        for ((p, v), r) in self.values.iter().zip(&self.normalized) {
            out.push_str(&format!("{p},{v},{},{}\n", r.numer(), r.denom()));
        }
        out
    }
}

pub fn row_distribution(table: &GradedBettiTable, q: i64) -> RowProfile {
    let values: Vec<(i64, u64)> = table
        .entries
        .iter()
        .filter(|((_, qq), v)| *qq == q && **v > 0)
        .map(|(&(p, _), &v)| (p, v))
        .collect();
    let total: u64 = values.iter().map(|v| v.1).sum();
    let normalized = values
        .iter()
        .map(|&(_, v)| BigRational::new(BigInt::from(v), BigInt::from(total)))
        .collect();
    RowProfile {
        q,
        values,
        normalized,
    }
}

pub fn profile_sum(profile: &RowProfile) -> BigRational {
    profile
        .normalized
        .iter()
        .fold(BigRational::zero(), |acc, x| acc + x)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Unimodality {
    pub unimodal: bool,
    /// Indices (i, j, k) with s_j strictly below both s_i and s_k.
    pub violation: Option<(usize, usize, usize)>,
}

/// Weak unimodality: no entry strictly smaller than some earlier and some later entry.
pub fn unimodality<T: Ord + Copy>(seq: &[T]) -> Unimodality {
    for j in 1..seq.len().saturating_sub(1) {
        let before = seq[..j].iter().rposition(|x| *x > seq[j]);
        let after = seq[j + 1..].iter().position(|x| *x > seq[j]);
        if let (Some(i), Some(k)) = (before, after) {
            return Unimodality {
                unimodal: false,
                violation: Some((i, j, j + 1 + k)),
            };
        }
    }
    Unimodality {
        unimodal: true,
        violation: None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UnimodalityEntry {
    pub statistic: String,
    pub q: i64,
    pub sequence: Vec<u64>,
    pub result: Unimodality,
}

fn row_sequence(table: &GradedBettiTable, f: impl Fn(i64) -> u64) -> Vec<u64> {
    let mut v: Vec<u64> = (0..=table.spec.codim() + 1).map(f).collect();
    while v.last() == Some(&0) {
        v.pop();
    }
    let first = v.iter().position(|&x| x != 0).unwrap_or(v.len());
    v.drain(..first);
    v
}

/// All four row statistics: Betti numbers, Schur counts with multiplicity,
/// largest multiplicity, and distinct Schur counts.
pub fn unimodality_checks(
    table: &GradedBettiTable,
    decomps: Option<&BTreeMap<(i64, i64), SchurDecomposition>>,
) -> Vec<UnimodalityEntry> {
    let mut out = Vec::new();
    let counts = decomps.map(schur_counts);
    for q in 0..=2 {
        let mut stats: Vec<(&str, Vec<u64>)> =
            vec![("betti", row_sequence(table, |p| table.get(p, q)))];
        if let Some(c) = &counts {
            let get = |p: i64| c.get(&(p, q)).copied().unwrap_or((0, 0, 0));
            stats.push(("schur-with-multiplicity", row_sequence(table, |p| get(p).1)));
            stats.push(("schur-max-multiplicity", row_sequence(table, |p| get(p).2)));
            stats.push(("schur-distinct", row_sequence(table, |p| get(p).0 as u64)));
        }
        for (name, seq) in stats {
            if seq.is_empty() {
                continue;
            }
            let result = unimodality(&seq);
            out.push(UnimodalityEntry {
                statistic: name.to_string(),
                q,
                sequence: seq,
                result,
            });
        }
    }
    out
}

/// (distinct, with multiplicity, max multiplicity) per (p, q).
pub fn schur_counts(
    decomps: &BTreeMap<(i64, i64), SchurDecomposition>,
) -> BTreeMap<(i64, i64), (usize, u64, u64)> {
    decomps
        .iter()
        .map(|(&k, d)| {
            (
                k,
                (d.distinct(), d.with_multiplicity(), d.max_multiplicity()),
            )
        })
        .collect()
}

/// schur_counts.csv: p, q, distinct, with_mult, max_mult.
pub fn schur_counts_csv(decomps: &BTreeMap<(i64, i64), SchurDecomposition>) -> String {
    let mut out = String::from("p,q,distinct,with_mult,max_mult\n");
    for ((p, q), (d, w, m)) in schur_counts(decomps) {
        out.push_str(&format!("{p},{q},{d},{w},{m}\n"));
    }
    out
}
