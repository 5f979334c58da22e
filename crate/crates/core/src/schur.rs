//! GL2 x GL2 characters, greedy highest-weight decomposition and weight duality.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::betti::MultigradedBettiTable;
use crate::error::{Error, Result};
use crate::grading::{DualMap, EmbeddingSpec, Multidegree};
use crate::hilbert::WeightPolynomial;

/// S_λ ⊗ S_μ with λ = (l1, l2), μ = (m1, m2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bipartition {
    pub l1: i64,
    pub l2: i64,
    pub m1: i64,
    pub m2: i64,
}

impl Bipartition {
    pub fn new(l1: i64, l2: i64, m1: i64, m2: i64) -> Result<Self> {
        let bp = Bipartition { l1, l2, m1, m2 };
        if !bp.is_valid() {
            return Err(Error::Integrity(format!("{bp} is not a bipartition")));
        }
        Ok(bp)
    }

    pub fn is_valid(&self) -> bool {
        self.l1 >= self.l2 && self.l2 >= 0 && self.m1 >= self.m2 && self.m2 >= 0
    }

    pub fn weight(&self) -> Multidegree {
        Multidegree::new(self.l1, self.l2, self.m1, self.m2)
    }

    pub fn from_weight(w: Multidegree) -> Result<Self> {
        Bipartition::new(w.0[0], w.0[1], w.0[2], w.0[3])
    }

    pub fn total(&self) -> i64 {
        self.l1 + self.l2 + self.m1 + self.m2
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.l1, self.l2, self.m1, self.m2)
    }
}

pub fn schur_dim(bp: &Bipartition) -> u64 {
    ((bp.l1 - bp.l2 + 1) * (bp.m1 - bp.m2 + 1)) as u64
}

pub fn character(bp: &Bipartition) -> WeightPolynomial {
    assert!(bp.is_valid(), "{bp} is not a bipartition");
    let mut out = WeightPolynomial::new();
    let (s, t) = (bp.l1 + bp.l2, bp.m1 + bp.m2);
    for k in bp.l2..=bp.l1 {
        for l in bp.m2..=bp.m1 {
            out.insert(Multidegree::new(k, s - k, l, t - l), 1);
        }
    }
    out
}

fn add_scaled(poly: &mut WeightPolynomial, other: &WeightPolynomial, c: i64) {
    for (m, v) in other {
        let e = poly.entry(*m).or_insert(0);
        *e += c * v;
        if *e == 0 {
            poly.remove(m);
        }
    }
}

/// Greedy peel-off of lex-leading weights; returns summands with multiplicities.
pub fn decompose_weights(poly: &WeightPolynomial) -> Result<BTreeMap<Bipartition, u64>> {
    let mut residual: WeightPolynomial = poly
        .iter()
        .filter(|(_, v)| **v != 0)
        .map(|(k, v)| (*k, *v))
        .collect();
    let mut out = BTreeMap::new();
    while let Some((&lead, &c)) = residual.iter().next_back() {
        if c < 0 {
            return Err(Error::Integrity(format!(
                "residual coefficient {c} at leading weight {lead}"
            )));
        }
        let bp = Bipartition::from_weight(lead).map_err(|_| {
            Error::Integrity(format!(
                "leading weight {lead} violates the bipartition chains"
            ))
        })?;
        add_scaled(&mut residual, &character(&bp), -c);
        *out.entry(bp).or_insert(0) += c as u64;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchurDecomposition {
    pub spec: EmbeddingSpec,
    pub p: i64,
    pub q: i64,
    pub summands: BTreeMap<Bipartition, u64>,
}

impl SchurDecomposition {
    /// Summands in lex-descending order.
    pub fn sorted(&self) -> Vec<(Bipartition, u64)> {
        self.summands.iter().rev().map(|(b, m)| (*b, *m)).collect()
    }

    pub fn dimension(&self) -> u64 {
        self.summands.iter().map(|(b, m)| m * schur_dim(b)).sum()
    }

    pub fn distinct(&self) -> usize {
        self.summands.len()
    }

    pub fn with_multiplicity(&self) -> u64 {
        self.summands.values().sum()
    }

    pub fn max_multiplicity(&self) -> u64 {
        self.summands.values().copied().max().unwrap_or(0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let summands: Vec<_> = self
            .sorted()
            .into_iter()
            .map(|(b, m)| json!([b.l1, b.l2, b.m1, b.m2, m]))
            .collect();
        json!({"p": self.p, "q": self.q, "summands": summands})
    }

    /// `S_(a,b,c,d) ⊕ S_(...)^2 ...`; the zero module renders as `0`.
    pub fn render(&self) -> String {
        if self.summands.is_empty() {
            return "0".to_string();
        }
        self.sorted()
            .into_iter()
            .map(|(b, m)| {
                if m == 1 {
                    format!("S_{b}")
                } else {
                    format!("S_{b}^{m}")
                }
            })
            .collect::<Vec<_>>()
            .join(" ⊕ ")
    }
}

pub fn decompose_strand(
    spec: &EmbeddingSpec,
    p: i64,
    q: i64,
    slice: &BTreeMap<Multidegree, u64>,
) -> Result<SchurDecomposition> {
    let total = (p + q) * (spec.d1 + spec.d2) + spec.b1 + spec.b2;
    let mut poly = WeightPolynomial::new();
    for (a, &v) in slice {
        if a.0.iter().sum::<i64>() != total {
            return Err(Error::Integrity(format!(
                "multidegree {a} does not belong to K_{{{p},{q}}} of {}",
                spec.label()
            )));
        }
        if v > 0 {
            poly.insert(*a, v as i64);
        }
    }
    let summands = decompose_weights(&poly)
        .map_err(|e| Error::Integrity(format!("K_{{{p},{q}}} of {}: {e}", spec.label())))?;
    Ok(SchurDecomposition {
        spec: *spec,
        p,
        q,
        summands,
    })
}

/// Decompose every nonzero K_{p,q} of a table.
pub fn decompose_table(
    table: &MultigradedBettiTable,
) -> Result<BTreeMap<(i64, i64), SchurDecomposition>> {
    let graded = table.collapse();
    let mut out = BTreeMap::new();
    for &(p, q) in graded.entries.keys() {
        let d = decompose_strand(&table.spec, p, q, &table.slice(p, q))?;
        out.insert((p, q), d);
    }
    Ok(out)
}

pub fn decompositions_json(
    spec: &EmbeddingSpec,
    decomps: &BTreeMap<(i64, i64), SchurDecomposition>,
) -> serde_json::Value {
    json!({
        "spec": {"d1": spec.d1, "d2": spec.d2, "b1": spec.b1, "b2": spec.b2},
        "decompositions": decomps.values().map(|d| d.to_json()).collect::<Vec<_>>(),
    })
}

pub fn render_decompositions(decomps: &BTreeMap<(i64, i64), SchurDecomposition>) -> String {
    let mut out = String::new();
    for d in decomps.values() {
        out.push_str(&format!("K_{{{},{}}} = {}\n", d.p, d.q, d.render()));
    }
    out
}

/// w' with w + (w')^opp = α.
pub fn dual_bipartition(w: &Bipartition, dual: &DualMap) -> Result<Bipartition> {
    let alpha = dual.alpha.ok_or_else(|| {
        Error::Undetermined(format!(
            "weight duality unavailable for {}",
            dual.spec.label()
        ))
    })?;
    let a = alpha.0;
    let out = Bipartition {
        l1: a[1] - w.l2,
        l2: a[0] - w.l1,
        m1: a[3] - w.m2,
        m2: a[2] - w.m1,
    };
    if !out.is_valid() {
        return Err(Error::Integrity(format!(
            "dual weight {out} of {w} violates the bipartition chains"
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RedundantFunctor {
    pub bipartition: Bipartition,
    pub p: i64,
    pub q: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RedundancyReport {
    /// Functors present in K_{p,q} and in K_{p-1,q+1}.
    pub redundant: Vec<RedundantFunctor>,
    /// Distinct summands summed over all (p,q).
    pub total: usize,
    pub percentage: f64,
}

pub fn redundancy_report(decomps: &BTreeMap<(i64, i64), SchurDecomposition>) -> RedundancyReport {
    let mut redundant = Vec::new();
    for (&(p, q), d) in decomps {
        if let Some(other) = decomps.get(&(p - 1, q + 1)) {
            for bp in d.summands.keys() {
                if other.summands.contains_key(bp) {
                    redundant.push(RedundantFunctor {
                        bipartition: *bp,
                        p,
                        q,
                    });
                }
            }
        }
    }
    let total: usize = decomps.values().map(|d| d.distinct()).sum();
    let percentage = if total == 0 {
        0.0
    } else {
        100.0 * redundant.len() as f64 / total as f64
    };
    RedundancyReport {
        redundant,
        total,
        percentage,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grading::koszul_dual_spec;

    #[test]
    fn characters() {
        let c = character(&Bipartition::new(1, 0, 0, 0).unwrap());
        assert_eq!(
            c.keys().copied().collect::<Vec<_>>(),
            vec![Multidegree::new(0, 1, 0, 0), Multidegree::new(1, 0, 0, 0)]
        );
        let c = character(&Bipartition::new(1, 1, 1, 1).unwrap());
        assert_eq!(c.len(), 1);
        let bp = Bipartition::new(17, 9, 17, 9).unwrap();
        assert_eq!(character(&bp).len(), 81);
        assert_eq!(schur_dim(&bp), 81);
        assert_eq!(schur_dim(&Bipartition::new(5, 5, 2, 2).unwrap()), 1);
    }

    #[test]
    fn greedy_peels_sum() {
        let a = Bipartition::new(4, 1, 3, 2).unwrap();
        let b = Bipartition::new(3, 2, 5, 0).unwrap();
        let mut poly = character(&a);
        add_scaled(&mut poly, &character(&b), 2);
        let d = decompose_weights(&poly).unwrap();
        assert_eq!(d, BTreeMap::from([(a, 1), (b, 2)]));
    }

    #[test]
    fn corrupted_input_detected() {
        let mut poly = WeightPolynomial::new();
        poly.insert(Multidegree::new(0, 1, 0, 0), 1);
        assert!(matches!(decompose_weights(&poly), Err(Error::Integrity(_))));
    }

    #[test]
    fn weight_dual() {
        let s = EmbeddingSpec::standard(3, 3, 0, 0).unwrap();
        let dm = koszul_dual_spec(&s);
        let w = Bipartition::new(23, 13, 18, 18).unwrap();
        let d = dual_bipartition(&w, &dm).unwrap();
        assert_eq!(d, Bipartition::new(10, 0, 5, 5).unwrap());
        assert_eq!(dual_bipartition(&d, &dm).unwrap(), w);
    }
}
