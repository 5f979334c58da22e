//! Boij-Soderberg decompositions in exact rational arithmetic, and the conjecture checks.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use serde_json::json;

use crate::betti::GradedBettiTable;
use crate::error::{Error, Result};
use crate::grading::{EmbeddingSpec, Multidegree};
use crate::schur::{Bipartition, RedundancyReport, SchurDecomposition};
use crate::stats::unimodality_checks;

pub type Rational = BigRational;

/// Entries of a pure diagram, indexed by homological position i (the degree is δ_i).
pub fn pure_diagram(delta: &[i64]) -> Result<Vec<Rational>> {
    if delta.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage(format!(
            "degree sequence {delta:?} is not strictly increasing"
        )));
    }
    Ok((0..delta.len())
        .map(|i| {
            let mut den = BigInt::one();
            for (k, &dk) in delta.iter().enumerate() {
                if k != i {
                    den *= BigInt::from((delta[i] - dk).abs());
                }
            }
            Rational::new(BigInt::one(), den)
        })
        .collect())
}

/// A Betti table over the rationals, keyed by (i, j).
pub type RationalTable = BTreeMap<(i64, i64), Rational>;

pub fn to_rational(table: &GradedBettiTable) -> RationalTable {
    table
        .entries
        .iter()
        .map(|(&(p, q), &v)| ((p, p + q), Rational::from_integer(BigInt::from(v))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BsTerm {
    pub delta: Vec<i64>,
    pub coefficient: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BsDecomposition {
    pub terms: Vec<BsTerm>,
}

impl BsDecomposition {
    /// Σ a_δ π_δ.
    pub fn reconstruct(&self) -> Result<RationalTable> {
        let mut out = RationalTable::new();
        for t in &self.terms {
            for (i, v) in pure_diagram(&t.delta)?.into_iter().enumerate() {
                let e = out
                    .entry((i as i64, t.delta[i]))
                    .or_insert_with(Rational::zero);
                *e += &t.coefficient * v;
            }
        }
        out.retain(|_, v| !v.is_zero());
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<_> = self
            .terms
            .iter()
            .map(|t| {
                json!({
                    "delta": t.delta,
                    "a_num": t.coefficient.numer().to_string(),
                    "a_den": t.coefficient.denom().to_string(),
                })
            })
            .collect();
        json!({ "terms": terms })
    }
}

/// Greedy decomposition: peel off the largest multiple of the pure diagram on the
/// minimal degree sequence until the table vanishes.
pub fn bs_decompose_rational(table: &RationalTable, length: usize) -> Result<BsDecomposition> {
    let mut rest: RationalTable = table
        .iter()
        .filter(|(_, v)| !v.is_zero())
        .map(|(k, v)| (*k, v.clone()))
        .collect();
    let not_bs = |m: String| Error::Integrity(format!("not a BS-decomposable table: {m}"));
    if let Some(((i, j), v)) = rest
        .iter()
        .find(|(k, v)| v.is_negative() || k.0 < 0 || k.0 >= length as i64)
    {
        return Err(not_bs(format!("entry {v} at ({i},{j})")));
    }
    let max_steps = rest.len() + 1;
    let mut terms = Vec::new();
    while !rest.is_empty() {
        if terms.len() >= max_steps {
            return Err(not_bs("no termination".into()));
        }
        let mut delta = Vec::with_capacity(length);
        for i in 0..length as i64 {
            let j = rest
                .range((i, i64::MIN)..=(i, i64::MAX))
                .next()
                .map(|(k, _)| k.1)
                .ok_or_else(|| not_bs(format!("column {i} is empty")))?;
            delta.push(j);
        }
        let pi = pure_diagram(&delta)
            .map_err(|_| not_bs(format!("minimal degrees {delta:?} do not increase")))?;
        let coefficient = pi
            .iter()
            .enumerate()
            .map(|(i, v)| &rest[&(i as i64, delta[i])] / v)
            .min()
            .expect("length is positive");
        for (i, v) in pi.iter().enumerate() {
            let key = (i as i64, delta[i]);
            let e = rest.get_mut(&key).expect("minimal entry exists");
            *e -= &coefficient * v;
            if e.is_zero() {
                rest.remove(&key);
            }
        }
        terms.push(BsTerm { delta, coefficient });
    }
    Ok(BsDecomposition { terms })
}

/// Decompose a graded table over columns 0..=codim.
pub fn bs_decompose(table: &GradedBettiTable) -> Result<BsDecomposition> {
    bs_decompose_rational(&to_rational(table), (table.spec.codim() + 1) as usize)
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizedReport {
    /// a_δ / N!.
    pub normalized: Vec<String>,
    pub sum: String,
    /// 2 d1 d2 / (N (N+1) (N+2)).
    pub rising_formula: String,
    /// 2 d1 d2 / (N (N-1) (N-2)).
    pub falling_formula: String,
    pub rising_matches: bool,
    pub falling_matches: bool,
}

pub fn normalize_coefficients(
    dec: &BsDecomposition,
    spec: &EmbeddingSpec,
) -> (Vec<Rational>, NormalizedReport) {
    let n = spec.n() as i64;
    let nf = Rational::from_integer(factorial(n as u64));
    let b: Vec<Rational> = dec.terms.iter().map(|t| &t.coefficient / &nf).collect();
    let sum: Rational = b.iter().fold(Rational::zero(), |acc, x| acc + x);
    let top = rat(2 * spec.d1 * spec.d2);
    let rising = &top / rat(n * (n + 1) * (n + 2));
    let falling = if n > 2 {
        &top / rat(n * (n - 1) * (n - 2))
    } else {
        Rational::zero()
    };
    let report = NormalizedReport {
        normalized: b.iter().map(|x| x.to_string()).collect(),
        sum: sum.to_string(),
        rising_formula: rising.to_string(),
        falling_formula: falling.to_string(),
        rising_matches: sum == rising,
        falling_matches: sum == falling,
    };
    (b, report)
}

/// bs_coeffs.csv rows: j, delta, a_num, a_den, normalized.
pub fn bs_coeffs_csv(dec: &BsDecomposition, spec: &EmbeddingSpec) -> String {
    let (b, _) = normalize_coefficients(dec, spec);
    let mut out = String::from("j,delta,a_num,a_den,normalized\n");
    for (j, (t, bj)) in dec.terms.iter().zip(&b).enumerate() {
        let delta: Vec<String> = t.delta.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!(
            "{j},{},{},{},{bj}\n",
            delta.join(" "),
            t.coefficient.numer(),
            t.coefficient.denom()
        ));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
    Unavailable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjectureResult {
    pub name: String,
    pub verdict: Verdict,
    pub detail: serde_json::Value,
}

fn result(name: &str, verdict: Verdict, detail: serde_json::Value) -> ConjectureResult {
    ConjectureResult {
        name: name.to_string(),
        verdict,
        detail,
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// [n] minus the listed elements.
fn range_without(n: i64, skip: &[i64]) -> Vec<i64> {
    (0..n).filter(|x| !skip.contains(x)).collect()
}

fn binom(n: i64, k: i64) -> i64 {
    if k < 0 || k > n {
        return 0;
    }
    let mut r: i64 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Everything the conjecture suite may consult; missing artifacts yield `unavailable`.
pub struct Artifacts<'a> {
    pub graded: &'a GradedBettiTable,
    pub schur: Option<&'a BTreeMap<(i64, i64), SchurDecomposition>>,
    pub bs: Option<&'a BsDecomposition>,
    pub redundancy: Option<&'a RedundancyReport>,
}

fn decomposition_summands(
    schur: &BTreeMap<(i64, i64), SchurDecomposition>,
    p: i64,
    q: i64,
) -> BTreeMap<Bipartition, u64> {
    schur
        .get(&(p, q))
        .map(|d| d.summands.clone())
        .unwrap_or_default()
}

fn expected_summands(ws: &[Multidegree]) -> Option<BTreeMap<Bipartition, u64>> {
    let mut out = BTreeMap::new();
    for w in ws {
        let bp = Bipartition::from_weight(*w).ok()?;
        *out.entry(bp).or_insert(0) += 1;
    }
    Some(out)
}

fn schur_comparison(
    name: &str,
    schur: &BTreeMap<(i64, i64), SchurDecomposition>,
    p: i64,
    q: i64,
    predicted: &[Multidegree],
) -> ConjectureResult {
    let actual = decomposition_summands(schur, p, q);
    let fmt = |m: &BTreeMap<Bipartition, u64>| -> Vec<String> {
        m.iter()
            .rev()
            .map(|(b, k)| {
                if *k == 1 {
                    b.to_string()
                } else {
                    format!("{b}^{k}")
                }
            })
            .collect()
    };
    let predicted_str: Vec<String> = predicted.iter().map(|w| w.to_string()).collect();
    let ok = expected_summands(predicted).is_some_and(|e| e == actual);
    result(
        name,
        verdict(ok),
        json!({"p": p, "q": q, "predicted": predicted_str, "computed": fmt(&actual)}),
    )
}

fn shift(a: Multidegree, s: [i64; 4]) -> Multidegree {
    a.add(&Multidegree(s))
}

/// Evaluate the unimodality, Schur-decomposition and BS conjectures against computed data.
/// Formulas are evaluated verbatim and compared; nothing is assumed true.
pub fn conjecture_suite(spec: &EmbeddingSpec, art: &Artifacts<'_>) -> Vec<ConjectureResult> {
    let mut out = Vec::new();
    let (d1, d2, b1, b2) = (spec.d1, spec.d2, spec.b1, spec.b2);
    let n = spec.n() as i64;
    let zero_b = b1 == 0 && b2 == 0;

    for e in unimodality_checks(art.graded, art.schur) {
        let detail = match e.result.violation {
            Some((i, j, k)) => json!({"sequence": e.sequence, "violation": [i, j, k]}),
            None => json!({"sequence": e.sequence}),
        };
        out.push(result(
            &format!("unimodal/{}/q{}", e.statistic, e.q),
            verdict(e.result.unimodal),
            detail,
        ));
    }
    if art.schur.is_none() {
        out.push(result(
            "unimodal/schur",
            Verdict::Unavailable,
            json!("no Schur decompositions"),
        ));
    }

    // Row q = 1, last and second-to-last entries.
    let row1_name = "schur/row1-last";
    let row1_prev = "schur/row1-second-to-last";
    if !zero_b || d2 <= d1 {
        out.push(result(
            row1_name,
            Verdict::NotApplicable,
            json!("needs b = 0 and d2 > d1"),
        ));
        out.push(result(
            row1_prev,
            Verdict::NotApplicable,
            json!("needs b = 0 and d2 > d1 + 1"),
        ));
    } else if let Some(schur) = art.schur {
        let p = (d1 + 1) * (d2 - 1) + d1;
        let a = Multidegree::new(
            binom(d1 + 1, 2) * d2,
            binom(d1 + 1, 2) * d2,
            (d1 + 1) * binom(d2 + 1, 2) - 1,
            (d1 + 1) * binom(d2, 2) + 1,
        );
        out.push(schur_comparison(
            row1_name,
            schur,
            p,
            1,
            &[shift(a, [0, 0, -1, 1])],
        ));
        if d2 > d1 + 1 {
            let ws: Vec<Multidegree> = (0..d2)
                .map(|i| shift(a, [0, -d1, -2 - i, -d2 + 2 + i]))
                .collect();
            out.push(schur_comparison(row1_prev, schur, p - 1, 1, &ws));
        } else {
            out.push(result(
                row1_prev,
                Verdict::NotApplicable,
                json!("needs d2 > d1 + 1"),
            ));
        }
    } else {
        out.push(result(
            row1_name,
            Verdict::Unavailable,
            json!("no Schur decompositions"),
        ));
    }

    // Row q = 2, last entry and the (2,d) / (3,d) second-to-last entries.
    if !zero_b {
        out.push(result(
            "schur/row2-last",
            Verdict::NotApplicable,
            json!("needs b = 0"),
        ));
    } else if let Some(schur) = art.schur {
        let p = n - 3;
        let a = Multidegree::new(
            binom(d1 + 1, 2) * (d2 + 1) - 1,
            binom(d1 + 1, 2) * (d2 + 1) - d1 + 1,
            (d1 + 1) * binom(d2 + 1, 2) - 1,
            (d1 + 1) * binom(d2 + 1, 2) - d2 + 1,
        );
        out.push(schur_comparison("schur/row2-last", schur, p, 2, &[a]));
        let d = d2;
        if d1 == 2 && d >= 3 {
            let base = (3 * d * d + 3 * d - 2) / 2;
            let a = Multidegree::new(3 * d + 2, 3 * d, base - 1, base - 2 * (d2 - d1) - 3);
            let ws: Vec<Multidegree> = (0..=d - 3).map(|i| shift(a, [0, 0, -i, i])).collect();
            out.push(schur_comparison(
                "schur/row2-second-to-last-(2,d)",
                schur,
                p - 1,
                2,
                &ws,
            ));
        }
        if d1 == 3 && d >= 3 {
            // Exponent kept unsimplified: 2d^2+2d-2d+3.
            let a = Multidegree::new(
                6 * d + 5,
                6 * d + 1,
                2 * d * d + 2 * d - 2,
                2 * d * d + 2 * d - 2 * d + 3,
            );
            let bb = Multidegree::new(
                6 * d + 4,
                6 * d + 2,
                2 * d * d + 2 * d - 2,
                2 * d * d + 2 * d - 2 * d + 1,
            );
            let mut ws: Vec<Multidegree> = (0..=d - 3).map(|i| shift(a, [0, 0, -i, i])).collect();
            ws.extend((0..=d2 - 2).map(|i| shift(bb, [0, 0, -i, i])));
            out.push(schur_comparison(
                "schur/row2-second-to-last-(3,d)",
                schur,
                p - 1,
                2,
                &ws,
            ));
        }
    } else {
        out.push(result(
            "schur/row2-last",
            Verdict::Unavailable,
            json!("no Schur decompositions"),
        ));
    }

    if zero_b {
        match art.redundancy {
            Some(r) => out.push(result(
                "redundant-schur-exists",
                verdict(!r.redundant.is_empty()),
                json!({"redundant": r.redundant.len(), "total": r.total, "percentage": r.percentage}),
            )),
            None => out.push(result("redundant-schur-exists", Verdict::Unavailable, json!("no Schur decompositions"))),
        }
    }

    let Some(dec) = art.bs else {
        out.push(result(
            "bs",
            Verdict::Unavailable,
            json!("no BS decomposition"),
        ));
        return out;
    };
    let deltas: Vec<Vec<i64>> = dec.terms.iter().map(|t| t.delta.clone()).collect();
    let coeff = |delta: &[i64]| {
        dec.terms
            .iter()
            .find(|t| t.delta == delta)
            .map(|t| t.coefficient.clone())
    };
    let show = |r: &Option<Rational>| r.as_ref().map_or("0".to_string(), |x| x.to_string());

    if zero_b && d1 <= d2 {
        let seqs: Vec<Vec<i64>> = (0..=(d1 - 1) * (d2 - 2))
            .map(|j| range_without(n, &[1, n - d1 - j]))
            .collect();
        let ok = seqs.iter().all(|s| coeff(s).is_some_and(|c| !c.is_zero()));
        let detail: Vec<_> = seqs
            .iter()
            .map(|s| json!({"delta": s, "a": show(&coeff(s))}))
            .collect();
        out.push(result(
            "bs/all-sequences-nonzero",
            verdict(ok),
            json!(detail),
        ));
    } else {
        out.push(result(
            "bs/all-sequences-nonzero",
            Verdict::NotApplicable,
            json!("needs b = 0, d1 <= d2"),
        ));
    }

    if d1 == 2 && b1 == 0 && d2 >= 3 && (0..=d2 - 2).contains(&b2) {
        let f = Rational::from_integer(factorial(3 * d2 as u64));
        let mut rows = Vec::new();
        let mut ok = true;
        let mut predicted_set = Vec::new();
        for j in 0..=d2 - 2 {
            let delta = if j <= d2 - b2 - 2 {
                range_without(3 * (d2 + 1), &[b2 + 1, 3 * d2 + 1 - j])
            } else {
                range_without(3 * (d2 + 1), &[d2 - j - 1, 2 * d2 + b2 + 3])
            };
            let predicted = if j == d2 - b2 - 2 {
                &f * rat(2 * (d2 + 2))
            } else {
                &f * rat(2)
            };
            let got = coeff(&delta);
            ok &= got.as_ref() == Some(&predicted);
            rows.push(json!({"j": j, "delta": delta, "predicted": predicted.to_string(), "computed": show(&got)}));
            predicted_set.push(delta);
        }
        ok &=
            predicted_set.len() == deltas.len() && deltas.iter().all(|d| predicted_set.contains(d));
        out.push(result("bs/(2,d)-coefficients", verdict(ok), json!(rows)));
    }

    if zero_b && d1 == 3 && d2 >= 4 {
        let big = 4 * d2 + 4;
        let mut rows = Vec::new();
        let mut ok = true;
        for j in 0..=d2 - 4 {
            let delta = range_without(n, &[1, n - d1 - j]);
            let predicted = Rational::new(
                BigInt::from(j + 1) * factorial(big as u64),
                BigInt::from(4 * binom(big, 4)),
            );
            let got = coeff(&delta);
            ok &= got.as_ref() == Some(&predicted);
            rows.push(json!({"j": j, "delta": delta, "predicted": predicted.to_string(), "computed": show(&got)}));
        }
        out.push(result("bs/(3,d)-coefficients", verdict(ok), json!(rows)));
    }

    if b1 == d1 - 1 && d1 <= d2 && (0..=d2 - 2).contains(&b2) {
        let mut predicted: Vec<Vec<i64>> = (0..=(b2 + 1) * (d1 - 1))
            .map(|j| range_without(n - 1, &[(b2 + 1) * d1 - j]))
            .collect();
        predicted.sort();
        let mut got = deltas.clone();
        got.sort();
        out.push(result(
            "bs/rational-family-sequences",
            verdict(predicted == got),
            json!({"predicted": predicted, "computed": got}),
        ));
    }

    if zero_b {
        let (_, report) = normalize_coefficients(dec, spec);
        let ok = report.rising_matches || report.falling_matches;
        out.push(result(
            "bs/coefficient-sum",
            verdict(ok),
            serde_json::to_value(&report).expect("serializable"),
        ));
    }
    out
}
