//! Assembly of multigraded and standard Betti tables from strand ranks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::grading::{canonical_multidegree, DualMap, EmbeddingSpec, Multidegree};
use crate::hilbert::{euler_characteristic, forced_betti, numerator_coefficient};
use crate::strands::{job_id, strata, PlanOptions, Stratum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    RankComputed,
    HilbertForced,
    SymmetryExpanded,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::RankComputed => "rank-computed",
            Provenance::HilbertForced => "hilbert-forced",
            Provenance::SymmetryExpanded => "symmetry-expanded",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "rank-computed" => Some(Provenance::RankComputed),
            "hilbert-forced" => Some(Provenance::HilbertForced),
            "symmetry-expanded" => Some(Provenance::SymmetryExpanded),
            _ => None,
        }
    }
}

/// Nonzero β_{p,a}, stored at canonical multidegrees only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultigradedBettiTable {
    pub spec: EmbeddingSpec,
    entries: BTreeMap<(i64, Multidegree), (u64, Provenance)>,
}

impl MultigradedBettiTable {
    pub fn new(spec: EmbeddingSpec) -> Self {
        MultigradedBettiTable {
            spec,
            entries: BTreeMap::new(),
        }
    }

    /// Record β at a canonical multidegree; zero values are not stored.
    pub fn insert(&mut self, p: i64, a: Multidegree, value: u64, prov: Provenance) {
        let (c, _) = canonical_multidegree(a);
        if value == 0 {
            self.entries.remove(&(p, c));
        } else {
            self.entries.insert((p, c), (value, prov));
        }
    }

    pub fn get(&self, p: i64, a: &Multidegree) -> u64 {
        let (c, _) = canonical_multidegree(*a);
        self.entries.get(&(p, c)).map_or(0, |e| e.0)
    }

    pub fn q_of(&self, p: i64, a: &Multidegree) -> Option<i64> {
        self.spec.antidiagonal(a).map(|k| k - p)
    }

    /// Canonical entries: (p, a, value, provenance).
    pub fn canonical_entries(
        &self,
    ) -> impl Iterator<Item = (i64, Multidegree, u64, Provenance)> + '_ {
        self.entries.iter().map(|(&(p, a), &(v, pr))| (p, a, v, pr))
    }

    /// Every nonzero entry over the full S2 x S2 orbit, sorted by (p, a).
    pub fn expanded(&self) -> Vec<(i64, Multidegree, u64, Provenance)> {
        let mut out = Vec::new();
        for (&(p, a), &(v, prov)) in &self.entries {
            for b in a.orbit() {
                let pr = if b == a {
                    prov
                } else {
                    Provenance::SymmetryExpanded
                };
                out.push((p, b, v, pr));
            }
        }
        out.sort_by_key(|x| (x.0, x.1));
        out
    }

    /// The orbit-expanded multigraded data of K_{p,q}.
    pub fn slice(&self, p: i64, q: i64) -> BTreeMap<Multidegree, u64> {
        let mut out = BTreeMap::new();
        for (&(pp, a), &(v, _)) in &self.entries {
            if pp == p && self.q_of(pp, &a) == Some(q) {
                for b in a.orbit() {
                    out.insert(b, v);
                }
            }
        }
        out
    }

    pub fn collapse(&self) -> GradedBettiTable {
        let mut g = GradedBettiTable::new(self.spec);
        for (&(p, a), &(v, _)) in &self.entries {
            let q = self
                .q_of(p, &a)
                .expect("stored entries lie on an antidiagonal");
            *g.entries.entry((p, q)).or_insert(0) += v * a.orbit().len() as u64;
        }
        g
    }

    /// Multidegrees where Σ_p (-1)^p β_{p,a} differs from the Hilbert numerator.
    pub fn hilbert_mismatches(&self) -> Vec<(Multidegree, i64, i64)> {
        let mut sums: BTreeMap<Multidegree, i64> = BTreeMap::new();
        for (&(p, a), &(v, _)) in &self.entries {
            let s = if p % 2 == 0 { v as i64 } else { -(v as i64) };
            *sums.entry(a).or_insert(0) += s;
        }
        let mut bad = Vec::new();
        for k in 0..=self.spec.codim() + 2 {
            for a in self.spec.canonical_multidegrees(k) {
                let lhs = sums.get(&a).copied().unwrap_or(0);
                let rhs = numerator_coefficient(&self.spec, &a);
                if lhs != rhs {
                    bad.push((a, lhs, rhs));
                }
            }
        }
        bad
    }

    /// Same check under the unsigned reading Σ_p β_{p,a}.
    pub fn unsigned_hilbert_holds(&self) -> bool {
        let mut sums: BTreeMap<Multidegree, i64> = BTreeMap::new();
        for (&(_, a), &(v, _)) in &self.entries {
            *sums.entry(a).or_insert(0) += v as i64;
        }
        (0..=self.spec.codim() + 2).all(|k| {
            self.spec.canonical_multidegrees(k).into_iter().all(|a| {
                sums.get(&a).copied().unwrap_or(0) == numerator_coefficient(&self.spec, &a)
            })
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let s = &self.spec;
        let multigraded: Vec<serde_json::Value> = self
            .expanded()
            .into_iter()
            .map(|(p, a, v, pr)| json!([p, a.0, v, pr.as_str()]))
            .collect();
        let graded: Vec<serde_json::Value> = self
            .collapse()
            .entries
            .iter()
            .map(|(&(p, q), &v)| json!([p, q, v]))
            .collect();
        json!({
            "spec": {"d1": s.d1, "d2": s.d2, "b1": s.b1, "b2": s.b2, "modulus": s.modulus},
            "multigraded": multigraded,
            "graded": graded,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::format("betti json", m.to_string());
        let sp = &v["spec"];
        let field = |k: &str| {
            sp[k]
                .as_i64()
                .ok_or_else(|| bad(&format!("spec.{k} missing")))
        };
        let modulus = sp["modulus"]
            .as_u64()
            .ok_or_else(|| bad("spec.modulus missing"))? as u32;
        let spec = EmbeddingSpec::new(
            field("d1")?,
            field("d2")?,
            field("b1")?,
            field("b2")?,
            modulus,
        )
        .map_err(|e| bad(&e.to_string()))?;
        let mut t = MultigradedBettiTable::new(spec);
        for e in v["multigraded"]
            .as_array()
            .ok_or_else(|| bad("multigraded missing"))?
        {
            let p = e[0].as_i64().ok_or_else(|| bad("entry p"))?;
            let av: Vec<i64> = e[1]
                .as_array()
                .ok_or_else(|| bad("entry a"))?
                .iter()
                .map(|x| x.as_i64().ok_or_else(|| bad("entry a")))
                .collect::<Result<_>>()?;
            if av.len() != 4 {
                return Err(bad("entry a needs 4 components"));
            }
            let a = Multidegree::new(av[0], av[1], av[2], av[3]);
            let value = e[2].as_u64().ok_or_else(|| bad("entry value"))?;
            let prov = e[3]
                .as_str()
                .and_then(Provenance::parse)
                .ok_or_else(|| bad("entry provenance"))?;
            if a.is_canonical() {
                t.entries.insert((p, a), (value, prov));
            }
        }
        Ok(t)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,q,a0,a1,a2,a3,value,provenance\n");
        for (p, a, v, pr) in self.expanded() {
            let q = self.q_of(p, &a).unwrap_or(0);
            let a = a.0;
            let _ = writeln!(
                out,
                "{p},{q},{},{},{},{},{v},{}",
                a[0],
                a[1],
                a[2],
                a[3],
                pr.as_str()
            );
        }
        out
    }
}

/// β_{p,p+q} indexed by (p, q).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedBettiTable {
    pub spec: EmbeddingSpec,
    pub entries: BTreeMap<(i64, i64), u64>,
}

impl GradedBettiTable {
    pub fn new(spec: EmbeddingSpec) -> Self {
        GradedBettiTable {
            spec,
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, p: i64, q: i64) -> u64 {
        self.entries.get(&(p, q)).copied().unwrap_or(0)
    }

    pub fn set(&mut self, p: i64, q: i64, v: u64) {
        if v == 0 {
            self.entries.remove(&(p, q));
        } else {
            self.entries.insert((p, q), v);
        }
    }

    /// Row q as a vector over p = 0..=codim+1.
    pub fn row(&self, q: i64) -> Vec<u64> {
        (0..=self.spec.codim() + 1)
            .map(|p| self.get(p, q))
            .collect()
    }

    pub fn from_rows(spec: EmbeddingSpec, rows: &[(i64, i64, &[u64])]) -> Self {
        let mut t = GradedBettiTable::new(spec);
        for &(q, start, vals) in rows {
            for (i, &v) in vals.iter().enumerate() {
                t.set(start + i as i64, q, v);
            }
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    M2,
    Json,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m2" => Ok(TableFormat::M2),
            "json" => Ok(TableFormat::Json),
            "csv" => Ok(TableFormat::Csv),
            _ => Err(Error::Usage(format!("unknown format `{s}` (m2|json|csv)"))),
        }
    }
}

/// Macaulay2-style layout: a header of column indices p, then rows `0:`, `1:`, `2:`.
pub fn render_m2(table: &GradedBettiTable) -> String {
    let ncols = match table
        .entries
        .iter()
        .filter(|(_, &v)| v > 0)
        .map(|(&(p, _), _)| p)
        .max()
    {
        Some(p) => p as usize + 1,
        None => (table.spec.codim() + 2).max(0) as usize,
    };
    let rows: Vec<i64> = vec![0, 1, 2];
    let cell = |p: usize, q: i64| {
        let v = table.get(p as i64, q);
        if v == 0 {
            ".".to_string()
        } else {
            v.to_string()
        }
    };
    let widths: Vec<usize> = (0..ncols)
        .map(|p| {
            rows.iter()
                .map(|&q| cell(p, q).len())
                .chain(std::iter::once(p.to_string().len()))
                .max()
                .unwrap_or(1)
        })
        .collect();
    let mut out = String::new();
    let mut header = String::from("  ");
    for (p, w) in widths.iter().enumerate() {
        let _ = write!(header, " {:>w$}", p, w = w);
    }
    out.push_str(header.trim_end());
    out.push('\n');
    if table.entries.is_empty() {
        return out;
    }
    for &q in &rows {
        let mut line = format!("{q}:");
        for (p, w) in widths.iter().enumerate() {
            let _ = write!(line, " {:>w$}", cell(p, q), w = w);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn render_table(table: &MultigradedBettiTable, format: TableFormat) -> String {
    match format {
        TableFormat::M2 => render_m2(&table.collapse()),
        TableFormat::Json => {
            let mut s =
                serde_json::to_string_pretty(&table.to_json()).expect("json values serialize");
            s.push('\n');
            s
        }
        TableFormat::Csv => table.to_csv(),
    }
}

/// Parse the rows of an M2-style block back into a graded table (used for golden comparisons).
pub fn parse_m2(spec: EmbeddingSpec, text: &str) -> Result<GradedBettiTable> {
    let mut t = GradedBettiTable::new(spec);
    for line in text.lines() {
        let line = line.trim();
        let Some((label, rest)) = line.split_once(':') else {
            continue;
        };
        let Ok(q) = label.trim().parse::<i64>() else {
            continue;
        };
        for (p, tok) in rest.split_whitespace().enumerate() {
            if tok == "." {
                continue;
            }
            let v: u64 = tok
                .parse()
                .map_err(|_| Error::format("m2 table", format!("bad cell `{tok}`")))?;
            t.set(p as i64, q, v);
        }
    }
    Ok(t)
}

/// Dimension discrepancies between a table and the 180° rotation of its dual.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualityDiscrepancy {
    pub p: i64,
    pub q: i64,
    pub dual_value: u64,
    pub rotated_value: u64,
}

pub fn check_duality(
    table: &GradedBettiTable,
    dual_table: &GradedBettiTable,
    dual: &DualMap,
) -> Result<Vec<DualityDiscrepancy>> {
    let same =
        |a: &EmbeddingSpec, b: &EmbeddingSpec| (a.d1, a.d2, a.b1, a.b2) == (b.d1, b.d2, b.b1, b.b2);
    if !same(&table.spec, &dual.spec) || !same(&dual_table.spec, &dual.dual_spec) {
        return Err(Error::Usage(format!(
            "tables for {} and {} are not a Koszul dual pair",
            table.spec.label(),
            dual_table.spec.label()
        )));
    }
    let mut out = Vec::new();
    let codim = table.spec.codim();
    for p in 0..=codim {
        for q in 0..=2 {
            let (rp, rq) = dual.index_map(p, q);
            let dv = dual_table.get(p, q);
            let rv = table.get(rp, rq);
            if dv != rv {
                out.push(DualityDiscrepancy {
                    p,
                    q,
                    dual_value: dv,
                    rotated_value: rv,
                });
            }
        }
    }
    Ok(out)
}

/// Source of ranks for assembly, keyed by job id.
pub trait RankSource {
    fn rank(&self, id: &str) -> Option<u64>;
}

impl RankSource for BTreeMap<String, u64> {
    fn rank(&self, id: &str) -> Option<u64> {
        self.get(id).copied()
    }
}

fn signed(p: i64, v: u64) -> i64 {
    if p % 2 == 0 {
        v as i64
    } else {
        -(v as i64)
    }
}

/// dim K = dim(middle) - rank(out) - rank(in), per multidegree, with Hilbert forcing
/// for the entries the plan does not rank.
pub fn assemble(
    spec: &EmbeddingSpec,
    opts: &PlanOptions,
    ranks: &dyn RankSource,
) -> Result<MultigradedBettiTable> {
    let mut table = MultigradedBettiTable::new(*spec);
    for st in strata(spec, opts.window.as_ref()) {
        for (p, v, prov) in resolve_stratum(spec, &st, opts.full_rank, ranks)? {
            table.insert(p, st.a, v, prov);
        }
    }
    Ok(table)
}

fn sections(b1: i64, b2: i64) -> i64 {
    (b1 + 1).max(0) * (b2 + 1).max(0)
}

/// Rows 0 and 2 vanish past the number of sections: K_{p,0} = 0 for p >= h0(b), and dually
/// K_{p,2} = 0 for codim - p >= h0(b'). Only used to break ties between rows of equal sign.
pub fn edge_vanishes(spec: &EmbeddingSpec, p: i64, q: i64) -> bool {
    match q {
        0 => p >= sections(spec.b1, spec.b2),
        2 => spec.codim() - p >= sections(spec.d1 - spec.b1 - 2, spec.d2 - spec.b2 - 2),
        _ => false,
    }
}

fn resolve_stratum(
    spec: &EmbeddingSpec,
    st: &Stratum,
    full_rank: bool,
    ranks: &dyn RankSource,
) -> Result<Vec<(i64, u64, Provenance)>> {
    let k = st.k;
    let a = st.a;
    let need = |p: i64, q: i64| -> Result<u64> {
        let id = job_id(p, q, &a);
        ranks.rank(&id).ok_or_else(|| {
            Error::Integrity(format!("missing rank for strand {id} of {}", spec.label()))
        })
    };
    let direct = |u: i64, out_rank: u64, in_rank: u64| -> Result<u64> {
        let v = st.dim(u) as i64 - out_rank as i64 - in_rank as i64;
        if v < 0 {
            return Err(Error::Integrity(format!(
                "negative Betti number {v} at K_{{{},{u}}} multidegree {a} of {}",
                k - u,
                spec.label()
            )));
        }
        Ok(v as u64)
    };
    let mut out = Vec::new();
    if st.visible.len() >= 2 {
        let top = *st.visible.last().expect("nonempty");
        let mut known = BTreeMap::new();
        for &u in &st.visible[..st.visible.len() - 1] {
            let r_out = need(k - u, u)?;
            let r_in = if st.dim(u - 1) > 0 {
                need(k - u + 1, u - 1)?
            } else {
                0
            };
            let v = direct(u, r_out, r_in)?;
            known.insert(k - u, v);
            out.push((k - u, v, Provenance::RankComputed));
        }
        let forced = forced_betti(spec, &a, &known, &[k - top])?
            .expect("a single unknown is always determined")[&(k - top)];
        let mut prov = Provenance::HilbertForced;
        if full_rank {
            let r_out = if st.dim(top + 1) > 0 {
                need(k - top, top)?
            } else {
                0
            };
            let r_in = if st.dim(top - 1) > 0 {
                ranks.rank(&job_id(k - top + 1, top - 1, &a))
            } else {
                Some(0)
            };
            if let Some(r_in) = r_in {
                let v = direct(top, r_out, r_in)?;
                if v != forced {
                    return Err(Error::Integrity(format!(
                        "K_{{{},{top}}} at {a}: ranks give {v}, Hilbert function forces {forced}",
                        k - top
                    )));
                }
                prov = Provenance::RankComputed;
            }
        }
        out.push((k - top, forced, prov));
        return Ok(out);
    }
    let h = euler_characteristic(spec, &a);
    if h == 0 {
        return Ok(out);
    }
    let mut cands: Vec<i64> = st
        .present
        .iter()
        .copied()
        .filter(|&q| signed(k - q, 1) == h.signum())
        .collect();
    if cands.len() > 1 {
        let listed: Vec<i64> = cands
            .iter()
            .copied()
            .filter(|q| st.visible.contains(q))
            .collect();
        if listed.len() == 1 {
            cands = listed;
        }
    }
    if cands.len() > 1 {
        let open: Vec<i64> = cands
            .iter()
            .copied()
            .filter(|&q| !edge_vanishes(spec, k - q, q))
            .collect();
        if open.len() == 1 {
            cands = open;
        }
    }
    match cands.as_slice() {
        [] => Err(Error::Integrity(format!(
            "Hilbert coefficient {h} at {a} of {} has no admissible row{}",
            spec.label(),
            if spec.is_cohen_macaulay() {
                ""
            } else {
                " (b is outside -1 <= b_i < d_i, so the module is not Cohen-Macaulay)"
            }
        ))),
        [q] => {
            let v = h.unsigned_abs();
            if v > st.dim(*q) {
                return Err(Error::Integrity(format!(
                    "Hilbert coefficient {h} at {a} exceeds dim C_{{{},{q}}} = {}",
                    k - q,
                    st.dim(*q)
                )));
            }
            out.push((k - q, v, Provenance::HilbertForced));
            Ok(out)
        }
        _ => Err(Error::Undetermined(format!(
            "multidegree {a} of {}: Hilbert coefficient {h} fits rows {cands:?}; add them to the window",
            spec.label()
        ))),
    }
}

/// Totals per (p, q) of a multigraded table restricted to the given pairs.
pub fn stratum_total(table: &MultigradedBettiTable, p: i64, q: i64) -> u64 {
    table.slice(p, q).values().sum()
}

/// (p, q) pairs with a nonzero entry.
pub fn support(table: &GradedBettiTable) -> BTreeSet<(i64, i64)> {
    table.entries.keys().copied().collect()
}
