//! Prime-field arithmetic and exact rank of sparse matrices over F_p.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    pub p: u32,
}

/// A residue in [0, p). Arithmetic goes through the owning `PrimeField`.
pub type FieldElement = u32;

impl PrimeField {
    pub fn new(p: u32) -> Self {
        PrimeField { p }
    }

    pub fn reduce(&self, x: i64) -> FieldElement {
        x.rem_euclid(self.p as i64) as u32
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let s = a as u64 + b as u64;
        (if s >= self.p as u64 {
            s - self.p as u64
        } else {
            s
        }) as u32
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a >= b {
            a - b
        } else {
            (a as u64 + self.p as u64 - b as u64) as u32
        }
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        (a as u64 * b as u64 % self.p as u64) as u32
    }

    pub fn pow(&self, mut a: FieldElement, mut e: u64) -> FieldElement {
        let mut r = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        r
    }

    /// Inverse of a nonzero residue, by the extended Euclidean algorithm.
    pub fn inv(&self, a: FieldElement) -> Option<FieldElement> {
        if a.is_multiple_of(self.p) {
            return None;
        }
        let (mut r0, mut r1) = (self.p as i64, a as i64);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        Some(self.reduce(t0))
    }
}

/// A sparse matrix over F_modulus as 0-based (row, col, value) triplets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub modulus: u32,
    pub entries: Vec<(u32, u32, u32)>,
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn identity(n: usize, modulus: u32) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            modulus,
            entries: (0..n as u32).map(|i| (i, i, 1)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            if r as usize >= self.rows || c as usize >= self.cols {
                return Err(Error::format(
                    "matrix",
                    format!("entry ({r},{c}) outside {}x{}", self.rows, self.cols),
                ));
            }
            if v >= self.modulus {
                return Err(Error::format(
                    "matrix",
                    format!("value {v} not reduced mod {}", self.modulus),
                ));
            }
            if !seen.insert((r, c)) {
                return Err(Error::format(
                    "matrix",
                    format!("duplicate entry ({r},{c})"),
                ));
            }
        }
        Ok(())
    }

    /// The same ±1 pattern read over another prime.
    pub fn with_modulus(&self, modulus: u32) -> Self {
        let old = self.modulus;
        let f = PrimeField::new(modulus);
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, v)| {
                let signed = if v > old / 2 {
                    v as i64 - old as i64
                } else {
                    v as i64
                };
                (r, c, f.reduce(signed))
            })
            .filter(|e| e.2 != 0)
            .collect();
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            modulus,
            entries,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Auto,
    SparseElim,
    Dense,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "sparse-elim" => Ok(Strategy::SparseElim),
            "dense" => Ok(Strategy::Dense),
            _ => Err(Error::Usage(format!(
                "unknown strategy `{s}` (auto|sparse-elim|dense)"
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Auto => "auto",
            Strategy::SparseElim => "sparse-elim",
            Strategy::Dense => "dense",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RankOptions {
    pub strategy: Strategy,
    /// Switch to the dense kernel once the active submatrix is this dense.
    pub dense_threshold: f64,
    /// Memory budget in bytes; `None` is unlimited.
    pub budget: Option<u64>,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            strategy: Strategy::Auto,
            dense_threshold: 0.2,
            budget: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub id: String,
    pub rank: u64,
    pub elapsed_s: f64,
    pub peak_bytes: u64,
    pub strategy: String,
}

const OVERHEAD_BYTES: u64 = 4096;
const FILL_FACTOR: u64 = 8;

/// Working-set model of the elimination: index arrays, the sparse rows with an
/// assumed fill factor, and a dense tail on a tenth of the smaller dimension.
pub fn memory_estimate(rows: u64, cols: u64, nnz: u64) -> u64 {
    let tail = rows.min(cols) / 10;
    OVERHEAD_BYTES
        .saturating_add(8u64.saturating_mul(rows.saturating_add(cols)))
        .saturating_add(16u64.saturating_mul(FILL_FACTOR).saturating_mul(nnz))
        .saturating_add(4u64.saturating_mul(tail).saturating_mul(tail))
}

fn check_budget(bytes: u64, budget: Option<u64>) -> Result<()> {
    match budget {
        Some(b) if bytes > b => Err(Error::Resource {
            estimate: bytes,
            budget: b,
        }),
        _ => Ok(()),
    }
}

/// Rank by plain Gaussian elimination on a dense copy. Kept deliberately simple.
pub fn dense_rank_oracle(m: &SparseMatrix) -> Result<u64> {
    dense_rank_oracle_with_budget(m, None)
}

pub fn dense_rank_oracle_with_budget(m: &SparseMatrix, budget: Option<u64>) -> Result<u64> {
    check_budget(
        OVERHEAD_BYTES + 8 * (m.rows as u64) * (m.cols as u64),
        budget,
    )?;
    let p = m.modulus as i64;
    let mut a = vec![vec![0i64; m.cols]; m.rows];
    for &(r, c, v) in &m.entries {
        a[r as usize][c as usize] = (a[r as usize][c as usize] + v as i64) % p;
    }
    let field = PrimeField::new(m.modulus);
    let mut rank = 0usize;
    for col in 0..m.cols {
        let Some(piv) = (rank..m.rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, piv);
        let inv = field.inv(a[rank][col] as u32).expect("nonzero pivot") as i64;
        let pivot = a[rank].clone();
        for row in a.iter_mut().skip(rank + 1) {
            if row[col] == 0 {
                continue;
            }
            let f = row[col] * inv % p;
            for (x, y) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x = (*x - f * y).rem_euclid(p);
            }
        }
        rank += 1;
    }
    Ok(rank as u64)
}

/// Rank of a dense row-major block, with delayed reduction. Consumes the block.
fn dense_kernel(mut a: Vec<u32>, rows: usize, cols: usize, field: PrimeField) -> u64 {
    let p = field.p as u64;
    let mut rank = 0usize;
    let mut row_order: Vec<usize> = (0..rows).collect();
    for col in 0..cols {
        let Some(pi) = (rank..rows).find(|&i| a[row_order[i] * cols + col] != 0) else {
            continue;
        };
        row_order.swap(rank, pi);
        let prow = row_order[rank];
        let inv = field.inv(a[prow * cols + col]).expect("nonzero pivot") as u64;
        let pivot: Vec<u64> = a[prow * cols + col..prow * cols + cols]
            .iter()
            .map(|&x| x as u64)
            .collect();
        for &r in &row_order[rank + 1..] {
            let base = r * cols + col;
            let lead = a[base] as u64;
            if lead == 0 {
                continue;
            }
            let f = p - lead * inv % p;
            for (dst, &src) in a[base..r * cols + cols].iter_mut().zip(&pivot) {
                *dst = ((*dst as u64 + f * src) % p) as u32;
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank as u64
}

struct Eliminator {
    field: PrimeField,
    vecs: Vec<Vec<(u32, u32)>>,
    alive: Vec<bool>,
    holders: Vec<Vec<u32>>,
    count: Vec<u32>,
    queue: BTreeSet<(u32, u32)>,
    singles: Vec<u32>,
    active_vecs: usize,
    active_coords: usize,
    active_nnz: u64,
    holder_len: u64,
    peak: u64,
    budget: Option<u64>,
}

impl Eliminator {
    fn bytes(&self) -> u64 {
        OVERHEAD_BYTES
            + 8 * (self.vecs.len() as u64 + self.count.len() as u64)
            + 8 * self.active_nnz
            + 4 * self.holder_len
            + 16 * self.queue.len() as u64
    }

    fn note_memory(&mut self) -> Result<()> {
        let b = self.bytes();
        self.peak = self.peak.max(b);
        check_budget(b, self.budget)
    }

    fn set_count(&mut self, coord: u32, new: u32) {
        let old = self.count[coord as usize];
        if old == new {
            return;
        }
        if old > 0 {
            self.queue.remove(&(old, coord));
        } else {
            self.active_coords += 1;
        }
        if new > 0 {
            self.queue.insert((new, coord));
        } else {
            self.active_coords -= 1;
        }
        self.count[coord as usize] = new;
    }

    fn value_at(&self, v: u32, coord: u32) -> Option<u32> {
        let row = &self.vecs[v as usize];
        row.binary_search_by_key(&coord, |e| e.0)
            .ok()
            .map(|i| row[i].1)
    }

    fn retire(&mut self, v: u32) {
        self.alive[v as usize] = false;
        self.active_vecs -= 1;
        let row = std::mem::take(&mut self.vecs[v as usize]);
        self.active_nnz -= row.len() as u64;
        for &(c, _) in &row {
            let n = self.count[c as usize] - 1;
            self.set_count(c, n);
        }
    }

    /// row[v] -= f * pivot, maintaining counts and holder lists.
    fn axpy(&mut self, v: u32, f: u32, pivot: &[(u32, u32)]) {
        let field = self.field;
        let old = std::mem::take(&mut self.vecs[v as usize]);
        let mut out = Vec::with_capacity(old.len() + pivot.len());
        let (mut i, mut j) = (0, 0);
        let mut added: Vec<u32> = Vec::new();
        let mut removed: Vec<u32> = Vec::new();
        while i < old.len() || j < pivot.len() {
            let take_old = j == pivot.len() || (i < old.len() && old[i].0 < pivot[j].0);
            let take_piv = i == old.len() || (j < pivot.len() && pivot[j].0 < old[i].0);
            if take_old {
                out.push(old[i]);
                i += 1;
            } else if take_piv {
                let (c, x) = pivot[j];
                out.push((c, field.neg(field.mul(f, x))));
                added.push(c);
                j += 1;
            } else {
                let c = old[i].0;
                let val = field.sub(old[i].1, field.mul(f, pivot[j].1));
                if val == 0 {
                    removed.push(c);
                } else {
                    out.push((c, val));
                }
                i += 1;
                j += 1;
            }
        }
        self.active_nnz = self.active_nnz + out.len() as u64 - old.len() as u64;
        for c in added {
            let n = self.count[c as usize] + 1;
            self.set_count(c, n);
            self.holders[c as usize].push(v);
            self.holder_len += 1;
        }
        for c in removed {
            let n = self.count[c as usize] - 1;
            self.set_count(c, n);
        }
        if out.len() == 1 {
            self.singles.push(v);
        }
        if out.is_empty() {
            self.alive[v as usize] = false;
            self.active_vecs -= 1;
        }
        self.vecs[v as usize] = out;
    }

    fn pick_pivot(&mut self) -> Option<(u32, u32)> {
        while let Some(v) = self.singles.pop() {
            if self.alive[v as usize] && self.vecs[v as usize].len() == 1 {
                return Some((v, self.vecs[v as usize][0].0));
            }
        }
        let &(_, coord) = self.queue.iter().next()?;
        let mut best: Option<(usize, u32)> = None;
        for &v in &self.holders[coord as usize] {
            if !self.alive[v as usize] || self.value_at(v, coord).is_none() {
                continue;
            }
            let key = (self.vecs[v as usize].len(), v);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        let (_, v) = best.expect("count and holder lists agree");
        Some((v, coord))
    }

    fn density(&self) -> f64 {
        if self.active_vecs == 0 || self.active_coords == 0 {
            return 0.0;
        }
        self.active_nnz as f64 / (self.active_vecs as f64 * self.active_coords as f64)
    }
}

/// Exact rank over F_modulus.
pub fn sparse_rank(m: &SparseMatrix, id: &str, opts: &RankOptions) -> Result<RankReport> {
    let start = Instant::now();
    m.validate()?;
    check_budget(
        memory_estimate(m.rows as u64, m.cols as u64, m.nnz() as u64),
        opts.budget,
    )?;
    let field = PrimeField::new(m.modulus);
    let (rank, peak, used) = match opts.strategy {
        Strategy::Dense => {
            let bytes = OVERHEAD_BYTES + 4 * m.rows as u64 * m.cols as u64;
            check_budget(bytes, opts.budget)?;
            let mut a = vec![0u32; m.rows * m.cols];
            for &(r, c, v) in &m.entries {
                a[r as usize * m.cols + c as usize] = v;
            }
            (
                dense_kernel(a, m.rows, m.cols, field),
                bytes,
                "dense".to_string(),
            )
        }
        Strategy::SparseElim => eliminate(m, field, f64::INFINITY, opts.budget)?,
        Strategy::Auto => eliminate(m, field, opts.dense_threshold, opts.budget)?,
    };
    Ok(RankReport {
        id: id.to_string(),
        rank,
        elapsed_s: start.elapsed().as_secs_f64(),
        peak_bytes: peak,
        strategy: used,
    })
}

fn eliminate(
    m: &SparseMatrix,
    field: PrimeField,
    threshold: f64,
    budget: Option<u64>,
) -> Result<(u64, u64, String)> {
    // Store vectors along the smaller dimension.
    let transpose = m.rows > m.cols;
    let (nv, nc) = if transpose {
        (m.cols, m.rows)
    } else {
        (m.rows, m.cols)
    };
    let mut vecs: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nv];
    for &(r, c, v) in &m.entries {
        if v == 0 {
            continue;
        }
        let (vi, ci) = if transpose { (c, r) } else { (r, c) };
        vecs[vi as usize].push((ci, v));
    }
    let mut e = Eliminator {
        field,
        alive: vec![true; nv],
        holders: vec![Vec::new(); nc],
        count: vec![0; nc],
        queue: BTreeSet::new(),
        singles: Vec::new(),
        active_vecs: nv,
        active_coords: 0,
        active_nnz: 0,
        holder_len: 0,
        peak: 0,
        budget,
        vecs: Vec::new(),
    };
    for (i, row) in vecs.iter_mut().enumerate() {
        row.sort_unstable();
        for &(c, _) in row.iter() {
            e.holders[c as usize].push(i as u32);
            e.count[c as usize] += 1;
        }
        e.active_nnz += row.len() as u64;
        e.holder_len += row.len() as u64;
        if row.is_empty() {
            e.alive[i] = false;
            e.active_vecs -= 1;
        } else if row.len() == 1 {
            e.singles.push(i as u32);
        }
    }
    e.singles.reverse();
    e.vecs = vecs;
    for c in 0..nc {
        let n = e.count[c];
        if n > 0 {
            e.queue.insert((n, c as u32));
            e.active_coords += 1;
        }
    }
    e.note_memory()?;
    let mut rank = 0u64;
    let mut strategy = "sparse-elim".to_string();
    let mut steps = 0u64;
    while let Some((pv, coord)) = e.pick_pivot() {
        rank += 1;
        let pivot = e.vecs[pv as usize].clone();
        let pval = e.value_at(pv, coord).expect("pivot entry");
        let inv = field.inv(pval).expect("nonzero pivot");
        let holders = std::mem::take(&mut e.holders[coord as usize]);
        e.holder_len -= holders.len() as u64;
        e.retire(pv);
        let mut last = u32::MAX;
        for &v in &holders {
            if v == pv || v == last || !e.alive[v as usize] {
                continue;
            }
            last = v;
            if let Some(x) = e.value_at(v, coord) {
                e.axpy(v, field.mul(x, inv), &pivot);
            }
        }
        steps += 1;
        if steps.is_multiple_of(64) {
            e.note_memory()?;
        }
        if e.active_vecs > 0 && e.active_coords > 0 && e.density() > threshold {
            let (dr, dc) = (e.active_vecs, e.active_coords);
            let bytes = OVERHEAD_BYTES + 4 * dr as u64 * dc as u64;
            e.peak = e.peak.max(e.bytes() + bytes);
            check_budget(e.bytes() + bytes, budget)?;
            let mut col_index = vec![u32::MAX; nc];
            let mut next = 0u32;
            for (c, &n) in e.count.iter().enumerate() {
                if n > 0 {
                    col_index[c] = next;
                    next += 1;
                }
            }
            let mut a = vec![0u32; dr * dc];
            let mut r = 0;
            for v in 0..nv {
                if !e.alive[v] {
                    continue;
                }
                for &(c, x) in &e.vecs[v] {
                    a[r * dc + col_index[c as usize] as usize] = x;
                }
                r += 1;
            }
            rank += dense_kernel(a, dr, dc, field);
            strategy = "sparse-elim+dense".to_string();
            return Ok((rank, e.peak, strategy));
        }
    }
    e.note_memory()?;
    Ok((rank, e.peak, strategy))
}
