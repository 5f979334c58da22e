//! Koszul strand bases, boundary matrices, the SMF file format and the job plan.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grading::{canonical_multidegree, monomial_basis, EmbeddingSpec, Monomial, Multidegree};
use crate::hilbert::{strand_dimension, subset_window};
use crate::linalg::SparseMatrix;

/// A wedge of monomials, as a bit set over indices into `monomial_basis(D)`.
pub type WedgeKey = u64;

pub fn wedge_indices(key: WedgeKey) -> Vec<usize> {
    let mut out = Vec::with_capacity(key.count_ones() as usize);
    let mut k = key;
    while k != 0 {
        out.push(k.trailing_zeros() as usize);
        k &= k - 1;
    }
    out
}

struct SuffixBounds {
    // [idx][r] = min/max of Σi (resp. Σj) over r monomials taken from idx..n.
    min_i: Vec<Vec<i64>>,
    max_i: Vec<Vec<i64>>,
    min_j: Vec<Vec<i64>>,
    max_j: Vec<Vec<i64>>,
}

impl SuffixBounds {
    fn new(mons: &[Monomial]) -> Self {
        let n = mons.len();
        let mut b = SuffixBounds {
            min_i: vec![vec![0; n + 1]; n + 1],
            max_i: vec![vec![0; n + 1]; n + 1],
            min_j: vec![vec![0; n + 1]; n + 1],
            max_j: vec![vec![0; n + 1]; n + 1],
        };
        for idx in 0..=n {
            let mut is: Vec<i64> = mons[idx..].iter().map(|m| m.i).collect();
            let mut js: Vec<i64> = mons[idx..].iter().map(|m| m.j).collect();
            is.sort_unstable();
            js.sort_unstable();
            for r in 1..=is.len() {
                b.min_i[idx][r] = b.min_i[idx][r - 1] + is[r - 1];
                b.max_i[idx][r] = b.max_i[idx][r - 1] + is[is.len() - r];
                b.min_j[idx][r] = b.min_j[idx][r - 1] + js[r - 1];
                b.max_j[idx][r] = b.max_j[idx][r - 1] + js[js.len() - r];
            }
        }
        b
    }
}

/// All p-subsets W of the S_D monomials with deg W <= a, in lexicographic order
/// of their index lists. These index the basis of (⋀^p S_D ⊗ S_{a - deg W}).
pub fn strand_basis(spec: &EmbeddingSpec, p: i64, a: &Multidegree) -> Vec<WedgeKey> {
    let mons = monomial_basis(spec.d());
    let n = mons.len();
    if p < 0 || p as usize > n || !a.is_nonnegative() {
        return Vec::new();
    }
    let (xlo, xhi, ylo, yhi) = subset_window(spec, p, a);
    if xlo > xhi || ylo > yhi {
        return Vec::new();
    }
    let bounds = SuffixBounds::new(&mons);
    let mut out = Vec::new();
    let ctx = Dfs {
        mons: &mons,
        bounds: &bounds,
        xlo,
        xhi,
        ylo,
        yhi,
    };
    ctx.walk(0, p as usize, 0, 0, 0, &mut out);
    out
}

struct Dfs<'a> {
    mons: &'a [Monomial],
    bounds: &'a SuffixBounds,
    xlo: i64,
    xhi: i64,
    ylo: i64,
    yhi: i64,
}

impl Dfs<'_> {
    fn walk(&self, idx: usize, r: usize, si: i64, sj: i64, key: WedgeKey, out: &mut Vec<WedgeKey>) {
        if r == 0 {
            if si >= self.xlo && si <= self.xhi && sj >= self.ylo && sj <= self.yhi {
                out.push(key);
            }
            return;
        }
        let n = self.mons.len();
        let b = self.bounds;
        for next in idx..=n - r {
            let remaining = r - 1;
            let m = self.mons[next];
            let (ni, nj) = (si + m.i, sj + m.j);
            let tail = next + 1;
            if ni + b.min_i[tail][remaining] > self.xhi
                || ni + b.max_i[tail][remaining] < self.xlo
                || nj + b.min_j[tail][remaining] > self.yhi
                || nj + b.max_j[tail][remaining] < self.ylo
            {
                continue;
            }
            self.walk(tail, remaining, ni, nj, key | (1u64 << next), out);
        }
    }
}

/// The matrix of (∂_{p,q})_a: columns index the (p,q) strand, rows the (p-1,q+1) strand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrandMatrix {
    pub spec: EmbeddingSpec,
    pub p: i64,
    pub q: i64,
    pub a: Multidegree,
    pub matrix: SparseMatrix,
}

impl StrandMatrix {
    pub fn id(&self) -> String {
        job_id(self.p, self.q, &self.a)
    }

    /// Target basis elements actually reached by the differential; the rest are zero rows.
    pub fn hit_rows(&self) -> usize {
        let mut rows: Vec<u32> = self.matrix.entries.iter().map(|e| e.0).collect();
        rows.sort_unstable();
        rows.dedup();
        rows.len()
    }

    /// Rows carrying at least one nonzero entry.
    pub fn nonzero_rows(&self) -> usize {
        let mut seen: Vec<bool> = vec![false; self.matrix.rows];
        let mut count = 0;
        for &(r, _, _) in &self.matrix.entries {
            if !seen[r as usize] {
                seen[r as usize] = true;
                count += 1;
            }
        }
        count
    }
}

pub fn job_id(p: i64, q: i64, a: &Multidegree) -> String {
    let a = a.0;
    format!("p{p}-q{q}-a{}_{}_{}_{}", a[0], a[1], a[2], a[3])
}

/// Whether the (p,q) strand at a exists at all (nonnegative module degree, right bidegree).
fn strand_exists(spec: &EmbeddingSpec, p: i64, q: i64, a: &Multidegree) -> bool {
    p >= 0 && q >= 0 && spec.degree(q).is_effective() && a.bidegree() == spec.degree(p + q)
}

pub fn build_strand_matrix(spec: &EmbeddingSpec, p: i64, q: i64, a: &Multidegree) -> StrandMatrix {
    let cols = if strand_exists(spec, p, q, a) {
        strand_basis(spec, p, a)
    } else {
        Vec::new()
    };
    let rows = if p >= 1 && strand_exists(spec, p - 1, q + 1, a) {
        strand_basis(spec, p - 1, a)
    } else {
        Vec::new()
    };
    let modulus = spec.modulus;
    let mut entries = Vec::new();
    if !rows.is_empty() && !cols.is_empty() {
        let index: HashMap<WedgeKey, u32> = rows
            .iter()
            .enumerate()
            .map(|(r, &k)| (k, r as u32))
            .collect();
        entries.reserve(cols.len() * p as usize);
        let mut col_entries: Vec<(u32, u32, u32)> = Vec::with_capacity(p as usize);
        for (c, &key) in cols.iter().enumerate() {
            col_entries.clear();
            for (pos, idx) in wedge_indices(key).into_iter().enumerate() {
                let target = key & !(1u64 << idx);
                let row = index[&target];
                // Sign (-1)^i with i counted from 1.
                let value = if pos % 2 == 0 { modulus - 1 } else { 1 };
                col_entries.push((row, c as u32, value));
            }
            col_entries.sort_unstable();
            entries.extend(col_entries.iter().copied());
        }
    }
    StrandMatrix {
        spec: *spec,
        p,
        q,
        a: *a,
        matrix: SparseMatrix {
            rows: rows.len(),
            cols: cols.len(),
            modulus,
            entries,
        },
    }
}

/// True iff (∂_{p-1,q+1})_a ∘ (∂_{p,q})_a vanishes over F_modulus.
pub fn compose_check(spec: &EmbeddingSpec, p: i64, q: i64, a: &Multidegree) -> bool {
    let outer = build_strand_matrix(spec, p - 1, q + 1, a);
    let inner = build_strand_matrix(spec, p, q, a);
    matrices_compose_to_zero(&outer.matrix, &inner.matrix)
}

pub fn matrices_compose_to_zero(outer: &SparseMatrix, inner: &SparseMatrix) -> bool {
    if outer.cols != inner.rows {
        return outer.entries.is_empty() || inner.entries.is_empty();
    }
    let m = outer.modulus as u64;
    let mut by_col: Vec<Vec<(u32, u32)>> = vec![Vec::new(); outer.cols];
    for &(r, c, v) in &outer.entries {
        by_col[c as usize].push((r, v));
    }
    let mut acc: HashMap<u32, u64> = HashMap::new();
    let mut i = 0;
    let e = &inner.entries;
    while i < e.len() {
        let col = e[i].1;
        acc.clear();
        while i < e.len() && e[i].1 == col {
            let (mid, _, v) = e[i];
            for &(r, w) in &by_col[mid as usize] {
                let slot = acc.entry(r).or_insert(0);
                *slot = (*slot + v as u64 * w as u64) % m;
            }
            i += 1;
        }
        if acc.values().any(|&x| x != 0) {
            return false;
        }
    }
    true
}

/// Write a strand matrix in SMF 1 format, atomically.
pub fn write_smf(m: &StrandMatrix, path: &Path) -> Result<()> {
    crate::io::atomic_write_with(path, |w| {
        let s = &m.spec;
        let a = m.a.0;
        writeln!(w, "SMF 1")?;
        writeln!(w, "modulus {}", s.modulus)?;
        writeln!(w, "spec {} {} {} {}", s.d1, s.d2, s.b1, s.b2)?;
        writeln!(w, "strand {} {}", m.p, m.q)?;
        writeln!(w, "multidegree {} {} {} {}", a[0], a[1], a[2], a[3])?;
        writeln!(
            w,
            "size {} {} {}",
            m.matrix.rows,
            m.matrix.cols,
            m.matrix.entries.len()
        )?;
        for &(r, c, v) in &m.matrix.entries {
            writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
        }
        Ok(())
    })
}

fn header_fields(line: Option<&str>, key: &str, count: usize, ctx: &str) -> Result<Vec<i64>> {
    let line = line.ok_or_else(|| Error::format(ctx, format!("missing `{key}` line")))?;
    let mut parts = line.split_ascii_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::format(
            ctx,
            format!("expected `{key}` line, got `{line}`"),
        ));
    }
    let vals: Vec<i64> = parts
        .map(|t| t.parse::<i64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(ctx, format!("bad `{key}` line: {e}")))?;
    if vals.len() != count {
        return Err(Error::format(ctx, format!("`{key}` needs {count} fields")));
    }
    Ok(vals)
}

pub fn read_smf(path: &Path) -> Result<StrandMatrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_smf(BufReader::new(file), &path.display().to_string())
}

pub fn parse_smf(reader: impl BufRead, ctx: &str) -> Result<StrandMatrix> {
    let mut lines = reader.lines();
    let mut next = || -> Result<Option<String>> {
        lines
            .next()
            .transpose()
            .map_err(|e| Error::format(ctx, e.to_string()))
    };
    let first = next()?;
    if first.as_deref() != Some("SMF 1") {
        return Err(Error::format(ctx, "first line must be `SMF 1`"));
    }
    let modulus = header_fields(next()?.as_deref(), "modulus", 1, ctx)?[0];
    let sp = header_fields(next()?.as_deref(), "spec", 4, ctx)?;
    let st = header_fields(next()?.as_deref(), "strand", 2, ctx)?;
    let md = header_fields(next()?.as_deref(), "multidegree", 4, ctx)?;
    let sz = header_fields(next()?.as_deref(), "size", 3, ctx)?;
    let modulus = u32::try_from(modulus).map_err(|_| Error::format(ctx, "modulus out of range"))?;
    let spec = EmbeddingSpec::new(sp[0], sp[1], sp[2], sp[3], modulus)
        .map_err(|e| Error::format(ctx, e.to_string()))?;
    if sz.iter().any(|&x| x < 0) {
        return Err(Error::format(ctx, "negative size"));
    }
    let (rows, cols, nnz) = (sz[0] as usize, sz[1] as usize, sz[2] as usize);
    let mut entries = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let line = next()?.ok_or_else(|| Error::format(ctx, "fewer entries than declared"))?;
        let mut it = line.split_ascii_whitespace().map(|t| t.parse::<u64>());
        let (Some(Ok(r)), Some(Ok(c)), Some(Ok(v)), None) =
            (it.next(), it.next(), it.next(), it.next())
        else {
            return Err(Error::format(ctx, format!("bad entry line `{line}`")));
        };
        if r == 0 || c == 0 || r as usize > rows || c as usize > cols {
            return Err(Error::format(
                ctx,
                format!("entry ({r},{c}) outside {rows}x{cols}"),
            ));
        }
        if v != 1 && v != modulus as u64 - 1 {
            return Err(Error::format(ctx, format!("entry value {v} is not ±1")));
        }
        entries.push(((r - 1) as u32, (c - 1) as u32, v as u32));
    }
    if let Some(extra) = next()? {
        if !extra.trim().is_empty() {
            return Err(Error::format(ctx, "more entries than declared"));
        }
    }
    for w in entries.windows(2) {
        let (x, y) = ((w[0].1, w[0].0), (w[1].1, w[1].0));
        if x == y {
            return Err(Error::format(
                ctx,
                format!("duplicate entry ({},{})", x.1 + 1, x.0 + 1),
            ));
        }
        if x > y {
            return Err(Error::format(ctx, "entries not sorted by (col, row)"));
        }
    }
    Ok(StrandMatrix {
        spec,
        p: st[0],
        q: st[1],
        a: Multidegree::new(md[0], md[1], md[2], md[3]),
        matrix: SparseMatrix {
            rows,
            cols,
            modulus,
            entries,
        },
    })
}

/// A user-supplied set of (p, q) pairs, written `q0:4-8,q1:3-7`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Window {
    pairs: BTreeSet<(i64, i64)>,
}

impl Window {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, i64)>) -> Self {
        Window {
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn contains(&self, p: i64, q: i64) -> bool {
        self.pairs.contains(&(p, q))
    }

    pub fn pairs(&self) -> impl Iterator<Item = &(i64, i64)> {
        self.pairs.iter()
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |item: &str| Error::Usage(format!("bad window item `{item}`, expected qK:lo-hi"));
        let mut pairs = BTreeSet::new();
        if s.trim() == "none" {
            return Ok(Window { pairs });
        }
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (qs, range) = item.split_once(':').ok_or_else(|| bad(item))?;
            let q: i64 = qs
                .strip_prefix('q')
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| bad(item))?;
            let (lo, hi) = match range.split_once('-') {
                Some((l, h)) => (l.parse::<i64>(), h.parse::<i64>()),
                None => (range.parse::<i64>(), range.parse::<i64>()),
            };
            let (Ok(lo), Ok(hi)) = (lo, hi) else {
                return Err(bad(item));
            };
            if !(0..=2).contains(&q) || lo < 0 || lo > hi {
                return Err(bad(item));
            }
            pairs.extend((lo..=hi).map(|p| (p, q)));
        }
        if pairs.is_empty() {
            return Err(Error::Usage(
                "empty window; use `none` for an empty relevant range".into(),
            ));
        }
        Ok(Window { pairs })
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items = Vec::new();
        for q in 0..=2 {
            let ps: Vec<i64> = self
                .pairs
                .iter()
                .filter(|x| x.1 == q)
                .map(|x| x.0)
                .collect();
            let mut i = 0;
            while i < ps.len() {
                let mut j = i;
                while j + 1 < ps.len() && ps[j + 1] == ps[j] + 1 {
                    j += 1;
                }
                items.push(format!("q{q}:{}-{}", ps[i], ps[j]));
                i = j + 1;
            }
        }
        if items.is_empty() {
            return f.write_str("none");
        }
        write!(f, "{}", items.join(","))
    }
}

/// Strand dimensions along one antidiagonal p + q = k at a canonical multidegree,
/// and which rows can carry Betti numbers there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stratum {
    pub k: i64,
    pub a: Multidegree,
    /// dims[q] = dim C_{k-q, q, a} for q = 0..=3.
    pub dims: [u64; 4],
    /// Rows q in {0,1,2} with positive strand dimension and 0 <= k - q <= codim.
    pub present: Vec<i64>,
    /// Present rows whose Betti numbers are resolved by ranks rather than the Hilbert function.
    pub visible: Vec<i64>,
}

impl Stratum {
    pub fn new(spec: &EmbeddingSpec, k: i64, a: Multidegree, window: Option<&Window>) -> Self {
        let mut dims = [0u64; 4];
        for (q, d) in dims.iter_mut().enumerate() {
            *d = strand_dimension(spec, k - q as i64, q as i64, &a);
        }
        let codim = spec.codim();
        let present: Vec<i64> = (0..=2)
            .filter(|&q| dims[q as usize] > 0 && (0..=codim).contains(&(k - q)))
            .collect();
        let visible = match window {
            Some(w) => present
                .iter()
                .copied()
                .filter(|&q| w.contains(k - q, q))
                .collect(),
            None => present.clone(),
        };
        Stratum {
            k,
            a,
            dims,
            present,
            visible,
        }
    }

    pub fn dim(&self, q: i64) -> u64 {
        if (0..=3).contains(&q) {
            self.dims[q as usize]
        } else {
            0
        }
    }

    /// (p, q) of the boundary maps whose ranks determine this stratum.
    pub fn rank_jobs(&self, full_rank: bool) -> Vec<(i64, i64)> {
        let mut jobs = Vec::new();
        if self.visible.len() < 2 {
            return jobs;
        }
        let top = *self.visible.last().expect("nonempty");
        for &u in &self.visible[..self.visible.len() - 1] {
            jobs.push((self.k - u, u));
            if self.dim(u - 1) > 0 {
                jobs.push((self.k - u + 1, u - 1));
            }
        }
        if full_rank && self.dim(top + 1) > 0 {
            jobs.push((self.k - top, top));
        }
        jobs.sort_unstable();
        jobs.dedup();
        jobs
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedJob {
    pub p: i64,
    pub q: i64,
    pub a: Multidegree,
    pub rows: u64,
    pub cols: u64,
}

impl PlannedJob {
    pub fn id(&self) -> String {
        job_id(self.p, self.q, &self.a)
    }
}

#[derive(Clone, Debug, Default)]
pub struct PlanOptions {
    pub window: Option<Window>,
    /// Also rank the outgoing map of the top visible row, making the Hilbert
    /// identity an independent check instead of the source of that entry.
    pub full_rank: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RangePlan {
    pub window: Option<String>,
    pub full_rank: bool,
    /// Sorted by p, then q, then multidegree.
    pub jobs: Vec<PlannedJob>,
}

impl RangePlan {
    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    /// The job with the largest (cols, rows).
    pub fn largest(&self) -> Option<&PlannedJob> {
        self.jobs.iter().max_by_key(|j| (j.cols, j.rows))
    }

    /// (p, q) pairs with their canonical multidegrees.
    pub fn pairs(&self) -> Vec<((i64, i64), Vec<Multidegree>)> {
        let mut out: Vec<((i64, i64), Vec<Multidegree>)> = Vec::new();
        for j in &self.jobs {
            match out.last_mut() {
                Some((pq, v)) if *pq == (j.p, j.q) => v.push(j.a),
                _ => out.push(((j.p, j.q), vec![j.a])),
            }
        }
        out
    }

    pub fn is_superset_of(&self, other: &RangePlan) -> bool {
        let mine: BTreeSet<String> = self.jobs.iter().map(PlannedJob::id).collect();
        other.jobs.iter().all(|j| mine.contains(&j.id()))
    }
}

/// Every canonical multidegree stratum of the spec, antidiagonal by antidiagonal.
pub fn strata(spec: &EmbeddingSpec, window: Option<&Window>) -> Vec<Stratum> {
    let mut out = Vec::new();
    for k in 0..=spec.codim() + 2 {
        for a in spec.canonical_multidegrees(k) {
            out.push(Stratum::new(spec, k, a, window));
        }
    }
    out
}

pub fn relevant_range(spec: &EmbeddingSpec, window: Option<&Window>) -> RangePlan {
    plan_range(
        spec,
        &PlanOptions {
            window: window.cloned(),
            full_rank: false,
        },
    )
}

pub fn plan_range(spec: &EmbeddingSpec, opts: &PlanOptions) -> RangePlan {
    let mut jobs = Vec::new();
    for st in strata(spec, opts.window.as_ref()) {
        for (p, q) in st.rank_jobs(opts.full_rank) {
            debug_assert_eq!(canonical_multidegree(st.a).0, st.a);
            jobs.push(PlannedJob {
                p,
                q,
                a: st.a,
                rows: st.dim(q + 1),
                cols: st.dim(q),
            });
        }
    }
    jobs.sort_by_key(|x| (x.p, x.q, x.a));
    RangePlan {
        window: opts.window.as_ref().map(Window::to_string),
        full_rank: opts.full_rank,
        jobs,
    }
}
