//! Multigraded Hilbert-series arithmetic for S(b;D).

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::grading::{monomial_basis, EmbeddingSpec, Multidegree};

/// Finitely supported polynomial in t0..t3.
pub type WeightPolynomial = BTreeMap<Multidegree, i64>;

/// Counts of p-subsets of the S_D monomials by (sum of i, sum of j), stored as
/// 2D prefix sums so that any box of the (Σi, Σj) plane is an O(1) query.
pub struct SubsetTable {
    n: usize,
    nx: usize,
    ny: usize,
    prefix: Vec<u64>,
}

impl SubsetTable {
    pub fn build(d1: i64, d2: i64) -> Self {
        let mons = monomial_basis(crate::grading::Bidegree::new(d1, d2));
        let n = mons.len();
        let nx = n * d1 as usize + 1;
        let ny = n * d2 as usize + 1;
        let plane = nx * ny;
        let mut g = vec![0u64; (n + 1) * plane];
        g[0] = 1;
        for (seen, m) in mons.iter().enumerate() {
            let (i, j) = (m.i as usize, m.j as usize);
            for p in (1..=seen + 1).rev() {
                let (lo, hi) = g.split_at_mut(p * plane);
                let src = &lo[(p - 1) * plane..];
                let dst = &mut hi[..plane];
                for x in i..nx {
                    let srow = (x - i) * ny;
                    let drow = x * ny;
                    for y in j..ny {
                        dst[drow + y] += src[srow + y - j];
                    }
                }
            }
        }
        for p in 0..=n {
            let t = &mut g[p * plane..(p + 1) * plane];
            for x in 0..nx {
                for y in 0..ny {
                    let mut v = t[x * ny + y];
                    if x > 0 {
                        v = v.wrapping_add(t[(x - 1) * ny + y]);
                    }
                    if y > 0 {
                        v = v.wrapping_add(t[x * ny + y - 1]);
                    }
                    if x > 0 && y > 0 {
                        v = v.wrapping_sub(t[(x - 1) * ny + y - 1]);
                    }
                    t[x * ny + y] = v;
                }
            }
        }
        SubsetTable {
            n,
            nx,
            ny,
            prefix: g,
        }
    }

    fn at(&self, p: usize, x: i64, y: i64) -> u64 {
        if x < 0 || y < 0 {
            return 0;
        }
        let x = (x as usize).min(self.nx - 1);
        let y = (y as usize).min(self.ny - 1);
        self.prefix[p * self.nx * self.ny + x * self.ny + y]
    }

    /// Number of p-subsets with Σi in [xlo, xhi] and Σj in [ylo, yhi].
    pub fn count(&self, p: usize, xlo: i64, xhi: i64, ylo: i64, yhi: i64) -> u64 {
        if p > self.n || xlo > xhi || ylo > yhi {
            return 0;
        }
        self.at(p, xhi, yhi)
            .wrapping_sub(self.at(p, xlo - 1, yhi))
            .wrapping_sub(self.at(p, xhi, ylo - 1))
            .wrapping_add(self.at(p, xlo - 1, ylo - 1))
    }
}

type TableCache = Mutex<HashMap<(i64, i64), Arc<SubsetTable>>>;

pub fn subset_table(d1: i64, d2: i64) -> Arc<SubsetTable> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("subset table cache poisoned");
    guard
        .entry((d1, d2))
        .or_insert_with(|| Arc::new(SubsetTable::build(d1, d2)))
        .clone()
}

/// Bounds on (Σi, Σj) for p-subsets W with deg W <= a componentwise.
pub(crate) fn subset_window(spec: &EmbeddingSpec, p: i64, a: &Multidegree) -> (i64, i64, i64, i64) {
    let a = a.0;
    let xlo = (p * spec.d1 - a[1]).max(0);
    let xhi = a[0].min(p * spec.d1);
    let ylo = (p * spec.d2 - a[3]).max(0);
    let yhi = a[2].min(p * spec.d2);
    (xlo, xhi, ylo, yhi)
}

/// dim (⋀^p S_D ⊗ S_{qD+b})_a.
pub fn strand_dimension(spec: &EmbeddingSpec, p: i64, q: i64, a: &Multidegree) -> u64 {
    let n = spec.n() as i64;
    if p < 0 || p > n || q < 0 || !spec.degree(q).is_effective() || !a.is_nonnegative() {
        return 0;
    }
    if a.bidegree() != spec.degree(p + q) {
        return 0;
    }
    let (xlo, xhi, ylo, yhi) = subset_window(spec, p, a);
    subset_table(spec.d1, spec.d2).count(p as usize, xlo, xhi, ylo, yhi)
}

/// Σ_p (-1)^p dim C_{p,k-p,a}: the Euler characteristic of the strand complex at a.
pub fn euler_characteristic(spec: &EmbeddingSpec, a: &Multidegree) -> i64 {
    let Some(k) = spec.antidiagonal(a) else {
        return 0;
    };
    let mut h = 0i64;
    for p in 0..=k.min(spec.n() as i64) {
        let c = strand_dimension(spec, p, k - p, a) as i64;
        h += if p % 2 == 0 { c } else { -c };
    }
    h
}

/// Coefficient of t^a in HS(S(b;D)) · ∏_m (1 - t^m), m over the degree-D monomials.
///
/// The product is expanded directly, truncated to exponents below a. A product
/// exponent c of bidegree p*D is stored by (p, c0, c2), since c1 = p*d1 - c0 and
/// c3 = p*d2 - c2.
pub fn numerator_coefficient(spec: &EmbeddingSpec, a: &Multidegree) -> i64 {
    if !a.is_nonnegative() {
        return 0;
    }
    let Some(k) = spec.antidiagonal(a) else {
        return 0;
    };
    if k < 0 {
        return 0;
    }
    let a = a.0;
    let pmax = k.min(spec.n() as i64) as usize;
    let (w0, w2) = (a[0] as usize + 1, a[2] as usize + 1);
    let plane = w0 * w2;
    let mut poly = vec![0i64; (pmax + 1) * plane];
    poly[0] = 1;
    let (d1, d2) = (spec.d1, spec.d2);
    for (seen, m) in monomial_basis(spec.d()).iter().enumerate() {
        let (i, j) = (m.i as usize, m.j as usize);
        for p in (0..pmax.min(seen + 1)).rev() {
            for c0 in 0..w0.saturating_sub(i) {
                // c1 of the product term after multiplying.
                if (p as i64 + 1) * d1 - (c0 + i) as i64 > a[1] {
                    continue;
                }
                for c2 in 0..w2.saturating_sub(j) {
                    let v = poly[p * plane + c0 * w2 + c2];
                    if v == 0 {
                        continue;
                    }
                    if (p as i64 + 1) * d2 - (c2 + j) as i64 > a[3] {
                        continue;
                    }
                    poly[(p + 1) * plane + (c0 + i) * w2 + c2 + j] -= v;
                }
            }
        }
    }
    let mut total = 0i64;
    for p in 0..=pmax {
        // The Hilbert function of S(b;D) is 1 on the bidegree (k-p)D + b; the
        // remaining conditions are a - c >= 0, already enforced by truncation.
        if !spec.degree(k - p as i64).is_effective() {
            continue;
        }
        for c0 in 0..w0 {
            if p as i64 * d1 - c0 as i64 > a[1] || (c0 as i64) > p as i64 * d1 {
                continue;
            }
            for c2 in 0..w2 {
                if p as i64 * d2 - c2 as i64 > a[3] || (c2 as i64) > p as i64 * d2 {
                    continue;
                }
                total += poly[p * plane + c0 * w2 + c2];
            }
        }
    }
    total
}

/// Solve the alternating-sum identity Σ_p (-1)^p β_{p,a} = h(a) for the unknown entries.
///
/// Returns `Ok(None)` when more than one entry is unknown.
pub fn forced_betti(
    spec: &EmbeddingSpec,
    a: &Multidegree,
    known: &BTreeMap<i64, u64>,
    unknown_ps: &[i64],
) -> Result<Option<BTreeMap<i64, u64>>> {
    let mut unknown: Vec<i64> = unknown_ps.to_vec();
    unknown.sort_unstable();
    unknown.dedup();
    if unknown.len() > 1 {
        return Ok(None);
    }
    let mut out = BTreeMap::new();
    let Some(&p) = unknown.first() else {
        return Ok(Some(out));
    };
    let sign = |p: i64| if p % 2 == 0 { 1i64 } else { -1 };
    let mut rest = euler_characteristic(spec, a);
    for (&kp, &v) in known {
        if kp != p {
            rest -= sign(kp) * v as i64;
        }
    }
    let value = sign(p) * rest;
    if value < 0 {
        return Err(Error::Integrity(format!(
            "Hilbert identity forces beta_{{{p},{a}}} = {value} for {}",
            spec.label()
        )));
    }
    out.insert(p, value as u64);
    Ok(Some(out))
}
