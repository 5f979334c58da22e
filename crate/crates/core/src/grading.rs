//! Degrees, monomial bases, the S2 x S2 symmetry and Koszul duality bookkeeping.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PRIME: u32 = 32003;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bidegree {
    pub e1: i64,
    pub e2: i64,
}

impl Bidegree {
    pub fn new(e1: i64, e2: i64) -> Self {
        Bidegree { e1, e2 }
    }

    pub fn is_effective(&self) -> bool {
        self.e1 >= 0 && self.e2 >= 0
    }
}

/// A Z^4 degree: `[a0, a1, a2, a3]` are the exponent totals of x0, x1, y0, y1.
///
/// The derived ordering is lexicographic, which is the order the Schur
/// decomposition reads leading monomials in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Multidegree(pub [i64; 4]);

impl Multidegree {
    pub fn new(a0: i64, a1: i64, a2: i64, a3: i64) -> Self {
        Multidegree([a0, a1, a2, a3])
    }

    pub fn bidegree(&self) -> Bidegree {
        let a = self.0;
        Bidegree::new(a[0] + a[1], a[2] + a[3])
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&x| x >= 0)
    }

    pub fn swap_x(&self) -> Self {
        let a = self.0;
        Multidegree([a[1], a[0], a[2], a[3]])
    }

    pub fn swap_y(&self) -> Self {
        let a = self.0;
        Multidegree([a[0], a[1], a[3], a[2]])
    }

    pub fn is_canonical(&self) -> bool {
        self.0[0] >= self.0[1] && self.0[2] >= self.0[3]
    }

    /// The distinct images of this multidegree under the two swaps, sorted.
    pub fn orbit(&self) -> Vec<Multidegree> {
        let mut v = vec![*self, self.swap_x(), self.swap_y(), self.swap_x().swap_y()];
        v.sort();
        v.dedup();
        v
    }

    pub fn add(&self, other: &Multidegree) -> Self {
        let (a, b) = (self.0, other.0);
        Multidegree([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }

    pub fn sub(&self, other: &Multidegree) -> Self {
        let (a, b) = (self.0, other.0);
        Multidegree([a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]])
    }

    pub fn dominated_by(&self, other: &Multidegree) -> bool {
        (0..4).all(|t| self.0[t] <= other.0[t])
    }
}

impl fmt::Display for Multidegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0;
        write!(f, "({},{},{},{})", a[0], a[1], a[2], a[3])
    }
}

/// Which swaps `canonical_multidegree` applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Swaps {
    pub x: bool,
    pub y: bool,
}

pub fn canonical_multidegree(a: Multidegree) -> (Multidegree, Swaps) {
    let mut out = a;
    let mut swaps = Swaps::default();
    if out.0[0] < out.0[1] {
        out = out.swap_x();
        swaps.x = true;
    }
    if out.0[2] < out.0[3] {
        out = out.swap_y();
        swaps.y = true;
    }
    (out, swaps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub d1: i64,
    pub d2: i64,
    pub b1: i64,
    pub b2: i64,
    pub modulus: u32,
}

impl EmbeddingSpec {
    pub fn new(d1: i64, d2: i64, b1: i64, b2: i64, modulus: u32) -> Result<Self> {
        if d1 < 1 || d2 < 1 {
            return Err(Error::Usage(format!(
                "D must have positive entries, got ({d1},{d2})"
            )));
        }
        let n = (d1 + 1) * (d2 + 1);
        if n > 64 {
            return Err(Error::Usage(format!(
                "D=({d1},{d2}) has {n} monomials; at most 64 are supported"
            )));
        }
        if !is_odd_prime(modulus) || modulus >= 1 << 31 {
            return Err(Error::Usage(format!(
                "modulus {modulus} is not an odd prime below 2^31"
            )));
        }
        Ok(EmbeddingSpec {
            d1,
            d2,
            b1,
            b2,
            modulus,
        })
    }

    /// Same spec with the default prime.
    pub fn standard(d1: i64, d2: i64, b1: i64, b2: i64) -> Result<Self> {
        Self::new(d1, d2, b1, b2, DEFAULT_PRIME)
    }

    pub fn with_modulus(&self, modulus: u32) -> Result<Self> {
        Self::new(self.d1, self.d2, self.b1, self.b2, modulus)
    }

    pub fn d(&self) -> Bidegree {
        Bidegree::new(self.d1, self.d2)
    }

    pub fn b(&self) -> Bidegree {
        Bidegree::new(self.b1, self.b2)
    }

    /// Number of degree-D monomials, i.e. variables of the ambient ring.
    pub fn n(&self) -> usize {
        ((self.d1 + 1) * (self.d2 + 1)) as usize
    }

    /// S(b;D) has depth 3 exactly when -1 <= b_i < d_i; outside that range rows leave 0..=2.
    pub fn is_cohen_macaulay(&self) -> bool {
        (-1..self.d1).contains(&self.b1) && (-1..self.d2).contains(&self.b2)
    }

    pub fn codim(&self) -> i64 {
        self.n() as i64 - 3
    }

    /// Bidegree k*D + b.
    pub fn degree(&self, k: i64) -> Bidegree {
        Bidegree::new(k * self.d1 + self.b1, k * self.d2 + self.b2)
    }

    /// The antidiagonal index k with bidegree(a) = k*D + b, if any.
    pub fn antidiagonal(&self, a: &Multidegree) -> Option<i64> {
        let bd = a.bidegree();
        let x = bd.e1 - self.b1;
        if x.rem_euclid(self.d1) != 0 {
            return None;
        }
        let k = x / self.d1;
        (k * self.d2 + self.b2 == bd.e2).then_some(k)
    }

    /// Canonical multidegrees (a0 >= a1, a2 >= a3, all nonnegative) of bidegree k*D + b.
    pub fn canonical_multidegrees(&self, k: i64) -> Vec<Multidegree> {
        let bd = self.degree(k);
        if !bd.is_effective() {
            return Vec::new();
        }
        let (x, y) = (bd.e1, bd.e2);
        let mut out = Vec::new();
        for a0 in (x + 1) / 2..=x {
            for a2 in (y + 1) / 2..=y {
                out.push(Multidegree::new(a0, x - a0, a2, y - a2));
            }
        }
        out
    }

    pub fn label(&self) -> String {
        format!("({},{});({},{})", self.b1, self.b2, self.d1, self.d2)
    }
}

impl fmt::Display for EmbeddingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.label(), self.modulus)
    }
}

pub fn is_odd_prime(n: u32) -> bool {
    if n < 3 || n.is_multiple_of(2) {
        return false;
    }
    let n = n as u64;
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// The monomial x0^i x1^(d1-i) y0^j y1^(d2-j) of S_D.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub i: i64,
    pub j: i64,
}

impl Monomial {
    pub fn multidegree(&self, d: Bidegree) -> Multidegree {
        Multidegree::new(self.i, d.e1 - self.i, self.j, d.e2 - self.j)
    }
}

/// Basis of S_D, descending lexicographic in (i, j).
pub fn monomial_basis(d: Bidegree) -> Vec<Monomial> {
    if !d.is_effective() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(((d.e1 + 1) * (d.e2 + 1)) as usize);
    for i in (0..=d.e1).rev() {
        for j in (0..=d.e2).rev() {
            out.push(Monomial { i, j });
        }
    }
    out
}

pub fn strand_bidegree(spec: &EmbeddingSpec, p: i64, q: i64) -> Bidegree {
    spec.degree(p + q)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualMap {
    pub spec: EmbeddingSpec,
    pub dual_spec: EmbeddingSpec,
    /// None when the halves are not integral.
    pub alpha: Option<Multidegree>,
}

impl DualMap {
    pub fn index_map(&self, p: i64, q: i64) -> (i64, i64) {
        (self.spec.codim() - p, 2 - q)
    }
}

pub fn koszul_dual_spec(spec: &EmbeddingSpec) -> DualMap {
    let dual_spec = EmbeddingSpec {
        b1: spec.d1 - spec.b1 - 2,
        b2: spec.d2 - spec.b2 - 2,
        ..*spec
    };
    let n = spec.n() as i64;
    let (x, y) = (n * spec.d1 - 2, n * spec.d2 - 2);
    let alpha = (x % 2 == 0 && y % 2 == 0).then(|| Multidegree::new(x / 2, x / 2, y / 2, y / 2));
    DualMap {
        spec: *spec,
        dual_spec,
        alpha,
    }
}
