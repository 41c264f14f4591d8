//! Geometry of the probability simplex `Δ_k` and the ordered simplex
//! `Δ≥_k` (coordinates sorted nonincreasing), which holds one
//! representative of every permutation orbit.

use serde::{Deserialize, Serialize};

use crate::channel::{check_simplex, SimplexPoint};
use crate::error::{Error, Result};
use crate::lowdisc::Halton;

/// L∞ distance under which two locations are the same atom.
pub const DEDUP_TOL: f64 = 1e-9;

/// Coordinates closer than this are snapped together on canonicalization so
/// that exact ties (and hence permutation counts) survive rounding.
const TIE_TOL: f64 = 1e-12;

const WEIGHT_SUM_TOL: f64 = 1e-10;

/// A point of `Δ≥_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedSimplexPoint(Vec<f64>);

impl OrderedSimplexPoint {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs)?;
        if probs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPoint(format!(
                "coordinates are not nonincreasing: {probs:?}"
            )));
        }
        Ok(OrderedSimplexPoint(probs))
    }

    /// Sorts descending, clamps tiny negatives, snaps near-ties and
    /// renormalizes unless the sum is already 1 up to rounding.
    pub fn canonicalize(probs: &[f64]) -> Self {
        let mut v: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let mut start = 0;
        while start < v.len() {
            let mut end = start + 1;
            while end < v.len() && v[start] - v[end] <= TIE_TOL {
                end += 1;
            }
            if end - start > 1 {
                let mean = v[start..end].iter().sum::<f64>() / (end - start) as f64;
                v[start..end].iter_mut().for_each(|p| *p = mean);
            }
            start = end;
        }
        if let Some(last) = v.iter().rposition(|&p| p > TIE_TOL) {
            v[last + 1..].iter_mut().for_each(|p| *p = 0.0);
        }
        let total: f64 = v.iter().sum();
        if total > 0.0 && (total - 1.0).abs() > v.len() as f64 * f64::EPSILON {
            v.iter_mut().for_each(|p| *p /= total);
        }
        OrderedSimplexPoint(v)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_simplex_point(&self) -> SimplexPoint {
        SimplexPoint::from_vec_unchecked(self.0.clone())
    }

    /// Coordinates in the basis of [`ordered_vertices`]:
    /// `λ_j = j (x_j - x_{j+1})`, summing to one.
    pub fn barycentric(&self) -> Vec<f64> {
        let k = self.0.len();
        (0..k)
            .map(|j| {
                let next = if j + 1 < k { self.0[j + 1] } else { 0.0 };
                ((j + 1) as f64 * (self.0[j] - next)).max(0.0)
            })
            .collect()
    }

    /// Inverse of [`barycentric`](Self::barycentric). The suffix-sum form
    /// keeps the coordinates exactly nonincreasing.
    pub fn from_barycentric(lambda: &[f64]) -> Self {
        let k = lambda.len();
        let mut x = vec![0.0; k];
        let mut acc = 0.0;
        for j in (0..k).rev() {
            acc += lambda[j].max(0.0) / (j + 1) as f64;
            x[j] = acc;
        }
        Self::canonicalize(&x)
    }

    /// Number of distinct coordinate permutations, `k! / Π m_i!`.
    pub fn permutation_count(&self) -> u64 {
        let k = self.0.len() as u64;
        let mut count: u64 = (1..=k).product();
        let mut i = 0;
        while i < self.0.len() {
            let mut j = i + 1;
            while j < self.0.len() && self.0[j] == self.0[i] {
                j += 1;
            }
            count /= (1..=(j - i) as u64).product::<u64>();
            i = j;
        }
        count
    }

    /// All distinct permutations of the coordinates, lexicographically
    /// descending (the point itself comes first).
    pub fn distinct_permutations(&self) -> Vec<Vec<f64>> {
        let mut cur = self.0.clone();
        let mut out = vec![cur.clone()];
        while prev_permutation(&mut cur) {
            out.push(cur.clone());
        }
        out
    }
}

impl AsRef<[f64]> for OrderedSimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Steps to the lexicographically previous permutation; false when `v` is
/// already ascending.
fn prev_permutation(v: &mut [f64]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] <= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] >= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: SimplexPoint,
    pub weight: f64,
}

/// A finitely supported input distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicDistribution {
    atoms: Vec<Atom>,
}

impl AtomicDistribution {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("distribution has no atoms".into()));
        }
        if atoms.iter().any(|a| a.weight.is_nan() || a.weight < 0.0) {
            return Err(Error::InvalidArgument("negative weight".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {total}")));
        }
        for (i, a) in atoms.iter().enumerate() {
            for b in &atoms[..i] {
                if linf(a.location.as_slice(), b.location.as_slice()) <= DEDUP_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate location {:?}",
                        a.location.as_slice()
                    )));
                }
            }
        }
        Ok(AtomicDistribution { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn locations(&self) -> Vec<SimplexPoint> {
        self.atoms.iter().map(|a| a.location.clone()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The `k` vertices of `Δ≥_k`: uniform mixtures of the first `j` letters.
pub fn ordered_vertices(k: usize) -> Vec<OrderedSimplexPoint> {
    (1..=k)
        .map(|j| {
            let mut v = vec![0.0; k];
            v[..j].iter_mut().for_each(|p| *p = 1.0 / j as f64);
            OrderedSimplexPoint(v)
        })
        .collect()
}

/// Canonical orbit representatives of `points`, in order of first
/// appearance.
pub fn reduce_to_ordered<P: AsRef<[f64]>>(points: &[P]) -> Vec<OrderedSimplexPoint> {
    let mut out: Vec<OrderedSimplexPoint> = Vec::new();
    for p in points {
        let q = OrderedSimplexPoint::canonicalize(p.as_ref());
        if !out.iter().any(|o| linf(o.as_slice(), q.as_slice()) <= DEDUP_TOL) {
            out.push(q);
        }
    }
    out
}

/// Spreads each ordered atom's weight evenly over its distinct
/// permutations, giving a permutation-invariant distribution on `Δ_k`.
pub fn expand(ordered: &[(OrderedSimplexPoint, f64)]) -> Result<AtomicDistribution> {
    let mut atoms = Vec::new();
    for (point, weight) in ordered {
        let perms = point.distinct_permutations();
        let each = weight / perms.len() as f64;
        atoms.extend(perms.into_iter().map(|p| Atom {
            location: SimplexPoint::from_vec_unchecked(p),
            weight: each,
        }));
    }
    AtomicDistribution::new(atoms)
}

/// `D(p || q)` in nats with `0 log 0 = 0`; `+inf` if `p` is not absolutely
/// continuous with respect to `q`.
pub fn kl_point(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    acc.max(0.0)
}

/// Deterministic low-discrepancy points of `Δ≥_k`: Halton points of the
/// unit cube mapped onto `Δ_k` by sorted spacings, then sorted descending.
pub fn sample_ordered(count: usize, k: usize, seed: u64) -> Vec<OrderedSimplexPoint> {
    let mut seq = Halton::new(k - 1, seed);
    (0..count)
        .map(|_| {
            let mut u = seq.next_point();
            u.sort_by(f64::total_cmp);
            let mut prev = 0.0;
            let mut x = Vec::with_capacity(k);
            for &c in &u {
                x.push(c - prev);
                prev = c;
            }
            x.push(1.0 - prev);
            OrderedSimplexPoint::canonicalize(&x)
        })
        .collect()
}
