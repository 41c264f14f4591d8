//! The multinomial channel: `n` reads drawn from a composite letter
//! `x ∈ Δ_k`, observed as a count vector.
//!
//! Probabilities are computed in the log domain and exponentiated only when
//! a [`TransitionMatrix`] is assembled.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Largest output alphabet we are willing to enumerate.
pub const DEFAULT_OUTCOME_CAP: u64 = 10_000_000;

const SIMPLEX_TOL: f64 = 1e-12;
const ROW_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Number of reads.
    pub n: u32,
    /// Alphabet size.
    pub k: usize,
    /// Total symmetric flip probability of the read process.
    pub flip_eps: f64,
}

impl ChannelSpec {
    pub fn new(n: u32, k: usize, flip_eps: f64) -> Result<Self> {
        let spec = ChannelSpec { n, k, flip_eps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn noiseless(n: u32, k: usize) -> Result<Self> {
        Self::new(n, k, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidChannel("n must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidChannel("k must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.flip_eps) {
            return Err(Error::InvalidChannel(format!(
                "flip_eps must lie in [0, 1), got {}",
                self.flip_eps
            )));
        }
        Ok(())
    }
}

/// A count vector with entries summing to `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Outcome {
    pub counts: Vec<u32>,
}

impl Outcome {
    pub fn new(counts: Vec<u32>) -> Self {
        Outcome { counts }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Counts sorted in descending order; the representative of the
    /// outcome's permutation orbit.
    pub fn sorted_desc(&self) -> Outcome {
        let mut counts = self.counts.clone();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        Outcome { counts }
    }
}

/// A probability vector over the `k` letters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs)?;
        Ok(SimplexPoint(probs))
    }

    /// Rescales nonnegative weights onto the simplex. Useful for locations
    /// printed with rounded coordinates such as `(0.333, 0.333, 0.333, 0)`.
    pub fn normalized(mut probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPoint(format!(
                "negative or non-finite entry in {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidPoint("all entries are zero".into()));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(SimplexPoint(probs))
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        SimplexPoint(probs)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for SimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_simplex(probs: &[f64]) -> Result<()> {
    if probs.len() < 2 {
        return Err(Error::InvalidPoint(format!(
            "need at least 2 coordinates, got {}",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidPoint(format!(
            "negative or non-finite entry in {probs:?}"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidPoint(format!("entries sum to {total}, not 1")));
    }
    Ok(())
}

/// `ln(m!)` via log-gamma.
pub fn ln_factorial(m: u32) -> f64 {
    if m < 2 {
        0.0
    } else {
        ln_gamma(f64::from(m) + 1.0)
    }
}

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, r: u64) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// `|Y_{n,k}| = C(n+k-1, k-1)`.
pub fn outcome_count(n: u32, k: usize) -> Option<u128> {
    binomial(u64::from(n) + k as u64 - 1, k as u64 - 1)
}

/// All count vectors summing to `n` over `k` slots, lexicographically
/// descending.
pub fn enumerate_outcomes(spec: &ChannelSpec) -> Result<Vec<Outcome>> {
    enumerate_outcomes_capped(spec, DEFAULT_OUTCOME_CAP)
}

pub fn enumerate_outcomes_capped(spec: &ChannelSpec, cap: u64) -> Result<Vec<Outcome>> {
    spec.validate()?;
    let size = outcome_count(spec.n, spec.k).unwrap_or(u128::MAX);
    if size > u128::from(cap) {
        return Err(Error::AlphabetTooLarge { size, cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut counts = vec![0u32; spec.k];
    fill_compositions(spec.n, 0, &mut counts, &mut out);
    Ok(out)
}

fn fill_compositions(remaining: u32, slot: usize, counts: &mut [u32], out: &mut Vec<Outcome>) {
    if slot + 1 == counts.len() {
        counts[slot] = remaining;
        out.push(Outcome::new(counts.to_vec()));
        return;
    }
    for c in (0..=remaining).rev() {
        counts[slot] = c;
        fill_compositions(remaining - c, slot + 1, counts, out);
    }
    counts[slot] = 0;
}

/// `ln P(y | x)` for the multinomial channel with `n = Σ y`.
///
/// Uses `0^0 = 1`. Returns `-inf` when a letter with zero probability is
/// observed. The per-letter terms are summed in sorted order so the value is
/// bit-identical under any joint permutation of `x` and `y`.
pub fn log_pmf(x: &SimplexPoint, y: &Outcome) -> f64 {
    debug_assert_eq!(x.k(), y.counts.len());
    let mut terms = Vec::with_capacity(y.counts.len());
    for (&p, &c) in x.as_slice().iter().zip(&y.counts) {
        if c == 0 {
            continue;
        }
        if p == 0.0 {
            return f64::NEG_INFINITY;
        }
        terms.push(f64::from(c) * p.ln() - ln_factorial(c));
    }
    terms.sort_by(f64::total_cmp);
    ln_factorial(y.total()) + terms.iter().sum::<f64>()
}

/// Effective input after a symmetric read error that moves a letter to each
/// of the other `k - 1` letters with probability `eps / (k - 1)`.
pub fn apply_noise(x: &SimplexPoint, flip_eps: f64) -> SimplexPoint {
    SimplexPoint(apply_noise_slice(x.as_slice(), flip_eps))
}

pub(crate) fn apply_noise_slice(x: &[f64], flip_eps: f64) -> Vec<f64> {
    if flip_eps == 0.0 {
        return x.to_vec();
    }
    let spread = flip_eps / (x.len() - 1) as f64;
    x.iter().map(|&p| p * (1.0 - flip_eps) + spread * (1.0 - p)).collect()
}

/// Row-stochastic matrix from input atoms to outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::InvalidArgument(
                "transition matrix needs at least one row".into(),
            ));
        }
        let ncols = rows[0].len();
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} columns, expected {ncols}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!("row {i} sums to {s}")));
            }
            data.extend(row);
        }
        Ok(TransitionMatrix { nrows, ncols, data })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols)
    }
}

/// Rows `exp(log_pmf(apply_noise(location), y))` over the canonical outcome
/// order.
pub fn transition_matrix(locations: &[SimplexPoint], spec: &ChannelSpec) -> Result<TransitionMatrix> {
    let table = OutcomeTable::new(spec)?;
    let rows = locations
        .iter()
        .map(|x| {
            if x.k() != spec.k {
                return Err(Error::InvalidPoint(format!(
                    "location has {} coordinates, expected {}",
                    x.k(),
                    spec.k
                )));
            }
            Ok(table.row_probs(x.as_slice()))
        })
        .collect::<Result<Vec<_>>>()?;
    TransitionMatrix::from_rows(rows)
}

/// Precomputed outcome alphabet for a channel: canonical enumeration, log
/// multinomial coefficients and the grouping of outcomes into permutation
/// orbits.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    spec: ChannelSpec,
    outcomes: Vec<Outcome>,
    log_coef: Vec<f64>,
    /// Nonzero (letter, count) pairs per outcome.
    support: Vec<Vec<(usize, f64)>>,
    orbit_of: Vec<usize>,
    orbit_sizes: Vec<usize>,
    orbit_reps: Vec<Outcome>,
}

impl OutcomeTable {
    pub fn new(spec: &ChannelSpec) -> Result<Self> {
        let outcomes = enumerate_outcomes(spec)?;
        let ln_n = ln_factorial(spec.n);
        let log_coef = outcomes
            .iter()
            .map(|y| ln_n - y.counts.iter().map(|&c| ln_factorial(c)).sum::<f64>())
            .collect();
        let support = outcomes
            .iter()
            .map(|y| {
                y.counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(j, &c)| (j, f64::from(c)))
                    .collect()
            })
            .collect();
        let mut index: HashMap<Outcome, usize> = HashMap::new();
        let mut orbit_of = Vec::with_capacity(outcomes.len());
        let mut orbit_sizes = Vec::new();
        let mut orbit_reps = Vec::new();
        for y in &outcomes {
            let rep = y.sorted_desc();
            let id = *index.entry(rep.clone()).or_insert_with(|| {
                orbit_sizes.push(0);
                orbit_reps.push(rep);
                orbit_sizes.len() - 1
            });
            orbit_sizes[id] += 1;
            orbit_of.push(id);
        }
        Ok(OutcomeTable {
            spec: *spec,
            outcomes,
            log_coef,
            support,
            orbit_of,
            orbit_sizes,
            orbit_reps,
        })
    }

    pub fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// Orbit index of every outcome.
    pub fn orbit_of(&self) -> &[usize] {
        &self.orbit_of
    }

    pub fn orbit_sizes(&self) -> &[usize] {
        &self.orbit_sizes
    }

    pub fn orbit_reps(&self) -> &[Outcome] {
        &self.orbit_reps
    }

    pub fn num_orbits(&self) -> usize {
        self.orbit_sizes.len()
    }

    /// Log-probabilities of every outcome for input `x` (noise applied).
    pub fn row_log_probs_into(&self, x: &[f64], out: &mut Vec<f64>) {
        let eff = apply_noise_slice(x, self.spec.flip_eps);
        let ln_x: Vec<f64> = eff.iter().map(|p| p.ln()).collect();
        out.clear();
        out.extend(self.support.iter().zip(&self.log_coef).map(|(sup, &coef)| {
            let mut acc = coef;
            for &(j, c) in sup {
                if eff[j] == 0.0 {
                    return f64::NEG_INFINITY;
                }
                acc += c * ln_x[j];
            }
            acc
        }));
    }

    pub fn row_probs(&self, x: &[f64]) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.len());
        self.row_log_probs_into(x, &mut row);
        row.iter_mut().for_each(|v| *v = v.exp());
        row
    }
}
