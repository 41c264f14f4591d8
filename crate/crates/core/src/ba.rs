//! Blahut–Arimoto weight optimization over a fixed set of input atoms.
//!
//! The solver works on any row-stochastic matrix `V` together with an
//! optional per-row offset `c_i`, maximizing `Σ_i w_i (D(V_i || wV) + c_i)`.
//! With `c = 0` this is the classical capacity iteration; the offsets let
//! [`crate::orbit`] run the same iteration on a symmetry-reduced channel.

use serde::{Deserialize, Serialize};

use crate::channel::TransitionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaOptions {
    /// Stop once `max_i D_i - I < tol` (nats).
    pub tol: f64,
    pub max_iter: usize,
    /// Keep iterating until the lower bound reaches this value as well.
    #[serde(default)]
    pub floor: Option<f64>,
    /// Record the lower bound after every iteration.
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for BaOptions {
    fn default() -> Self {
        BaOptions {
            tol: 1e-9,
            max_iter: 100_000,
            floor: None,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaResult {
    pub weights: Vec<f64>,
    /// Lower bound `I(X;Y)` at the returned weights, nats.
    pub mutual_info_nats: f64,
    /// `max_i D(W_i || P_Y)` at the returned weights, nats.
    pub upper_bound_nats: f64,
    pub output_dist: Vec<f64>,
    /// Per-atom divergence `D(W_i || P_Y)` (plus offset).
    pub divergences: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

impl BaResult {
    pub fn gap(&self) -> f64 {
        self.upper_bound_nats - self.mutual_info_nats
    }
}

/// Dense channel with per-row offsets, ready for iteration.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
    /// `Σ_j V_ij ln V_ij + c_i`.
    neg_entropy: Vec<f64>,
}

impl Kernel {
    pub(crate) fn new(nrows: usize, ncols: usize, data: Vec<f64>, offsets: Option<&[f64]>) -> Self {
        debug_assert_eq!(data.len(), nrows * ncols);
        let neg_entropy = data
            .chunks_exact(ncols)
            .enumerate()
            .map(|(i, row)| {
                let h: f64 = row.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum();
                h + offsets.map_or(0.0, |c| c[i])
            })
            .collect();
        Kernel {
            nrows,
            ncols,
            data,
            neg_entropy,
        }
    }

    /// Builds the kernel from rows and precomputed `Σ_j V_ij ln V_ij + c_i`.
    pub(crate) fn with_neg_entropy(nrows: usize, ncols: usize, data: Vec<f64>, neg_entropy: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), nrows * ncols);
        debug_assert_eq!(neg_entropy.len(), nrows);
        Kernel {
            nrows,
            ncols,
            data,
            neg_entropy,
        }
    }

    pub(crate) fn from_matrix(w: &TransitionMatrix) -> Self {
        let data = w.rows().flat_map(|r| r.iter().copied()).collect();
        Kernel::new(w.nrows(), w.ncols(), data, None)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub(crate) fn output(&self, weights: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(self.row(i)) {
                *o += w * v;
            }
        }
    }

    /// Divergence of every row against the output law `r`.
    pub(crate) fn divergences(&self, r: &[f64], ln_r: &mut [f64], out: &mut [f64]) {
        for (l, &p) in ln_r.iter_mut().zip(r) {
            *l = p.max(f64::MIN_POSITIVE).ln();
        }
        for (i, d) in out.iter_mut().enumerate() {
            let cross: f64 = self
                .row(i)
                .iter()
                .zip(ln_r.iter())
                .filter(|(&v, _)| v > 0.0)
                .map(|(&v, &l)| v * l)
                .sum();
            *d = self.neg_entropy[i] - cross;
        }
    }

    pub(crate) fn run(&self, init: &[f64], opts: &BaOptions) -> BaResult {
        assert_eq!(
            init.len(),
            self.nrows,
            "initial weights do not match the number of atoms"
        );
        let total: f64 = init.iter().sum();
        let mut w: Vec<f64> = init.iter().map(|v| v / total).collect();
        let mut r = vec![0.0; self.ncols];
        let mut ln_r = vec![0.0; self.ncols];
        let mut d = vec![0.0; self.nrows];
        let mut trace = Vec::new();
        let mut iterations = 0;
        loop {
            self.output(&w, &mut r);
            self.divergences(&r, &mut ln_r, &mut d);
            let lower: f64 = w.iter().zip(&d).map(|(a, b)| if *a > 0.0 { a * b } else { 0.0 }).sum();
            let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if opts.record_trace {
                trace.push(lower);
            }
            let done = upper - lower < opts.tol && opts.floor.is_none_or(|f| lower >= f);
            if done || iterations >= opts.max_iter {
                return BaResult {
                    weights: w,
                    mutual_info_nats: lower,
                    upper_bound_nats: upper,
                    output_dist: r,
                    divergences: d,
                    iterations,
                    converged: done,
                    trace,
                };
            }
            for (wi, di) in w.iter_mut().zip(&d) {
                *wi *= (di - upper).exp();
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            iterations += 1;
        }
    }
}

/// Classical Blahut–Arimoto from uniform weights.
pub fn blahut_arimoto(w: &TransitionMatrix, opts: &BaOptions) -> BaResult {
    let init = vec![1.0 / w.nrows() as f64; w.nrows()];
    blahut_arimoto_from(w, &init, opts)
}

/// Blahut–Arimoto warm-started from `init` (rescaled to sum to one).
pub fn blahut_arimoto_from(w: &TransitionMatrix, init: &[f64], opts: &BaOptions) -> BaResult {
    Kernel::from_matrix(w).run(init, opts)
}

/// `I(X;Y) = Σ_i w_i Σ_y W_iy ln(W_iy / P_Y(y))` in nats.
pub fn mutual_information(weights: &[f64], w: &TransitionMatrix) -> f64 {
    let mut py = vec![0.0; w.ncols()];
    for (row, &p) in w.rows().zip(weights) {
        for (o, &v) in py.iter_mut().zip(row) {
            *o += p * v;
        }
    }
    w.rows()
        .zip(weights)
        .filter(|(_, &p)| p > 0.0)
        .map(|(row, &p)| {
            p * row
                .iter()
                .zip(&py)
                .filter(|(&v, _)| v > 0.0)
                .map(|(&v, &q)| v * (v / q).ln())
                .sum::<f64>()
        })
        .sum()
}
