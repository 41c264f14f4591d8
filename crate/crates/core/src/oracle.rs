//! Independent checks on the solver: brute-force capacity on a lattice of
//! `Δ_k`, the large-`n` asymptotic expression, and the log-linear fit of
//! capacity against support size.
//!
//! Nothing here touches the location search of [`crate::mdab`]; the lattice
//! oracle only shares the channel model and the plain Blahut–Arimoto
//! iteration.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::ba::{blahut_arimoto, BaOptions};
use crate::channel::{binomial, ChannelSpec, OutcomeTable, TransitionMatrix};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mdab::MdabResult;

pub const GRID_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCapacity {
    pub capacity_nats: f64,
    pub upper_bound_nats: f64,
    pub grid_points: usize,
    pub converged: bool,
}

/// Lattice points of `Δ_k` with spacing `1 / divisions`.
pub fn lattice(k: usize, divisions: u32) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut counts = vec![0u32; k];
    fn rec(rem: u32, slot: usize, counts: &mut [u32], div: u32, out: &mut Vec<Vec<f64>>) {
        if slot + 1 == counts.len() {
            counts[slot] = rem;
            out.push(counts.iter().map(|&c| f64::from(c) / f64::from(div)).collect());
            return;
        }
        for c in (0..=rem).rev() {
            counts[slot] = c;
            rec(rem - c, slot + 1, counts, div, out);
        }
    }
    rec(divisions, 0, &mut counts, divisions, &mut out);
    out
}

/// Capacity of the channel restricted to inputs on the lattice of spacing
/// `resolution`. A lower bound on the true capacity that tightens as the
/// lattice is refined.
pub fn grid_capacity(spec: &ChannelSpec, resolution: f64) -> Result<f64> {
    Ok(grid_capacity_report(spec, resolution, Execution::default())?.capacity_nats)
}

pub fn grid_capacity_report(spec: &ChannelSpec, resolution: f64, execution: Execution) -> Result<GridCapacity> {
    spec.validate()?;
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "resolution must lie in (0, 0.5], got {resolution}"
        )));
    }
    let divisions = (1.0 / resolution).round();
    if (divisions * resolution - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} does not divide 1"
        )));
    }
    let divisions = divisions as u32;
    let size = binomial(u64::from(divisions) + spec.k as u64 - 1, spec.k as u64 - 1).unwrap_or(u128::MAX);
    if size > u128::from(GRID_CAP) {
        return Err(Error::GridTooLarge { size, cap: GRID_CAP });
    }
    let table = OutcomeTable::new(spec)?;
    let points = lattice(spec.k, divisions);
    let rows = execution.map(&points, |x| table.row_probs(x));
    let w = TransitionMatrix::from_rows(rows)?;
    let opts = BaOptions {
        tol: 1e-10,
        ..Default::default()
    };
    let r = blahut_arimoto(&w, &opts);
    Ok(GridCapacity {
        capacity_nats: r.mutual_info_nats,
        upper_bound_nats: r.upper_bound_nats,
        grid_points: points.len(),
        converged: r.converged,
    })
}

/// `(k-1)/2 · ln(n / 2πe) + ln(Γ(1/2)^k / Γ(k/2))` in nats; the large-`n`
/// behaviour of capacity. Not a bound at small `n`.
pub fn asymptotic_capacity(spec: &ChannelSpec) -> f64 {
    let k = spec.k as f64;
    let n = f64::from(spec.n);
    (k - 1.0) / 2.0 * (n / (2.0 * PI * std::f64::consts::E)).ln() + k * ln_gamma(0.5) - ln_gamma(k / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub n: u32,
    pub k: usize,
    pub capacity_bits: f64,
    pub support_m: usize,
}

impl ScalingRecord {
    pub fn from_result(r: &MdabResult) -> Self {
        ScalingRecord {
            n: r.spec.n,
            k: r.spec.k,
            capacity_bits: r.capacity_nats / LN_2,
            support_m: r.support_size_m,
        }
    }

    /// Observed CAIDs always keep the `k` pure letters; fewer atoms than
    /// that is worth a warning.
    pub fn is_suspicious(&self) -> bool {
        self.support_m < self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub rmse: f64,
}

/// Least-squares fit of `capacity_bits` against `log2(support_m)`.
pub fn scaling_fit(records: &[ScalingRecord]) -> Result<ScalingFit> {
    if records.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need at least 3 records, got {}",
            records.len()
        )));
    }
    if records.iter().all(|r| r.support_m == records[0].support_m) {
        return Err(Error::DegenerateFit("all records share the same support size".into()));
    }
    let xs: Vec<f64> = records.iter().map(|r| (r.support_m as f64).log2()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.capacity_bits).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rmse = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / len)
        .sqrt();
    Ok(ScalingFit { slope, intercept, rmse })
}
