//! The dual side of the capacity problem: for a fixed output law `P_Y`,
//! `x ↦ D(P_{Y|X=x} || P_Y)` upper-bounds capacity at its maximum.
//!
//! The maximum is searched on the ordered simplex only (the objective is
//! permutation invariant whenever `P_Y` is). Points are parameterized by
//! their barycentric coordinates `λ` over [`ordered_vertices`]; a face of
//! `Δ≥_k` is a subset of vertices, and the relative interior of a face is
//! reached through a softmax of `|face| - 1` free logits. Every start runs a
//! Nelder–Mead search on its own face; optima that land within `face_tol`
//! of a lower-dimensional face are re-searched on that face.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSpec, OutcomeTable};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nelder_mead::NelderMead;
use crate::simplex::{ordered_vertices, sample_ordered, OrderedSimplexPoint};

/// Minimum barycentric weight for a vertex to count as part of a start's face.
const FACE_MEMBER_TOL: f64 = 1e-12;

/// A face optimum within this of its interior parent replaces it.
const FACE_SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualConfig {
    /// Low-discrepancy starts; `None` means `64 (k - 1)`.
    pub starts: Option<usize>,
    pub seed: u64,
    /// Objective tolerance of the local maximizer (nats).
    pub local_tol: f64,
    /// Barycentric weight under which a vertex is dropped for a face search.
    pub face_tol: f64,
    pub max_evals: usize,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig {
            starts: None,
            seed: 0,
            local_tol: 1e-10,
            face_tol: 1e-6,
            max_evals: 4000,
            execution: Execution::default(),
        }
    }
}

impl DualConfig {
    pub fn starts_for(&self, k: usize) -> usize {
        self.starts.unwrap_or(64 * (k - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalOptimum {
    pub point: OrderedSimplexPoint,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub max_divergence_nats: f64,
    pub maximizer: OrderedSimplexPoint,
    pub starts_used: usize,
    pub local_optima: Vec<LocalOptimum>,
}

/// `x ↦ D(P_{Y|X=x} || P_Y)` for a fixed `P_Y` over the canonical outcome
/// order.
#[derive(Debug, Clone)]
pub struct DivergenceObjective<'t> {
    table: &'t OutcomeTable,
    log_py: Vec<f64>,
}

impl<'t> DivergenceObjective<'t> {
    pub fn new(table: &'t OutcomeTable, p_y: &[f64]) -> Result<Self> {
        if p_y.len() != table.len() {
            return Err(Error::InvalidArgument(format!(
                "output law has {} entries, alphabet has {}",
                p_y.len(),
                table.len()
            )));
        }
        let log_py = p_y
            .iter()
            .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok(DivergenceObjective { table, log_py })
    }

    pub fn table(&self) -> &'t OutcomeTable {
        self.table
    }

    /// Divergence in nats; `+inf` when `x` reaches an outcome `P_Y` misses.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut logs = Vec::with_capacity(self.table.len());
        self.table.row_log_probs_into(x, &mut logs);
        let mut acc = 0.0;
        for (&l, &q) in logs.iter().zip(&self.log_py) {
            if l == f64::NEG_INFINITY {
                continue;
            }
            if q == f64::NEG_INFINITY {
                return f64::INFINITY;
            }
            acc += l.exp() * (l - q);
        }
        acc
    }
}

/// `D(P_{Y|X=x} || P_Y)` in nats.
pub fn divergence_objective(x: &[f64], p_y: &[f64], spec: &ChannelSpec) -> Result<f64> {
    let table = OutcomeTable::new(spec)?;
    Ok(DivergenceObjective::new(&table, p_y)?.eval(x))
}

/// Global maximization of the divergence over `Δ≥_k`.
pub fn maximize_divergence(p_y: &[f64], spec: &ChannelSpec, config: &DualConfig) -> Result<DualReport> {
    let table = OutcomeTable::new(spec)?;
    let objective = DivergenceObjective::new(&table, p_y)?;
    maximize(&objective, &[], config)
}

/// As [`maximize_divergence`], with extra warm starts (typically the current
/// atoms) and a prebuilt objective.
pub fn maximize(
    objective: &DivergenceObjective<'_>,
    warm_starts: &[OrderedSimplexPoint],
    config: &DualConfig,
) -> Result<DualReport> {
    let k = objective.table().spec().k;
    let vertices = ordered_vertices(k);
    for v in &vertices {
        if objective.eval(v.as_slice()) == f64::INFINITY {
            return Err(Error::DegenerateObjective {
                witness: v.as_slice().to_vec(),
            });
        }
    }

    let mut starts: Vec<Vec<f64>> = vertices.iter().map(|v| v.barycentric()).collect();
    starts.extend(warm_starts.iter().map(|a| a.barycentric()));
    starts.extend(
        sample_ordered(config.starts_for(k), k, config.seed)
            .iter()
            .map(|p| p.barycentric()),
    );

    let search = LocalSearch { objective, config };
    let local_optima: Vec<LocalOptimum> = config.execution.map(&starts, |lam| search.run(lam));

    if let Some(bad) = local_optima.iter().find(|o| o.value == f64::INFINITY) {
        return Err(Error::DegenerateObjective {
            witness: bad.point.as_slice().to_vec(),
        });
    }

    let mut best = &local_optima[0];
    for cand in &local_optima[1..] {
        let better = cand.value > best.value
            || (cand.value == best.value && lex_greater(cand.point.as_slice(), best.point.as_slice()));
        if better {
            best = cand;
        }
    }
    Ok(DualReport {
        max_divergence_nats: best.value,
        maximizer: best.point.clone(),
        starts_used: starts.len(),
        local_optima: local_optima.clone(),
    })
}

fn lex_greater(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Greater => return true,
            std::cmp::Ordering::Less => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

struct LocalSearch<'a, 't> {
    objective: &'a DivergenceObjective<'t>,
    config: &'a DualConfig,
}

impl LocalSearch<'_, '_> {
    fn run(&self, lambda: &[f64]) -> LocalOptimum {
        let start = OrderedSimplexPoint::from_barycentric(lambda);
        let start = LocalOptimum {
            value: self.objective.eval(start.as_slice()),
            point: start,
        };
        let found = self.descend(lambda);
        if found.value >= start.value {
            found
        } else {
            start
        }
    }

    fn descend(&self, lambda: &[f64]) -> LocalOptimum {
        let face: Vec<usize> = (0..lambda.len()).filter(|&j| lambda[j] > FACE_MEMBER_TOL).collect();
        let mut cur = self.on_face(&face, lambda);
        let mut face = face;
        loop {
            let lam = cur.point.barycentric();
            let inner: Vec<usize> = face
                .iter()
                .copied()
                .filter(|&j| lam[j] >= self.config.face_tol)
                .collect();
            if inner.len() == face.len() || inner.is_empty() {
                return cur;
            }
            let sub = self.on_face(&inner, &lam);
            if sub.value >= cur.value - FACE_SNAP_TOL {
                cur = sub;
                face = inner;
            } else {
                return cur;
            }
        }
    }

    /// Maximizes over the relative interior of `face`, starting from the
    /// restriction of `lambda`.
    fn on_face(&self, face: &[usize], lambda: &[f64]) -> LocalOptimum {
        let k = lambda.len();
        let point_of = |z: &[f64]| -> OrderedSimplexPoint {
            let mut lam = vec![0.0; k];
            let m = z.iter().copied().fold(0.0, f64::max);
            let mut total = (-m).exp();
            lam[*face.last().unwrap()] = (-m).exp();
            for (&j, &zj) in face.iter().zip(z) {
                let e = (zj - m).exp();
                lam[j] = e;
                total += e;
            }
            lam.iter_mut().for_each(|l| *l /= total);
            OrderedSimplexPoint::from_barycentric(&lam)
        };
        let last = lambda[*face.last().unwrap()].max(f64::MIN_POSITIVE).ln();
        let z0: Vec<f64> = face[..face.len() - 1]
            .iter()
            .map(|&j| lambda[j].max(f64::MIN_POSITIVE).ln() - last)
            .collect();
        let nm = NelderMead {
            ftol: self.config.local_tol,
            max_evals: self.config.max_evals,
            ..Default::default()
        };
        let min = nm.minimize(|z| -self.objective.eval(point_of(z).as_slice()), &z0);
        let point = point_of(&min.x);
        let value = self.objective.eval(point.as_slice());
        LocalOptimum { point, value }
    }
}
