//! Multidimensional dynamic-assignment Blahut–Arimoto.
//!
//! The input law is kept as a list of atoms on the ordered simplex, each
//! standing for the uniform mixture over its distinct coordinate
//! permutations. Every outer iteration optimizes the weights with
//! Blahut–Arimoto, locates the dual maximizer `x_max`, and then either adds
//! the ordered-simplex vertex nearest to `x_max` or slides the nearest atom
//! towards `x_max` by a line search on the mutual information. Distances
//! are KL divergences `D(atom || x_max)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ba::{BaOptions, BaResult};
use crate::channel::{ChannelSpec, OutcomeTable};
use crate::dual::{maximize, DivergenceObjective, DualConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::orbit::OrbitChannel;
use crate::simplex::{
    expand, kl_point, linf, ordered_vertices, reduce_to_ordered, AtomicDistribution, OrderedSimplexPoint, DEDUP_TOL,
};

/// A vertex within this L∞ distance of an atom is considered present.
const VERTEX_PRESENT_TOL: f64 = 1e-6;
/// Line-search gains below this count towards a stall.
const STALL_GAIN: f64 = 1e-13;
const STALL_LIMIT: usize = 3;
/// Slack allowed in the monotonicity of the primal value.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchConfig {
    pub grid_points: usize,
    pub refine_tol: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            grid_points: 32,
            refine_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdabConfig {
    /// Stop once dual minus primal is at most this (nats).
    pub eps_gap: f64,
    pub max_outer_iter: usize,
    pub line_search: LineSearchConfig,
    pub dual: DualConfig,
    /// Atoms lighter than this are dropped once the gap closes.
    pub prune_weight: f64,
    pub ba: BaOptions,
    /// Tolerance of the Blahut–Arimoto run that settles the final weights.
    pub polish_tol: f64,
    pub polish_max_iter: usize,
    /// Initial weight handed to a newly added vertex.
    pub new_atom_weight: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for MdabConfig {
    fn default() -> Self {
        MdabConfig {
            eps_gap: 1e-4,
            max_outer_iter: 1000,
            line_search: LineSearchConfig::default(),
            dual: DualConfig::default(),
            prune_weight: 1e-7,
            ba: BaOptions::default(),
            polish_tol: 1e-12,
            polish_max_iter: 1_000_000,
            new_atom_weight: 1e-2,
            execution: Execution::default(),
        }
    }
}

impl MdabConfig {
    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self.dual.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_gap.is_nan() || self.eps_gap <= 0.0 {
            return Err(Error::InvalidArgument("eps_gap must be positive".into()));
        }
        if self.line_search.grid_points < 2 {
            return Err(Error::InvalidArgument(
                "line search needs at least 2 grid points".into(),
            ));
        }
        let positive = |t: f64| t > 0.0;
        if !positive(self.line_search.refine_tol) || !positive(self.ba.tol) || !positive(self.polish_tol) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.new_atom_weight) || self.new_atom_weight == 0.0 {
            return Err(Error::InvalidArgument("new_atom_weight must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    AddVertex,
    MoveAtom,
    /// A copy of the nearest atom was moved, the original stayed.
    SplitAtom,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub mutual_info_nats: f64,
    pub dual_nats: f64,
    pub action: Action,
    /// Added vertex or new location of the moved atom.
    pub point: Option<Vec<f64>>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdabStatus {
    Converged,
    IterationLimit,
    Stalled,
}

impl fmt::Display for MdabStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MdabStatus::Converged => "converged",
            MdabStatus::IterationLimit => "iteration limit",
            MdabStatus::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdabResult {
    pub spec: ChannelSpec,
    pub status: MdabStatus,
    /// Full permutation-invariant input law.
    pub caid: AtomicDistribution,
    /// Orbit representatives with the total weight of each orbit.
    pub ordered_atoms: Vec<(OrderedSimplexPoint, f64)>,
    pub capacity_nats: f64,
    pub dual_bound_nats: f64,
    pub gap_nats: f64,
    pub maximizer: OrderedSimplexPoint,
    pub support_size_m: usize,
    pub trace: Vec<TraceRecord>,
}

impl MdabResult {
    pub fn capacity_bits(&self) -> f64 {
        self.capacity_nats / std::f64::consts::LN_2
    }

    pub fn adds(&self) -> usize {
        self.trace.iter().filter(|t| t.action == Action::AddVertex).count()
    }

    pub fn moves(&self) -> usize {
        self.trace
            .iter()
            .filter(|t| matches!(t.action, Action::MoveAtom | Action::SplitAtom))
            .count()
    }

    pub fn is_converged(&self) -> bool {
        self.status == MdabStatus::Converged
    }
}

/// Per-atom displacement that is zero everywhere except at `closest`, where
/// it points from that atom to `x_max`.
pub fn create_direction_vector(
    atoms: &[OrderedSimplexPoint],
    closest: usize,
    x_max: &OrderedSimplexPoint,
) -> Vec<Vec<f64>> {
    atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if i == closest {
                x_max.as_slice().iter().zip(a.as_slice()).map(|(m, c)| m - c).collect()
            } else {
                vec![0.0; a.k()]
            }
        })
        .collect()
}

/// Index and value of the smallest entry, first one on ties.
fn argmin(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values.enumerate().fold(
        (0, f64::INFINITY),
        |best, (i, v)| if v < best.1 { (i, v) } else { best },
    )
}

struct State<'t> {
    channel: OrbitChannel<'t>,
    weights: Vec<f64>,
}

struct Candidate<'t> {
    step: f64,
    channel: OrbitChannel<'t>,
    ba: BaResult,
}

struct Solver<'t, 'c> {
    table: &'t OutcomeTable,
    cfg: &'c MdabConfig,
}

impl<'t> Solver<'t, '_> {
    fn dual(&self, channel: &OrbitChannel<'t>, ba: &BaResult) -> Result<(f64, OrderedSimplexPoint)> {
        let py = channel.full_output(&ba.output_dist);
        let objective = DivergenceObjective::new(self.table, &py)?;
        match maximize(&objective, channel.atoms(), &self.cfg.dual) {
            Ok(report) => Ok((report.max_divergence_nats, report.maximizer)),
            Err(Error::DegenerateObjective { witness }) => {
                Ok((f64::INFINITY, OrderedSimplexPoint::canonicalize(&witness)))
            }
            Err(e) => Err(e),
        }
    }

    fn evaluate_step(&self, state: &State<'t>, index: usize, direction: &[f64], step: f64) -> Candidate<'t> {
        let origin = state.channel.atoms()[index].as_slice();
        let moved: Vec<f64> = origin.iter().zip(direction).map(|(x, g)| x + step * g).collect();
        let channel = state
            .channel
            .with_replaced(index, OrderedSimplexPoint::canonicalize(&moved));
        let ba = channel.blahut_arimoto(&state.weights, &self.cfg.ba);
        Candidate { step, channel, ba }
    }

    /// Grid search over `δ ∈ [0, 1]` followed by golden-section refinement
    /// around the best grid point.
    fn line_search(&self, state: &State<'t>, index: usize, direction: &[f64]) -> Candidate<'t> {
        let g = self.cfg.line_search.grid_points;
        let steps: Vec<f64> = (0..g).map(|i| i as f64 / (g - 1) as f64).collect();
        let grid: Vec<Candidate<'t>> = self
            .cfg
            .execution
            .map(&steps, |&s| self.evaluate_step(state, index, direction, s));
        let (best_i, _) = argmin(grid.iter().map(|c| -c.ba.mutual_info_nats));
        let mut lo = steps[best_i.saturating_sub(1)];
        let mut hi = steps[(best_i + 1).min(g - 1)];
        let mut best = grid.into_iter().nth(best_i).unwrap();

        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let mut a = hi - INV_PHI * (hi - lo);
        let mut b = lo + INV_PHI * (hi - lo);
        let mut fa = self.evaluate_step(state, index, direction, a);
        let mut fb = self.evaluate_step(state, index, direction, b);
        while hi - lo > self.cfg.line_search.refine_tol {
            if fa.ba.mutual_info_nats >= fb.ba.mutual_info_nats {
                hi = b;
                b = a;
                let new = self.evaluate_step(state, index, direction, hi - INV_PHI * (hi - lo));
                a = new.step;
                fb = std::mem::replace(&mut fa, new);
            } else {
                lo = a;
                a = b;
                let new = self.evaluate_step(state, index, direction, lo + INV_PHI * (hi - lo));
                b = new.step;
                fa = std::mem::replace(&mut fb, new);
            }
        }
        for c in [fa, fb] {
            if c.ba.mutual_info_nats > best.ba.mutual_info_nats {
                best = c;
            }
        }
        best
    }

    /// Prunes light atoms and settles the weights of the rest with a tight
    /// Blahut–Arimoto run, repeating until no atom is pruned.
    fn polish(&self, state: &mut State<'t>) -> BaResult {
        let opts = BaOptions {
            tol: self.cfg.polish_tol,
            max_iter: self.cfg.polish_max_iter,
            floor: None,
            record_trace: false,
        };
        loop {
            let ba = state.channel.blahut_arimoto(&state.weights, &opts);
            state.weights = ba.weights.clone();
            let keep: Vec<bool> = state.weights.iter().map(|&w| w >= self.cfg.prune_weight).collect();
            if keep.iter().all(|&k| k) || !keep.iter().any(|&k| k) {
                return ba;
            }
            state.channel.retain_indices(&keep);
            let mut it = keep.iter();
            state.weights.retain(|_| *it.next().unwrap());
        }
    }
}

/// Runs M-DAB from the given initial locations.
///
/// Non-convergence is reported through [`MdabResult::status`]; the partial
/// result is still returned.
pub fn mdab(init: &[OrderedSimplexPoint], spec: &ChannelSpec, cfg: &MdabConfig) -> Result<MdabResult> {
    spec.validate()?;
    cfg.validate()?;
    if init.is_empty() {
        return Err(Error::InvalidArgument(
            "M-DAB needs at least one initial location".into(),
        ));
    }
    if let Some(bad) = init.iter().find(|p| p.k() != spec.k) {
        return Err(Error::InvalidPoint(format!(
            "initial location {:?} does not have k = {} coordinates",
            bad.as_slice(),
            spec.k
        )));
    }
    let table = OutcomeTable::new(spec)?;
    let solver = Solver { table: &table, cfg };

    let atoms = reduce_to_ordered(init);
    let total_perms: f64 = atoms.iter().map(|a| a.permutation_count() as f64).sum();
    let weights = atoms
        .iter()
        .map(|a| a.permutation_count() as f64 / total_perms)
        .collect();
    let mut state = State {
        channel: OrbitChannel::new(&table, atoms),
        weights,
    };

    let vertices = ordered_vertices(spec.k);
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut floor: Option<f64> = None;
    let mut stalls = 0;

    for iteration in 0.. {
        let mut ba_opts = cfg.ba;
        ba_opts.floor = floor.take();
        let mut ba = state.channel.blahut_arimoto(&state.weights, &ba_opts);
        state.weights = ba.weights.clone();
        let (mut dual_value, mut x_max) = solver.dual(&state.channel, &ba)?;

        if dual_value - ba.mutual_info_nats <= cfg.eps_gap {
            ba = solver.polish(&mut state);
            (dual_value, x_max) = solver.dual(&state.channel, &ba)?;
        }
        let mut record = TraceRecord {
            iteration,
            mutual_info_nats: ba.mutual_info_nats,
            dual_nats: dual_value,
            action: Action::Converged,
            point: None,
            step: None,
        };
        let status = if dual_value - ba.mutual_info_nats <= cfg.eps_gap {
            Some(MdabStatus::Converged)
        } else if iteration >= cfg.max_outer_iter {
            Some(MdabStatus::IterationLimit)
        } else if stalls >= STALL_LIMIT {
            Some(MdabStatus::Stalled)
        } else {
            None
        };
        if let Some(status) = status {
            if status != MdabStatus::Converged {
                ba = solver.polish(&mut state);
            }
            trace.push(record);
            return finish(spec, status, state, &ba, dual_value, x_max, trace);
        }

        let atoms = state.channel.atoms();
        let (closest, d_atom) = argmin(atoms.iter().map(|a| kl_point(a.as_slice(), x_max.as_slice())));
        let (vi, d_vertex) = argmin(vertices.iter().map(|v| kl_point(v.as_slice(), x_max.as_slice())));
        let vertex = &vertices[vi];
        let present = atoms
            .iter()
            .any(|a| linf(a.as_slice(), vertex.as_slice()) <= VERTEX_PRESENT_TOL);

        if d_atom > d_vertex && !present {
            let keep = 1.0 - cfg.new_atom_weight;
            state.weights.iter_mut().for_each(|w| *w *= keep);
            state.weights.push(cfg.new_atom_weight);
            state.channel.push(vertex.clone());
            floor = Some(ba.mutual_info_nats - MONOTONE_SLACK);
            record.action = Action::AddVertex;
            record.point = Some(vertex.as_slice().to_vec());
            stalls = 0;
        } else {
            let direction = create_direction_vector(atoms, closest, &x_max).swap_remove(closest);
            let mut best = solver.line_search(&state, closest, &direction);
            let mut moved = closest;
            record.action = Action::MoveAtom;
            if best.ba.mutual_info_nats - ba.mutual_info_nats < STALL_GAIN {
                // Moving the atom loses what it already contributes; move a
                // copy of it instead.
                let split = split_state(&state, closest);
                let copy = split.channel.len() - 1;
                let candidate = solver.line_search(&split, copy, &direction);
                if candidate.ba.mutual_info_nats > best.ba.mutual_info_nats {
                    best = candidate;
                    moved = copy;
                    record.action = Action::SplitAtom;
                }
            }
            let gain = best.ba.mutual_info_nats - ba.mutual_info_nats;
            if best.step == 0.0 || gain < STALL_GAIN {
                stalls += 1;
            } else {
                stalls = 0;
            }
            record.point = Some(best.channel.atoms()[moved].as_slice().to_vec());
            record.step = Some(best.step);
            if best.step > 0.0 {
                state.channel = best.channel;
                state.weights = best.ba.weights;
                merge_duplicates(&mut state, moved);
            }
        }
        trace.push(record);
    }
    unreachable!("outer loop only exits by returning")
}

/// Copy of `state` with atom `index` duplicated at the end of the list,
/// its weight shared evenly with the copy.
fn split_state<'t>(state: &State<'t>, index: usize) -> State<'t> {
    let mut channel = state.channel.clone();
    channel.push(channel.atoms()[index].clone());
    let mut weights = state.weights.clone();
    weights[index] /= 2.0;
    weights.push(weights[index]);
    State { channel, weights }
}

/// Folds any atom that coincides with atom `moved` into it.
fn merge_duplicates(state: &mut State<'_>, moved: usize) {
    let target = state.channel.atoms()[moved].clone();
    let mut keep = vec![true; state.weights.len()];
    for (i, a) in state.channel.atoms().iter().enumerate() {
        if i != moved && linf(a.as_slice(), target.as_slice()) <= DEDUP_TOL {
            keep[i] = false;
            state.weights[moved] += state.weights[i];
        }
    }
    if keep.iter().any(|k| !k) {
        state.channel.retain_indices(&keep);
        let mut it = keep.iter();
        state.weights.retain(|_| *it.next().unwrap());
    }
}

fn finish(
    spec: &ChannelSpec,
    status: MdabStatus,
    state: State<'_>,
    ba: &BaResult,
    dual_value: f64,
    x_max: OrderedSimplexPoint,
    trace: Vec<TraceRecord>,
) -> Result<MdabResult> {
    let ordered_atoms: Vec<(OrderedSimplexPoint, f64)> = state
        .channel
        .atoms()
        .iter()
        .cloned()
        .zip(state.weights.iter().copied())
        .collect();
    let caid = expand(&ordered_atoms)?;
    Ok(MdabResult {
        spec: *spec,
        status,
        support_size_m: caid.len(),
        caid,
        ordered_atoms,
        capacity_nats: ba.mutual_info_nats,
        dual_bound_nats: dual_value,
        gap_nats: dual_value - ba.mutual_info_nats,
        maximizer: x_max,
        trace,
    })
}

/// Solves `n = 1..=n_max`, seeding each `n` with the atom locations found
/// for `n - 1` and `n = 1` with the ordered-simplex vertices.
pub fn solve_sequence(n_max: u32, k: usize, flip_eps: f64, cfg: &MdabConfig) -> Result<Vec<MdabResult>> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let mut out: Vec<MdabResult> = Vec::with_capacity(n_max as usize);
    let mut init = ordered_vertices(k);
    for n in 1..=n_max {
        let spec = ChannelSpec::new(n, k, flip_eps)?;
        let result = mdab(&init, &spec, cfg)?;
        if !result.is_converged() {
            return Err(Error::NotConverged {
                n,
                status: result.status,
                partial: Box::new(result),
            });
        }
        init = result.ordered_atoms.iter().map(|(p, _)| p.clone()).collect();
        out.push(result);
    }
    Ok(out)
}
