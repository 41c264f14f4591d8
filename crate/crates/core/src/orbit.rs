//! Blahut–Arimoto on permutation-invariant input distributions, reduced to
//! one row per ordered atom and one column per outcome orbit.
//!
//! For an input law that is invariant under coordinate permutations the
//! output law `P_Y` is invariant too, so `P_Y(y)` only depends on the sorted
//! count vector. Writing `A_o(ȳ) = Σ_{y ∈ orbit(ȳ)} P(y | x_o)` and
//! `R(ȳ) = Σ_o w_o A_o(ȳ)`, the full-channel divergence of atom `o` is
//!
//! `D_o = Σ_ȳ [ Σ_{y∈ȳ} P(y|x_o) ln P(y|x_o) + A_o(ȳ) ln |ȳ| ] - Σ_ȳ A_o(ȳ) ln R(ȳ)`,
//!
//! which is the Blahut–Arimoto divergence of the reduced matrix `A` plus a
//! per-atom constant. Iterating on `A` with orbit weights therefore follows
//! exactly the same path as iterating on the expanded channel from
//! symmetric weights, at a fraction of the size.

use crate::ba::{BaOptions, BaResult, Kernel};
use crate::channel::OutcomeTable;
use crate::simplex::OrderedSimplexPoint;

#[derive(Debug, Clone)]
struct OrbitRow {
    mass: Vec<f64>,
    neg_entropy: f64,
}

#[derive(Debug, Clone)]
pub struct OrbitChannel<'t> {
    table: &'t OutcomeTable,
    atoms: Vec<OrderedSimplexPoint>,
    rows: Vec<OrbitRow>,
}

impl<'t> OrbitChannel<'t> {
    pub fn new(table: &'t OutcomeTable, atoms: Vec<OrderedSimplexPoint>) -> Self {
        let rows = atoms.iter().map(|a| orbit_row(table, a.as_slice())).collect();
        OrbitChannel { table, atoms, rows }
    }

    pub fn table(&self) -> &'t OutcomeTable {
        self.table
    }

    pub fn atoms(&self) -> &[OrderedSimplexPoint] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn push(&mut self, atom: OrderedSimplexPoint) {
        self.rows.push(orbit_row(self.table, atom.as_slice()));
        self.atoms.push(atom);
    }

    pub fn replace(&mut self, i: usize, atom: OrderedSimplexPoint) {
        self.rows[i] = orbit_row(self.table, atom.as_slice());
        self.atoms[i] = atom;
    }

    /// Copy with atom `i` moved to `atom`.
    pub fn with_replaced(&self, i: usize, atom: OrderedSimplexPoint) -> Self {
        let mut c = self.clone();
        c.replace(i, atom);
        c
    }

    /// Keeps the atoms for which `keep` is true.
    pub fn retain_indices(&mut self, keep: &[bool]) {
        let mut it = keep.iter();
        self.atoms.retain(|_| *it.next().unwrap());
        let mut it = keep.iter();
        self.rows.retain(|_| *it.next().unwrap());
    }

    fn kernel(&self) -> Kernel {
        let ncols = self.table.num_orbits();
        let data = self.rows.iter().flat_map(|r| r.mass.iter().copied()).collect();
        let neg = self.rows.iter().map(|r| r.neg_entropy).collect();
        Kernel::with_neg_entropy(self.rows.len(), ncols, data, neg)
    }

    /// Runs Blahut–Arimoto over orbit weights (the total weight of each
    /// ordered atom's permutation class). `output_dist` of the result is
    /// indexed by outcome orbit; see [`full_output`](Self::full_output).
    pub fn blahut_arimoto(&self, init: &[f64], opts: &BaOptions) -> BaResult {
        self.kernel().run(init, opts)
    }

    /// Expands an orbit-indexed output law to the canonical outcome order.
    pub fn full_output(&self, orbit_dist: &[f64]) -> Vec<f64> {
        let sizes = self.table.orbit_sizes();
        self.table
            .orbit_of()
            .iter()
            .map(|&o| orbit_dist[o] / sizes[o] as f64)
            .collect()
    }
}

fn orbit_row(table: &OutcomeTable, x: &[f64]) -> OrbitRow {
    let mut logs = Vec::with_capacity(table.len());
    table.row_log_probs_into(x, &mut logs);
    let mut mass = vec![0.0; table.num_orbits()];
    let mut neg_entropy = 0.0;
    for (&l, &o) in logs.iter().zip(table.orbit_of()) {
        if l == f64::NEG_INFINITY {
            continue;
        }
        let p = l.exp();
        mass[o] += p;
        neg_entropy += p * l;
    }
    for (m, &size) in mass.iter().zip(table.orbit_sizes()) {
        if *m > 0.0 {
            neg_entropy += m * (size as f64).ln();
        }
    }
    OrbitRow { mass, neg_entropy }
}
