//! Acceptance run. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod support;

use std::process::Command;
use std::time::Instant;

use mdab_core::ba::{blahut_arimoto, mutual_information, BaOptions};
use mdab_core::channel::transition_matrix;
use mdab_core::cli::uniform_composite_capacity;
use mdab_core::oracle::{asymptotic_capacity, grid_capacity, scaling_fit, ScalingRecord};
use mdab_core::simplex::{kl_point, linf, ordered_vertices};
use mdab_core::{mdab, solve_sequence, ChannelSpec, MdabConfig, MdabResult, OrderedSimplexPoint, SimplexPoint};

/// Reference CAIDs for `k = 4`: ordered location (as printed, three
/// decimals) and weight of each expanded atom.
const REFERENCE_K4: [&[([f64; 4], f64)]; 10] = [
    &[([1.0, 0.0, 0.0, 0.0], 0.25)],
    &[([1.0, 0.0, 0.0, 0.0], 0.172), ([0.5, 0.5, 0.0, 0.0], 0.052)],
    &[
        ([1.0, 0.0, 0.0, 0.0], 0.130),
        ([0.5, 0.5, 0.0, 0.0], 0.076),
        ([0.333, 0.333, 0.333, 0.0], 0.006),
    ],
    &[
        ([1.0, 0.0, 0.0, 0.0], 0.112),
        ([0.5, 0.5, 0.0, 0.0], 0.077),
        ([0.25, 0.25, 0.25, 0.25], 0.006),
        ([0.333, 0.333, 0.333, 0.0], 0.021),
    ],
    &[
        ([1.0, 0.0, 0.0, 0.0], 0.097),
        ([0.608, 0.392, 0.0, 0.0], 0.040),
        ([0.25, 0.25, 0.25, 0.25], 0.004),
        ([0.333, 0.333, 0.333, 0.0], 0.032),
    ],
    &[
        ([1.0, 0.0, 0.0, 0.0], 0.080),
        ([0.685, 0.315, 0.0, 0.0], 0.043),
        ([0.25, 0.25, 0.25, 0.25], 0.08),
        ([0.333, 0.333, 0.333, 0.0], 0.039),
    ],
    &[
        ([1.0, 0.0, 0.0, 0.0], 0.070),
        ([0.709, 0.291, 0.0, 0.0], 0.043),
        ([0.25, 0.25, 0.25, 0.25], 0.012),
        ([0.333, 0.333, 0.333, 0.0], 0.009),
        ([0.478, 0.261, 0.261, 0.0], 0.013),
    ],
    &[
        ([1.0, 0.0, 0.0, 0.0], 0.063),
        ([0.721, 0.279, 0.0, 0.0], 0.042),
        ([0.25, 0.25, 0.25, 0.25], 0.016),
        ([0.526, 0.237, 0.237, 0.0], 0.19),
    ],
    &[
        ([1.0, 0.0, 0.0, 0.0], 0.057),
        ([0.5, 0.5, 0.0, 0.0], 0.010),
        ([0.25, 0.25, 0.25, 0.25], 0.016),
        ([0.552, 0.224, 0.224, 0.0], 0.021),
        ([0.748, 0.252, 0.0, 0.0], 0.036),
        ([0.427, 0.191, 0.191, 0.191], 0.003),
    ],
    &[
        ([1.0, 0.0, 0.0, 0.0], 0.052),
        ([0.5, 0.5, 0.0, 0.0], 0.020),
        ([0.568, 0.216, 0.216, 0.0], 0.022),
        ([0.782, 0.218, 0.0, 0.0], 0.031),
        ([0.430, 0.190, 0.190, 0.190], 0.009),
    ],
];

const REFERENCE_SUPPORT_K4: [usize; 10] = [4, 10, 14, 15, 21, 21, 33, 29, 39, 38];

/// Per-atom weights that make the `n = 6` and `n = 8` rows sum to one; the
/// printed values there are off by a factor of ten.
fn corrected_weight(n: usize, loc: &[f64; 4], printed: f64) -> f64 {
    match (n, loc) {
        (6, [a, ..]) if *a == 0.25 => 0.008,
        (8, [a, ..]) if *a == 0.526 => 0.019,
        _ => printed,
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, id: u32, title: &str, outcome: Result<String, String>) {
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2}: {title} ({detail})"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL criterion {id:>2}: {title} ({detail})");
            }
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The reference distribution for one `n`, locations renormalized, expanded
/// over permutations.
fn reference_locations(n: usize) -> Vec<(OrderedSimplexPoint, f64)> {
    REFERENCE_K4[n - 1]
        .iter()
        .map(|(loc, w)| {
            let p = OrderedSimplexPoint::canonicalize(loc);
            let each = corrected_weight(n, loc, *w);
            let perms = p.permutation_count() as f64;
            (p, each * perms)
        })
        .collect()
}

fn reference_values(n: usize) -> (f64, f64) {
    let spec = ChannelSpec::noiseless(n as u32, 4).unwrap();
    let ordered = reference_locations(n);
    let mut locations = Vec::new();
    let mut weights = Vec::new();
    for (p, w) in &ordered {
        let perms = p.distinct_permutations();
        let each = w / perms.len() as f64;
        for q in perms {
            locations.push(SimplexPoint::new(q).unwrap());
            weights.push(each);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let w = transition_matrix(&locations, &spec).unwrap();
    let printed = mutual_information(&weights, &w);
    let opts = BaOptions {
        tol: 1e-12,
        max_iter: 1_000_000,
        ..Default::default()
    };
    let optimized = blahut_arimoto(&w, &opts).mutual_info_nats;
    (printed, optimized)
}

fn criterion_1(chain: &[MdabResult]) -> Result<String, String> {
    let mut worst = f64::INFINITY;
    for r in chain {
        let n = r.spec.n as usize;
        ensure(r.is_converged() && r.gap_nats <= 1e-4, || {
            format!("n = {n}: status {}, gap {:.3e}", r.status, r.gap_nats)
        })?;
        let (printed, optimized) = reference_values(n);
        let reference = printed.max(optimized);
        ensure(r.capacity_nats >= reference - 1e-4, || {
            format!(
                "n = {n}: capacity {:.9} < reference {:.9} - 1e-4",
                r.capacity_nats, reference
            )
        })?;
        worst = worst.min(r.capacity_nats - reference);
    }
    Ok(format!(
        "n = 1..10 converged; min capacity - reference = {worst:.3e} nats"
    ))
}

fn criterion_2(chain: &[MdabResult]) -> Result<String, String> {
    let mut notes = Vec::new();
    for r in chain {
        let n = r.spec.n as usize;
        let mut divergences = Vec::new();
        if r.support_size_m != REFERENCE_SUPPORT_K4[n - 1] {
            divergences.push(format!(
                "support {} vs {}",
                r.support_size_m,
                REFERENCE_SUPPORT_K4[n - 1]
            ));
        }
        for (loc, printed) in REFERENCE_K4[n - 1] {
            let target = OrderedSimplexPoint::canonicalize(loc);
            let want = corrected_weight(n, loc, *printed);
            let hit = r.ordered_atoms.iter().any(|(p, w)| {
                let each = w / p.permutation_count() as f64;
                linf(p.as_slice(), target.as_slice()) <= 0.02 && (each - want).abs() <= 0.01
            });
            if !hit {
                let nearest = r
                    .ordered_atoms
                    .iter()
                    .map(|(p, w)| (linf(p.as_slice(), target.as_slice()), w / p.permutation_count() as f64))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .unwrap();
                divergences.push(format!(
                    "atom {loc:?} w {want}: nearest at L∞ {:.3} with w {:.4}",
                    nearest.0, nearest.1
                ));
            }
        }
        if n <= 5 {
            ensure(divergences.is_empty(), || {
                format!("n = {n}: {}", divergences.join("; "))
            })?;
        } else if !divergences.is_empty() {
            notes.push(format!("n = {n}: {}", divergences.join("; ")));
        }
    }
    if notes.is_empty() {
        Ok("n = 1..5 match; n = 6..10 also match".into())
    } else {
        Ok(format!("n = 1..5 match; reported for n = 6..10: {}", notes.join(" | ")))
    }
}

fn criterion_3(chain: &[MdabResult]) -> Result<String, String> {
    let log2_15 = 15f64.log2();
    for r in chain {
        let n = r.spec.n;
        let uniform = uniform_composite_capacity(&r.spec).map_err(|e| e.to_string())?;
        let mdab = r.capacity_bits();
        if n == 1 {
            ensure((mdab - uniform).abs() <= 1e-6, || {
                format!("n = 1: {mdab} vs {uniform} bits")
            })?;
        }
        if n >= 5 {
            ensure(mdab >= uniform - 1e-6, || {
                format!("n = {n}: M-DAB {mdab:.9} < uniform {uniform:.9} bits")
            })?;
        }
    }
    let c9 = chain[8].capacity_bits();
    ensure(c9 > log2_15, || format!("n = 9: {c9:.6} <= log2(15) = {log2_15:.6}"))?;
    Ok(format!(
        "tie at n = 1, M-DAB >= uniform for n = 5..10, C(9) = {c9:.6} > {log2_15:.6} bits"
    ))
}

fn criterion_4(runs: &[MdabResult]) -> Result<String, String> {
    for r in runs {
        let k = r.spec.k;
        let expected = (k as f64).log2();
        ensure(r.is_converged() && (r.capacity_bits() - expected).abs() <= 1e-9, || {
            format!("k = {k}: {} bits vs {expected}", r.capacity_bits())
        })?;
        ensure(r.caid.len() == k, || format!("k = {k}: support {}", r.caid.len()))?;
        for a in r.caid.atoms() {
            let loc = a.location.as_slice();
            let is_vertex = loc.iter().filter(|&&v| v == 1.0).count() == 1 && loc.iter().all(|&v| v == 0.0 || v == 1.0);
            ensure(is_vertex, || format!("k = {k}: atom {loc:?} is not a vertex"))?;
            ensure((a.weight - 1.0 / k as f64).abs() <= 1e-9, || {
                format!("k = {k}: weight {}", a.weight)
            })?;
        }
    }
    Ok("k = 2..5 give log2(k) bits, uniform on the vertices".into())
}

fn criterion_5(chain: &[MdabResult]) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for r in chain {
        let grid = grid_capacity(&r.spec, 1e-3).map_err(|e| e.to_string())?;
        let c = r.capacity_nats;
        ensure(c >= grid - 1e-9 && c <= grid + 5e-4, || {
            format!("n = {}: M-DAB {c:.12} vs grid {grid:.12}", r.spec.n)
        })?;
        worst = worst.max((c - grid).abs());
    }
    Ok(format!("k = 2, n = 1..5; max |M-DAB - grid| = {worst:.3e} nats"))
}

/// Divergence of every expanded atom from the output law, from the full
/// transition matrix.
fn atom_divergences(r: &MdabResult) -> Vec<f64> {
    let w = transition_matrix(&r.caid.locations(), &r.spec).unwrap();
    let weights = r.caid.weights();
    let mut py = vec![0.0; w.ncols()];
    for (row, wi) in w.rows().zip(&weights) {
        for (p, v) in py.iter_mut().zip(row) {
            *p += wi * v;
        }
    }
    w.rows().map(|row| kl_point(row, &py)).collect()
}

fn criterion_6(runs: &[&MdabResult], eps_gap: f64) -> Result<String, String> {
    let mut records = 0;
    let mut worst_eq: f64 = 0.0;
    for r in runs {
        let tag = format!("n = {}, k = {}", r.spec.n, r.spec.k);
        for t in &r.trace {
            records += 1;
            ensure(t.mutual_info_nats <= t.dual_nats + 1e-10, || {
                format!(
                    "{tag}, iteration {}: I {} > D {}",
                    t.iteration, t.mutual_info_nats, t.dual_nats
                )
            })?;
        }
        for d in atom_divergences(r) {
            let dev = (d - r.capacity_nats).abs();
            worst_eq = worst_eq.max(dev);
            ensure(dev <= eps_gap + 1e-9, || {
                format!("{tag}: atom divergence {d} vs capacity {}", r.capacity_nats)
            })?;
        }
    }
    Ok(format!(
        "{} runs, {records} outer iterations; max |D(x_i) - C| = {worst_eq:.3e} nats",
        runs.len()
    ))
}

fn criterion_7(chains: &[&[MdabResult]]) -> Result<String, String> {
    let mut parts = Vec::new();
    for chain in chains {
        let residual = |n: usize| {
            let r = &chain[n - 1];
            (r.capacity_nats - asymptotic_capacity(&r.spec)).abs()
        };
        let k = chain[0].spec.k;
        let (r4, r10) = (residual(4), residual(10));
        ensure(r10 < r4, || {
            format!("k = {k}: residual {r10:.5} at n = 10 vs {r4:.5} at n = 4")
        })?;
        parts.push(format!("k = {k}: {r4:.4} -> {r10:.4}"));
    }
    Ok(format!("residual shrinks from n = 4 to n = 10, {}", parts.join(", ")))
}

fn criterion_8(chains: &[&[MdabResult]]) -> Result<String, String> {
    let records: Vec<ScalingRecord> = chains
        .iter()
        .flat_map(|c| c.iter())
        .filter(|r| r.spec.n >= 2 && r.is_converged())
        .map(ScalingRecord::from_result)
        .collect();
    let fit = scaling_fit(&records).map_err(|e| e.to_string())?;
    ensure((0.65..=0.85).contains(&fit.slope), || format!("slope {:.4}", fit.slope))?;
    Ok(format!(
        "{} records, slope {:.4}, rmse {:.4}",
        records.len(),
        fit.slope,
        fit.rmse
    ))
}

fn criterion_9() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for i in 0..2 {
        let path = dir.path().join(format!("scaling_{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_mcap"))
            .args(["scaling", "--k-list", "2,3,4", "--n-max", "8", "--seed", "0", "--out"])
            .arg(&path)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("run {i} exited with {status}"))?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "outputs differ".into())?;
    Ok(format!("two runs, {} identical bytes", outputs[0].len()))
}

fn criterion_10() -> Result<String, String> {
    type Suite = fn() -> Result<u32, String>;
    let suites: [(&str, Suite); 5] = [
        ("pmf normalization", support::pmf_normalization),
        ("expand/reduce round trip", support::expand_reduce_round_trip),
        ("KL nonnegativity", support::kl_nonnegative),
        ("BA monotonicity", support::ba_monotone),
        ("transition row sums", support::transition_row_sums),
    ];
    let mut parts = Vec::new();
    for (name, suite) in suites {
        let cases = suite().map_err(|e| format!("{name}: {e}"))?;
        parts.push(format!("{name} {cases}"));
    }
    Ok(parts.join(", "))
}

fn chain_or(c: &Result<Vec<MdabResult>, mdab_core::Error>) -> Result<&[MdabResult], String> {
    c.as_ref().map(Vec::as_slice).map_err(|e| e.to_string())
}

fn main() {
    let start = Instant::now();
    let cfg = MdabConfig::default();
    let mut report = Report { failures: 0 };

    let chain4 = solve_sequence(10, 4, 0.0, &cfg);
    let chain2 = solve_sequence(10, 2, 0.0, &cfg);
    let chain3 = solve_sequence(10, 3, 0.0, &cfg);
    let singles: Vec<MdabResult> = (2..=5)
        .map(|k| mdab(&ordered_vertices(k), &ChannelSpec::noiseless(1, k).unwrap(), &cfg).unwrap())
        .collect();

    report.record(
        1,
        "capacity reaches the reference CAIDs for k = 4",
        chain_or(&chain4).and_then(criterion_1),
    );
    report.record(
        2,
        "reference CAID atoms recovered for k = 4",
        chain_or(&chain4).and_then(criterion_2),
    );
    report.record(
        3,
        "M-DAB against the uniform composite constellation",
        chain_or(&chain4).and_then(criterion_3),
    );
    report.record(4, "single read is uniform on the vertices", criterion_4(&singles));
    report.record(
        5,
        "binary channel matches the lattice oracle",
        chain_or(&chain2).and_then(|c| criterion_5(&c[..5])),
    );
    report.record(
        6,
        "weak duality and equalization",
        chain_or(&chain4).and_then(|c4| {
            chain_or(&chain2).and_then(|c2| {
                let runs: Vec<&MdabResult> = c4.iter().chain(&c2[..5]).chain(&singles).collect();
                criterion_6(&runs, cfg.eps_gap)
            })
        }),
    );
    report.record(
        7,
        "asymptotic residual shrinks",
        chain_or(&chain2).and_then(|c2| chain_or(&chain3).and_then(|c3| criterion_7(&[c2, c3]))),
    );
    report.record(
        8,
        "capacity against log support size",
        chain_or(&chain2).and_then(|c2| {
            chain_or(&chain3).and_then(|c3| chain_or(&chain4).and_then(|c4| criterion_8(&[c2, c3, c4])))
        }),
    );
    report.record(9, "scaling output is deterministic", criterion_9());
    report.record(10, "property suites", criterion_10());

    println!(
        "acceptance: {} of 10 criteria passed in {:.1?}",
        10 - report.failures,
        start.elapsed()
    );
    if report.failures > 0 {
        std::process::exit(1);
    }
}
