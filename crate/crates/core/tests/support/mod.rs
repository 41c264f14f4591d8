//! Randomized checks shared by the property suite and the acceptance run.

#![allow(dead_code)]

use mdab_core::ba::{blahut_arimoto, BaOptions};
use mdab_core::channel::{enumerate_outcomes, log_pmf, transition_matrix};
use mdab_core::simplex::{expand, kl_point, linf, reduce_to_ordered};
use mdab_core::{ChannelSpec, OrderedSimplexPoint, SimplexPoint, TransitionMatrix};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub const CASES: u32 = 128;

/// Nonnegative entries, some exactly zero, normalized to sum 1.
pub fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0], k).prop_filter_map("all zero", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

pub fn point(k: usize) -> impl Strategy<Value = SimplexPoint> {
    simplex(k).prop_map(|v| SimplexPoint::normalized(v).unwrap())
}

pub fn spec_and_point() -> impl Strategy<Value = (ChannelSpec, SimplexPoint)> {
    (2usize..=5, 1u32..=8, prop_oneof![Just(0.0), 0.0f64..0.5])
        .prop_flat_map(|(k, n, eps)| (Just(ChannelSpec::new(n, k, eps).unwrap()), point(k)))
}

pub fn stochastic_matrix() -> impl Strategy<Value = TransitionMatrix> {
    (2usize..=6, 2usize..=6).prop_flat_map(|(rows, cols)| {
        prop::collection::vec(simplex(cols), rows).prop_map(|r| TransitionMatrix::from_rows(r).unwrap())
    })
}

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<u32, String>
where
    S::Value: std::fmt::Debug,
{
    runner().run(&strategy, test).map(|()| CASES).map_err(|e| e.to_string())
}

pub fn pmf_normalization() -> Result<u32, String> {
    check(spec_and_point(), |(spec, x)| {
        let total: f64 = enumerate_outcomes(&spec)
            .unwrap()
            .iter()
            .map(|y| log_pmf(&x, y).exp())
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-10, "total {}", total);
        Ok(())
    })
}

pub fn expand_reduce_round_trip() -> Result<u32, String> {
    let strategy = (2usize..=5).prop_flat_map(|k| prop::collection::vec((simplex(k), 0.05f64..1.0), 1..5));
    check(strategy, |atoms| {
        let locations = reduce_to_ordered(&atoms.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>());
        let total: f64 = atoms.iter().take(locations.len()).map(|(_, w)| w).sum();
        let ordered: Vec<(OrderedSimplexPoint, f64)> = locations
            .iter()
            .cloned()
            .zip(atoms.iter().map(|(_, w)| w / total))
            .collect();
        let dist = expand(&ordered).unwrap();
        prop_assert!((dist.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let expected_len: u64 = ordered.iter().map(|(p, _)| p.permutation_count()).sum();
        prop_assert_eq!(dist.len() as u64, expected_len);

        let back = reduce_to_ordered(&dist.locations());
        prop_assert_eq!(back.len(), ordered.len());
        for (p, w) in &ordered {
            prop_assert!(back.iter().any(|b| linf(b.as_slice(), p.as_slice()) <= 1e-12));
            let orbit: f64 = dist
                .atoms()
                .iter()
                .filter(|a| {
                    let c = OrderedSimplexPoint::canonicalize(a.location.as_slice());
                    linf(c.as_slice(), p.as_slice()) <= 1e-12
                })
                .map(|a| a.weight)
                .sum();
            prop_assert!((orbit - w).abs() <= 1e-12);
        }
        Ok(())
    })
}

pub fn kl_nonnegative() -> Result<u32, String> {
    check((2usize..=6).prop_flat_map(|k| (simplex(k), simplex(k))), |(p, q)| {
        prop_assert!(kl_point(&p, &q) >= 0.0);
        prop_assert!(kl_point(&p, &p).abs() <= 1e-15);
        Ok(())
    })
}

pub fn ba_monotone() -> Result<u32, String> {
    check(stochastic_matrix(), |w| {
        let opts = BaOptions {
            tol: 1e-12,
            max_iter: 5000,
            record_trace: true,
            ..Default::default()
        };
        let r = blahut_arimoto(&w, &opts);
        prop_assert!(!r.trace.is_empty());
        for pair in r.trace.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-12, "{} then {}", pair[0], pair[1]);
        }
        prop_assert!(r.mutual_info_nats <= r.upper_bound_nats + 1e-12);
        prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        Ok(())
    })
}

pub fn transition_row_sums() -> Result<u32, String> {
    let strategy = (2usize..=4, 1u32..=6, 0.0f64..0.5).prop_flat_map(|(k, n, eps)| {
        (
            Just(ChannelSpec::new(n, k, eps).unwrap()),
            prop::collection::vec(point(k), 1..6),
        )
    });
    check(strategy, |(spec, pts)| {
        let w = transition_matrix(&pts, &spec).unwrap();
        for row in w.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
        Ok(())
    })
}
