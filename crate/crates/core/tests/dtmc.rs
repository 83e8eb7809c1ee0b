use std::collections::VecDeque;

use edca_core::dtmc::{
    build_transition_matrix, mean_txop_duration, residual, solve_chain, stationary, tau, ChainInputs, StateSpace,
    SteadyState, TransitionMatrix,
};
use edca_core::{ArrivalKernel, DurationSet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const SLOT: f64 = 9e-6;

fn durations(n: u32) -> DurationSet {
    DurationSet {
        aifs: 28e-6,
        frame: 189e-6,
        payload: 153e-6,
        success: 279e-6,
        collision: 277e-6,
        exchange: 261e-6,
        txop_exchanges: n,
        txop: 279e-6,
        backoff_slot: 25e-6,
        busy_slot: 278e-6,
    }
}

fn windows(cw_min: u32, max_stage: u32, retry_limit: u32) -> Vec<u32> {
    (0..retry_limit)
        .map(|j| (1u32 << j.min(max_stage)) * (cw_min + 1) - 1)
        .collect()
}

fn build(space: &StateSpace, d: &DurationSet, p: f64, rate: f64) -> TransitionMatrix {
    let kernel = ArrivalKernel::new(rate, space.queue_size());
    let inputs = ChainInputs {
        p_collision: p,
        rho: kernel.rho(SLOT),
        durations: d,
        kernel,
    };
    build_transition_matrix(space, &inputs).unwrap()
}

/// Stationary vector from a dense LU solve of the balance equations.
fn dense_stationary(p: &TransitionMatrix) -> Vec<f64> {
    let n = p.len();
    let dense = p.to_dense();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = dense[i][j];
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let x = a.lu().solve(&rhs).expect("nonsingular balance equations");
    x.iter().copied().collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn golden_fixture_matches_dense_solve_and_hand_tau() {
    let (p, rate) = (0.1, 100.0);
    let space = StateSpace::from_windows(vec![1], 1, 1);
    let d = durations(1);
    let m = build(&space, &d, p, rate);
    let sparse = stationary(&m).unwrap();
    let dense = dense_stationary(&m);
    assert!(max_abs_diff(&sparse.b, &dense) < 1e-12);
    assert!(sparse.residual < 1e-10);

    let b = |k: i32, l: u32| dense[space.index(0, k, l).unwrap()];
    let rho = 1.0 - (-rate * SLOT).exp();
    let expected = (b(0, 1) + b(0, 0) * rho * (1.0 - p)) / (b(0, 0) + b(1, 0) + b(0, 1) + b(1, 1));
    let got = tau(&space, &sparse.b, p, rho).unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");

    let (t_txop, fallback) = mean_txop_duration(&space, &sparse.b, d.success, d.exchange);
    assert_eq!(t_txop, d.success);
    assert!(!fallback);
}

#[test]
fn perturbed_identity_matches_dense_solve() {
    let n = 150;
    let eps = 1e-3;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0 - eps;
            r[(i + 1) % n] += eps * 0.7;
            r[(i * 7 + 3) % n] += eps * 0.3;
            r
        })
        .collect();
    let m = TransitionMatrix::from_dense(&rows).unwrap();
    let sparse = stationary(&m).unwrap();
    assert!(max_abs_diff(&sparse.b, &dense_stationary(&m)) < 1e-10);
}

#[test]
fn every_state_reachable_from_idle() {
    let space = StateSpace::from_windows(windows(3, 2, 4), 3, 4);
    let m = build(&space, &durations(3), 0.2, 1000.0);
    let start = space.index(0, 0, 0).unwrap();
    let mut seen = vec![false; space.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let (cols, _) = m.row(i);
        for &c in cols {
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    let missing: Vec<_> = (0..space.len()).filter(|&i| !seen[i]).map(|i| space.state(i)).collect();
    assert!(missing.is_empty(), "unreachable: {missing:?}");
}

#[test]
fn idle_network_has_zero_tau() {
    let space = StateSpace::from_windows(windows(7, 3, 7), 1, 10);
    let d = durations(1);
    let kernel = ArrivalKernel::new(0.0, 10);
    let inputs = ChainInputs {
        p_collision: 0.0,
        rho: 0.0,
        durations: &d,
        kernel,
    };
    let ss = SteadyState::solve(space, &inputs).unwrap();
    assert!(ss.tau.abs() < 1e-12);
    assert!((ss.prob(0, 0, 0) - 1.0).abs() < 1e-9);
}

#[test]
fn txop_duration_examples() {
    let space = StateSpace::from_windows(vec![3], 2, 2);
    let d = durations(2);
    let mut b = vec![0.0; space.len()];
    b[space.index(0, -2, 1).unwrap()] = 0.5;
    b[space.index(0, -2, 2).unwrap()] = 0.5;
    let (t, flag) = mean_txop_duration(&space, &b, d.success, d.exchange);
    assert!((t - (d.exchange + d.success)).abs() < 1e-18);
    assert!(!flag);

    b.iter_mut().for_each(|v| *v = 0.0);
    b[space.index(0, -2, 0).unwrap()] = 0.25;
    b[space.index(0, -1, 0).unwrap()] = 0.75;
    let (t, _) = mean_txop_duration(&space, &b, d.success, d.exchange);
    assert!((t - (0.25 * (d.exchange + d.success) + 0.75 * d.success)).abs() < 1e-18);

    let zero = vec![0.0; space.len()];
    assert_eq!(mean_txop_duration(&space, &zero, d.success, d.exchange), (d.success, true));
}

/// Saturated transmission probability of a station with a fixed conditional
/// collision probability: attempts per packet over backoff slots per packet.
fn saturation_tau(p: f64, windows: &[u32]) -> f64 {
    let attempts: f64 = (0..windows.len()).map(|j| p.powi(j as i32)).sum();
    let slots: f64 = windows
        .iter()
        .enumerate()
        .map(|(j, &w)| p.powi(j as i32) * (f64::from(w) + 2.0) / 2.0)
        .sum();
    attempts / slots
}

#[test]
fn saturated_chain_matches_saturation_tau() {
    let w = windows(15, 3, 7);
    for p in [0.05, 0.2, 0.4, 0.6] {
        let space = StateSpace::from_windows(w.clone(), 1, 2);
        let d = durations(1);
        let kernel = ArrivalKernel::new(1e7, 2);
        let inputs = ChainInputs {
            p_collision: p,
            rho: kernel.rho(SLOT),
            durations: &d,
            kernel,
        };
        let ss = SteadyState::solve(space, &inputs).unwrap();
        let oracle = saturation_tau(p, &w);
        assert!((ss.tau - oracle).abs() / oracle < 0.02, "p={p}: {} vs {oracle}", ss.tau);
    }
}

#[test]
fn tau_nondecreasing_in_arrival_rate() {
    let w = windows(7, 3, 7);
    for p in [0.0, 0.1, 0.3] {
        let mut last = 0.0;
        for rate in [0.0, 10.0, 50.0, 200.0, 500.0, 1000.0, 3000.0, 1e4, 1e5] {
            let space = StateSpace::from_windows(w.clone(), 2, 5);
            let d = durations(2);
            let kernel = ArrivalKernel::new(rate, 5);
            let inputs = ChainInputs {
                p_collision: p,
                rho: kernel.rho(SLOT),
                durations: &d,
                kernel,
            };
            let t = SteadyState::solve(space, &inputs).unwrap().tau;
            assert!(t >= last - 1e-12, "p={p} rate={rate}: {t} < {last}");
            last = t;
        }
    }
}

#[derive(Debug, Clone)]
struct ChainCase {
    windows: Vec<u32>,
    n: u32,
    qs: u32,
    p: f64,
    rate: f64,
}

fn chain_case(max_states: usize) -> impl Strategy<Value = ChainCase> {
    (1u32..8, 0u32..3, 1u32..5, 1u32..5, 1u32..8, 0.0f64..0.95, 0.0f64..4.5)
        .prop_map(|(cw, m, r, n, qs, p, log_rate)| ChainCase {
            windows: windows(cw, m.min(r - 1), r),
            n,
            qs,
            p,
            rate: 10f64.powf(log_rate) - 1.0,
        })
        .prop_filter("chain size", move |c| {
            StateSpace::from_windows(c.windows.clone(), c.n, c.qs).len() <= max_states
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_stochastic_and_structurally_admissible(c in chain_case(5000)) {
        let space = StateSpace::from_windows(c.windows.clone(), c.n, c.qs);
        let m = build(&space, &durations(c.n), c.p, c.rate);
        for (i, s) in m.row_sums().iter().enumerate() {
            prop_assert!((s - 1.0).abs() <= 1e-12, "row {} sums to {}", i, s);
        }
        for (_, col, v) in m.triplets() {
            prop_assert!((0.0..=1.0 + 1e-15).contains(&v));
            let s = space.state(col);
            prop_assert!(s.stage == 0 || (s.queue > 0 && s.counter >= 0));
        }
    }

    #[test]
    fn sparse_matches_dense_steady_state(c in chain_case(500)) {
        // keep the chain irreducible
        let rate = c.rate.max(1.0);
        let space = StateSpace::from_windows(c.windows.clone(), c.n, c.qs);
        let m = build(&space, &durations(c.n), c.p, rate);
        let sparse = stationary(&m).unwrap();
        prop_assert!(sparse.residual < 1e-10);
        prop_assert!((residual(&m, &sparse.b) - sparse.residual).abs() < 1e-15);
        prop_assert!((sparse.b.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let dense = dense_stationary(&m);
        prop_assert!(max_abs_diff(&sparse.b, &dense) <= 1e-9);

        let d = durations(c.n);
        let kernel = ArrivalKernel::new(rate, c.qs);
        let inputs = ChainInputs { p_collision: c.p, rho: kernel.rho(SLOT), durations: &d, kernel };
        let structured = solve_chain(&space, &inputs).unwrap();
        prop_assert!(structured.residual < 1e-10);
        prop_assert!(max_abs_diff(&structured.b, &dense) <= 1e-9);
    }
}
