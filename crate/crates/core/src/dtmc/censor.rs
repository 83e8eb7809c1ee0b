//! Exact stationary solve that eliminates the countdown states.
//!
//! A state with a positive counter can only move to counter − 1 with a
//! queue that does not shrink, and is only entered through a uniform backoff
//! draw. Replacing each draw by a zero-time hub state and watching the chain
//! only on hubs and states with counter ≤ 0 leaves a small chain in which a
//! hub for stage `j` jumps straight to the attempt states `(j, 0, ·)` with
//! the averaged countdown kernel `M_j = (Σ_{m=0..W_j} D^m) / (W_j + 1)`,
//! where `D` is the one-decrement queue kernel. The countdown mass follows
//! from the hub mass by a backward sweep over the counter.

use super::matrix::{build_transition_matrix, chain_rows, ChainInputs, Target, TransitionMatrix};
use super::space::StateSpace;
use super::stationary::{refine, residual, stationary, Stationary, RESIDUAL_TOL};
use crate::error::ModelError;

type Kernel = Vec<Vec<f64>>;

/// Row vector times upper-triangular kernel.
fn step(v: &[f64], d: &Kernel) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (l, &x) in v.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (lp, &p) in d[l].iter().enumerate().skip(l) {
            out[lp] += x * p;
        }
    }
    out
}

/// `(Σ_{m=0..w} D^m) / (w + 1)`, row by row.
fn averaged_countdown(d: &Kernel, w: u32) -> Kernel {
    let size = d.len();
    (0..size)
        .map(|l| {
            let mut v = vec![0.0; size];
            v[l] = 1.0;
            let mut acc = v.clone();
            for _ in 0..w {
                v = step(&v, d);
                acc.iter_mut().zip(&v).for_each(|(a, x)| *a += x);
            }
            let scale = 1.0 / f64::from(w + 1);
            acc.iter_mut().for_each(|a| *a *= scale);
            acc
        })
        .collect()
}

/// Stationary distribution of the chain described by `space` and `inputs`,
/// checked against the full transition matrix.
pub fn solve_chain(space: &StateSpace, inputs: &ChainInputs<'_>) -> Result<Stationary, ModelError> {
    let rows = chain_rows(space, inputs)?;
    let qs = space.queue_size();
    let size = qs as usize + 1;
    let decrement: Kernel = (0..=qs)
        .map(|l| inputs.kernel.no_tx_row(inputs.durations.backoff_slot, l))
        .collect::<Result<_, _>>()?;

    // reduced indices: kept states first, then hubs
    let mut reduced = vec![usize::MAX; space.len()];
    let mut kept = Vec::new();
    for (i, s) in space.states().iter().enumerate() {
        if s.counter <= 0 {
            reduced[i] = kept.len();
            kept.push(i);
        }
    }
    let base = kept.len();
    let hub = |stage: u32, queue: u32| -> usize {
        if stage == 0 {
            base + queue as usize
        } else {
            base + size + (stage as usize - 1) * qs as usize + (queue as usize - 1)
        }
    };
    let hub_count = size + (space.stages() as usize - 1) * qs as usize;

    let mut reduced_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(base + hub_count);
    for &i in &kept {
        let row = rows[i]
            .iter()
            .map(|&(t, p)| match t {
                Target::State(c) => {
                    debug_assert!(reduced[c] != usize::MAX, "direct entry into a countdown state");
                    (reduced[c], p)
                }
                Target::Draw { stage, queue } => (hub(stage, queue), p),
            })
            .collect();
        reduced_rows.push(row);
    }
    let mut averaged: Vec<(u32, Kernel)> = Vec::new();
    for stage in 0..space.stages() {
        let w = space.window(stage);
        if !averaged.iter().any(|(ww, _)| *ww == w) {
            averaged.push((w, averaged_countdown(&decrement, w)));
        }
        let m = &averaged.iter().find(|(ww, _)| *ww == w).expect("cached").1;
        let low = if stage == 0 { 0 } else { 1 };
        for queue in low..=qs {
            let row = m[queue as usize]
                .iter()
                .enumerate()
                .filter(|&(_, &p)| p > 0.0)
                .map(|(lp, &p)| (reduced[space.at(stage, 0, lp as u32)], p))
                .collect();
            reduced_rows.push(row);
        }
    }
    let small = TransitionMatrix::from_rows(base + hub_count, reduced_rows)?;
    let pi = stationary(&small)?.b;

    let mut b = vec![0.0; space.len()];
    for (r, &i) in kept.iter().enumerate() {
        b[i] = pi[r];
    }
    for stage in 0..space.stages() {
        let w = space.window(stage);
        let scale = 1.0 / f64::from(w + 1);
        let low = if stage == 0 { 0 } else { 1 };
        let mut entry = vec![0.0; size];
        for queue in low..=qs {
            entry[queue as usize] = pi[hub(stage, queue)] * scale;
        }
        let mut v = entry.clone();
        for k in (1..=w as i32).rev() {
            if k < w as i32 {
                v = step(&v, &decrement);
                v.iter_mut().zip(&entry).for_each(|(x, e)| *x += e);
            }
            for queue in low..=qs {
                b[space.at(stage, k, queue)] = v[queue as usize];
            }
        }
    }
    let mass: f64 = b.iter().sum();
    if !(mass > 0.0) {
        return Err(ModelError::Degenerate { what: "stationary mass of the chain states" });
    }
    b.iter_mut().for_each(|v| *v /= mass);

    let p = build_transition_matrix(space, inputs)?;
    let r = residual(&p, &b);
    if r < RESIDUAL_TOL {
        Ok(Stationary { b, residual: r })
    } else {
        refine(&p, b)
    }
}
