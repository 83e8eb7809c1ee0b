use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::matrix::TransitionMatrix;
use crate::error::ModelError;

/// Largest accepted `‖bP − b‖₁`.
pub const RESIDUAL_TOL: f64 = 1e-10;

const POWER_MAX_ITERS: usize = 2_000_000;

/// Stationary distribution together with its residual `‖bP − b‖₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub b: Vec<f64>,
    pub residual: f64,
}

pub fn residual(p: &TransitionMatrix, b: &[f64]) -> f64 {
    p.left_mul(b).iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Solves `bP = b`, `Σb = 1` for an irreducible chain.
///
/// Uses a sparse LU factorisation of `Pᵀ − I` with one equation replaced by
/// the normalisation, refined once, and falls back to lazy power iteration
/// when the factorisation fails or is not accurate enough.
pub fn stationary(p: &TransitionMatrix) -> Result<Stationary, ModelError> {
    let n = p.len();
    if n == 0 {
        return Err(ModelError::Dimension("empty chain".into()));
    }
    if n == 1 {
        return Ok(Stationary { b: vec![1.0], residual: 0.0 });
    }
    if let Some(b) = direct(p) {
        let r = residual(p, &b);
        if r < RESIDUAL_TOL {
            return Ok(Stationary { b, residual: r });
        }
        return power(p, b);
    }
    power(p, vec![1.0 / n as f64; n])
}

fn direct(p: &TransitionMatrix) -> Option<Vec<f64>> {
    let n = p.len();
    let pin = 0;
    let mut entries = Vec::with_capacity(p.nnz() + 2 * n);
    let mut diag = vec![-1.0; n];
    for (r, c, v) in p.triplets() {
        if r == c {
            diag[r] += v;
        } else if c != pin {
            entries.push(Triplet::new(c, r, v));
        }
    }
    for (i, &d) in diag.iter().enumerate() {
        if i != pin && d != 0.0 {
            entries.push(Triplet::new(i, i, d));
        }
    }
    entries.extend((0..n).map(|col| Triplet::new(pin, col, 1.0)));
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries).ok()?;
    let lu = a.sp_lu().ok()?;

    let mut x = Mat::<f64>::zeros(n, 1);
    x[(pin, 0)] = 1.0;
    lu.solve_in_place(x.as_mut());
    // one step of iterative refinement against the original system
    let mut r = Mat::<f64>::zeros(n, 1);
    r[(pin, 0)] = 1.0;
    for t in &entries {
        r[(t.row, 0)] -= t.val * x[(t.col, 0)];
    }
    lu.solve_in_place(r.as_mut());
    let mut b: Vec<f64> = (0..n).map(|i| x[(i, 0)] + r[(i, 0)]).collect();
    normalise(&mut b)?;
    Some(b)
}

/// Clamps round-off negatives and rescales to unit mass.
fn normalise(b: &mut [f64]) -> Option<()> {
    if b.iter().any(|v| !v.is_finite()) {
        return None;
    }
    for v in b.iter_mut() {
        *v = v.max(0.0);
    }
    let total: f64 = b.iter().sum();
    if total <= 0.0 {
        return None;
    }
    b.iter_mut().for_each(|v| *v /= total);
    Some(())
}

/// Lazy power iteration `b ← (b + bP)/2`, which also converges on periodic
/// chains.
pub(crate) fn refine(p: &TransitionMatrix, b: Vec<f64>) -> Result<Stationary, ModelError> {
    power(p, b)
}

fn power(p: &TransitionMatrix, mut b: Vec<f64>) -> Result<Stationary, ModelError> {
    let mut r = f64::INFINITY;
    for it in 0..POWER_MAX_ITERS {
        let next = p.left_mul(&b);
        if it % 64 == 0 {
            r = next.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
            if r < RESIDUAL_TOL {
                return Ok(Stationary { b, residual: r });
            }
        }
        for (v, w) in b.iter_mut().zip(next) {
            *v = 0.5 * (*v + w);
        }
        normalise(&mut b).ok_or(ModelError::SteadyState { residual: r })?;
    }
    Err(ModelError::SteadyState { residual: r })
}
