use std::io::{self, Write};

use super::space::StateSpace;
use crate::arrival::ArrivalKernel;
use crate::durations::DurationSet;
use crate::error::ModelError;

/// Row-stochastic sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from per-row `(column, probability)` lists. Repeated
    /// columns are summed and zero entries dropped.
    pub fn from_rows<I>(n: usize, rows: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = Vec<(usize, f64)>>,
    {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if c >= n {
                    return Err(ModelError::Dimension(format!("column {c} in a {n}-state chain")));
                }
                if v == 0.0 {
                    continue;
                }
                if last == Some(c) {
                    *vals.last_mut().expect("entry exists") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        if row_ptr.len() != n + 1 {
            return Err(ModelError::Dimension(format!(
                "{} rows for a {n}-state chain",
                row_ptr.len() - 1
            )));
        }
        Ok(Self { row_ptr, cols, vals })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(ModelError::Dimension(format!("row of length {} in {n}x{n}", bad.len())));
        }
        Self::from_rows(n, rows.iter().map(|r| r.iter().copied().enumerate().collect()))
    }

    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Row vector times matrix, `x P`.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += xi * v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| {
                let mut row = vec![0.0; self.len()];
                let (cols, vals) = self.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    row[c] = v;
                }
                row
            })
            .collect()
    }

    /// `(row, col, value)` triplets, one per line.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# row col value")?;
        for i in 0..self.len() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(w, "{i} {c} {v:.17e}")?;
            }
        }
        Ok(())
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&c, &v)| (i, c, v))
        })
    }
}

/// Inputs of the chain of one access category at a given contention level.
#[derive(Debug, Clone, Copy)]
pub struct ChainInputs<'a> {
    /// Average conditional collision probability.
    pub p_collision: f64,
    /// Probability of an arrival within one idle slot.
    pub rho: f64,
    pub durations: &'a DurationSet,
    pub kernel: ArrivalKernel,
}

/// `(queue length, probability)` pairs of a kernel row with positive mass.
fn nonzero(row: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
    row.iter().copied().enumerate().filter(|&(_, p)| p > 0.0)
}

/// Destination of a transition: a chain state, or a fresh backoff counter
/// drawn uniformly from the window of `stage` with `queue` packets queued.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) enum Target {
    State(usize),
    Draw { stage: u32, queue: u32 },
}

/// Assembles the transition matrix of the chain.
pub fn build_transition_matrix(
    space: &StateSpace,
    inputs: &ChainInputs<'_>,
) -> Result<TransitionMatrix, ModelError> {
    let rows = chain_rows(space, inputs)?;
    let rows = rows.into_iter().map(|row| {
        let mut out = Vec::with_capacity(row.len());
        for (t, pr) in row {
            match t {
                Target::State(i) => out.push((i, pr)),
                Target::Draw { stage, queue } => {
                    let w = space.window(stage);
                    let share = pr / f64::from(w + 1);
                    out.extend((0..=w as i32).map(|k| (space.at(stage, k, queue), share)));
                }
            }
        }
        out
    });
    TransitionMatrix::from_rows(space.len(), rows)
}

pub(super) fn chain_rows(space: &StateSpace, inputs: &ChainInputs<'_>) -> Result<Vec<Vec<(Target, f64)>>, ModelError> {
    let p = inputs.p_collision;
    if !(0.0..1.0).contains(&p) {
        return Err(ModelError::Degenerate {
            what: "collision probability outside [0, 1)",
        });
    }
    inputs.durations.check()?;
    let d = inputs.durations;
    let kernel = inputs.kernel;
    if kernel.queue_size != space.queue_size() {
        return Err(ModelError::Dimension(format!(
            "kernel buffer {} vs state space buffer {}",
            kernel.queue_size,
            space.queue_size()
        )));
    }
    if d.txop_exchanges != space.txop_exchanges() {
        return Err(ModelError::Dimension(format!(
            "{} TXOP exchanges vs state space with {}",
            d.txop_exchanges,
            space.txop_exchanges()
        )));
    }
    let qs = space.queue_size();
    let last_stage = space.stages() - 1;
    let n = space.txop_exchanges() as i32;

    // Queue kernels only depend on the starting queue length, so cache them.
    let rows_for = |t: f64, with_tx: bool| -> Result<Vec<Vec<f64>>, ModelError> {
        (0..=qs)
            .map(|l| {
                if with_tx {
                    if l == 0 {
                        Ok(Vec::new())
                    } else {
                        kernel.with_tx_row(t, l)
                    }
                } else {
                    kernel.no_tx_row(t, l)
                }
            })
            .collect()
    };
    let decrement = rows_for(d.backoff_slot, false)?;
    let success = rows_for(d.success, true)?;
    let collide = rows_for(d.collision, false)?;
    let burst = rows_for(d.exchange, true)?;
    let idle_busy = kernel.no_tx_row(d.busy_slot, 0)?;
    let idle_success = kernel.no_tx_row(d.success, 0)?;

    let state = |j, k, l| Target::State(space.at(j, k, l));
    let draw = |stage, queue| Target::Draw { stage, queue };
    let mut rows = Vec::with_capacity(space.len());
    for s in space.states() {
        let (j, k, l) = (s.stage, s.counter, s.queue);
        let mut row = Vec::new();
        if k >= 1 {
            // backoff or postbackoff countdown
            for (lp, pr) in nonzero(&decrement[l as usize]) {
                row.push((state(j, k - 1, lp as u32), pr));
            }
        } else if k == 0 && l == 0 {
            // idle: an arrival in an idle slot is sent at once; a busy slot
            // with arrivals starts a backoff
            let rho = inputs.rho;
            row.push((state(0, 0, 0), (1.0 - p) * (1.0 - rho) + p * idle_busy[0]));
            for lp in 1..=qs {
                row.push((draw(0, lp), p * idle_busy[lp as usize]));
            }
            for lp in 0..=qs {
                row.push((state(0, -1, lp), (1.0 - p) * rho * idle_success[lp as usize]));
            }
        } else if k == 0 {
            // transmission attempt with l >= 1 packets queued
            if l < qs {
                for (lp, pr) in nonzero(&success[l as usize]) {
                    row.push((state(0, -1, lp as u32), (1.0 - p) * pr));
                }
            } else {
                row.push((state(0, -1, qs - 1), 1.0 - p));
            }
            if j < last_stage {
                for (lp, pr) in nonzero(&collide[l as usize]) {
                    row.push((draw(j + 1, lp as u32), p * pr));
                }
            } else if l < qs {
                // retry limit reached: the head packet is dropped
                for (lp, pr) in nonzero(&success[l as usize]) {
                    row.push((draw(0, lp as u32), p * pr));
                }
            } else {
                row.push((draw(0, qs - 1), p));
            }
        } else if l == 0 || k == -n {
            // TXOP over (queue drained or limit reached): postbackoff, no time passes
            row.push((draw(0, l), 1.0));
        } else {
            // next SIFS-separated exchange of the current TXOP
            for (lp, pr) in nonzero(&burst[l as usize]) {
                row.push((state(0, k - 1, lp as u32), pr));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
