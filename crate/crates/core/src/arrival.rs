//! Poisson arrivals into a finite MAC queue.
//!
//! The two conditional queue kernels give the queue length after an interval
//! of length `t`, either without a departure (`no_tx`) or with exactly one
//! departure (`with_tx`). Arrivals beyond the buffer are discarded, so the
//! probability of every overflowing outcome is lumped into `l' = QS`.

use statrs::function::factorial::ln_factorial;

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalKernel {
    /// Packets per second.
    pub rate: f64,
    pub queue_size: u32,
}

impl ArrivalKernel {
    pub fn new(rate: f64, queue_size: u32) -> Self {
        Self { rate, queue_size }
    }

    /// Probability of exactly `k` arrivals in `t` seconds.
    pub fn count_prob(&self, k: u32, t: f64) -> f64 {
        let mean = self.rate * t;
        if mean <= 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        let k = u64::from(k);
        (-mean + k as f64 * mean.ln() - ln_factorial(k)).exp()
    }

    /// Probability that at least one packet arrives within one slot.
    pub fn rho(&self, slot: f64) -> f64 {
        -(-self.rate * slot).exp_m1()
    }

    fn check(&self, l: u32) -> Result<(), ModelError> {
        if l > self.queue_size {
            Err(ModelError::QueueIndex {
                index: l,
                queue_size: self.queue_size,
            })
        } else {
            Ok(())
        }
    }

    /// Queue length distribution after `t` seconds without a departure,
    /// starting from `l_before`. Entry `l'` of the result is `p_nt(l', t | l)`.
    pub fn no_tx_row(&self, t: f64, l_before: u32) -> Result<Vec<f64>, ModelError> {
        self.check(l_before)?;
        Ok(self.row_from(t, l_before))
    }

    /// Queue length distribution after `t` seconds during which the head
    /// packet left. Entry `l'` of the result is `p_st(l', t | l)`.
    pub fn with_tx_row(&self, t: f64, l_before: u32) -> Result<Vec<f64>, ModelError> {
        self.check(l_before)?;
        if l_before == 0 {
            return Err(ModelError::EmptyQueueTransmission);
        }
        Ok(self.row_from(t, l_before - 1))
    }

    /// Arrivals on top of `base` packets, truncated at the buffer size.
    fn row_from(&self, t: f64, base: u32) -> Vec<f64> {
        let qs = self.queue_size;
        let mut row = vec![0.0; qs as usize + 1];
        let mut partial = 0.0;
        for l in base..qs {
            let p = self.count_prob(l - base, t);
            row[l as usize] = p;
            partial += p;
        }
        row[qs as usize] = (1.0 - partial).clamp(0.0, 1.0);
        row
    }

    /// `p_nt(l_after, t | l_before)`; zero outside its support.
    pub fn no_tx(&self, l_after: u32, t: f64, l_before: u32) -> Result<f64, ModelError> {
        self.check(l_after)?;
        Ok(self.no_tx_row(t, l_before)?[l_after as usize])
    }

    /// `p_st(l_after, t | l_before)`; zero outside its support.
    pub fn with_tx(&self, l_after: u32, t: f64, l_before: u32) -> Result<f64, ModelError> {
        self.check(l_after)?;
        Ok(self.with_tx_row(t, l_before)?[l_after as usize])
    }
}
