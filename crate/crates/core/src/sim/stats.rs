use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::SimError;
use crate::metrics::{AcMetrics, Metrics};

/// Packet bookkeeping over the whole run, warm-up included.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PacketLedger {
    pub generated: u64,
    pub delivered: u64,
    pub dropped_retry: u64,
    pub dropped_full: u64,
    /// Head-of-line packets with a channel access in progress at the end.
    pub in_flight: u64,
    /// Packets waiting behind the head of the line at the end.
    pub queued: u64,
}

impl PacketLedger {
    pub fn is_conserved(&self) -> bool {
        self.delivered + self.dropped_retry + self.dropped_full + self.in_flight + self.queued == self.generated
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DelayStats {
    pub count: u64,
    /// Seconds.
    pub sum: f64,
    pub sum_sq: f64,
    pub max: f64,
}

impl DelayStats {
    pub(crate) fn record(&mut self, seconds: f64) {
        self.count += 1;
        self.sum += seconds;
        self.sum_sq += seconds * seconds;
        self.max = self.max.max(seconds);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

/// Measurements of one access category, summed over its stations. Except
/// for `ledger`, everything covers the measurement window only.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AcSimStats {
    pub index: usize,
    pub name: String,
    pub stations: u32,
    pub generated: u64,
    pub delivered: u64,
    pub delivered_bits: u64,
    pub dropped_retry: u64,
    pub dropped_full: u64,
    /// Channel accesses that ended in a successful exchange.
    pub successes: u64,
    /// Transmission attempts that collided.
    pub collisions: u64,
    /// Most exchanges observed in one channel access.
    pub max_burst: u32,
    pub delay: DelayStats,
    pub access_delay: DelayStats,
    /// Station-seconds spent with `l` packets queued, summed over stations.
    pub queue_time: Vec<f64>,
    pub ledger: PacketLedger,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimStats {
    pub seed: u64,
    /// Length of the measurement window, seconds.
    pub measured: f64,
    pub idle_slots: u64,
    pub busy_slots: u64,
    /// Channel rate used to turn delivered bits into airtime.
    pub data_rate: f64,
    pub acs: Vec<AcSimStats>,
}

impl SimStats {
    pub fn is_conserved(&self) -> bool {
        self.acs.iter().all(|a| a.ledger.is_conserved())
    }

    pub fn idle_fraction(&self) -> f64 {
        let slots = self.idle_slots + self.busy_slots;
        if slots == 0 {
            1.0
        } else {
            self.idle_slots as f64 / slots as f64
        }
    }

    /// The run expressed in the analytic output schema.
    pub fn metrics(&self) -> Metrics {
        let slots = (self.idle_slots + self.busy_slots).max(1) as f64;
        let acs: Vec<AcMetrics> = self
            .acs
            .iter()
            .map(|a| {
                let lost = a.dropped_retry + a.dropped_full;
                let total_time: f64 = a.queue_time.iter().sum();
                AcMetrics {
                    index: a.index,
                    name: a.name.clone(),
                    throughput: a.delivered_bits as f64 / self.data_rate / self.measured,
                    success_prob: a.successes as f64 / slots,
                    access_delay: a.access_delay.mean(),
                    delay: a.delay.mean(),
                    loss_ratio: if a.generated == 0 { 0.0 } else { lost as f64 / a.generated as f64 },
                    queue: a
                        .queue_time
                        .iter()
                        .map(|t| if total_time > 0.0 { t / total_time } else { 0.0 })
                        .collect(),
                }
            })
            .collect();
        Metrics {
            p_idle: self.idle_fraction(),
            throughput: acs.iter().map(|a| a.throughput).sum(),
            acs,
        }
    }
}

/// Sample mean and 95% Student-t half-width of every metric over
/// independent runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Confidence {
    pub runs: usize,
    pub mean: Metrics,
    pub half_width: Metrics,
}

pub fn confidence(runs: &[Metrics]) -> Result<Confidence, SimError> {
    let n = runs.len();
    if n < 2 {
        return Err(SimError::TooFewRuns(n));
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("at least one degree of freedom")
        .inverse_cdf(0.975);
    let summarise = |values: Vec<f64>| -> (f64, f64) {
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, t * (var / n as f64).sqrt())
    };
    let mut mean = runs[0].clone();
    let mut half = runs[0].clone();
    let mut apply = |get: &dyn Fn(&Metrics) -> f64, set: &dyn Fn(&mut Metrics, f64)| {
        let (m, h) = summarise(runs.iter().map(get).collect());
        set(&mut mean, m);
        set(&mut half, h);
    };
    apply(&|m| m.p_idle, &|m, v| m.p_idle = v);
    apply(&|m| m.throughput, &|m, v| m.throughput = v);
    for a in 0..runs[0].acs.len() {
        apply(&|m| m.acs[a].throughput, &|m, v| m.acs[a].throughput = v);
        apply(&|m| m.acs[a].success_prob, &|m, v| m.acs[a].success_prob = v);
        apply(&|m| m.acs[a].access_delay, &|m, v| m.acs[a].access_delay = v);
        apply(&|m| m.acs[a].delay, &|m, v| m.acs[a].delay = v);
        apply(&|m| m.acs[a].loss_ratio, &|m, v| m.acs[a].loss_ratio = v);
        for l in 0..runs[0].acs[a].queue.len() {
            apply(&|m| m.acs[a].queue[l], &|m, v| m.acs[a].queue[l] = v);
        }
    }
    Ok(Confidence {
        runs: n,
        mean,
        half_width: half,
    })
}
