//! Output measures of a solved model: normalised throughput, slot
//! probabilities, access and total delay, loss ratio and queue occupancy.

use std::io::{self, Write};

use serde::Serialize;

use crate::config::StationMode;
use crate::dtmc::StateSpace;
use crate::error::ModelError;
use crate::solver::SolvedModel;
use crate::zones::ZoneLayout;

const BISECTION_TOL: f64 = 1e-12;

/// Per access category results. Simulator runs fill the same structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcMetrics {
    pub index: usize,
    pub name: String,
    /// Fraction of channel time carrying this category's payload.
    pub throughput: f64,
    /// Probability that a backoff slot holds a successful access of this
    /// category.
    pub success_prob: f64,
    /// Mean head-of-line access delay, seconds.
    pub access_delay: f64,
    /// Mean time from arrival to the end of the acknowledged exchange,
    /// seconds.
    pub delay: f64,
    pub loss_ratio: f64,
    /// `queue[l]` is the probability of `l` queued packets.
    pub queue: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// Probability that a backoff slot is idle.
    pub p_idle: f64,
    pub throughput: f64,
    pub acs: Vec<AcMetrics>,
}

impl Metrics {
    pub fn ac(&self, index: usize) -> Option<&AcMetrics> {
        self.acs.iter().find(|a| a.index == index)
    }

    /// CSV column names; `acs` fixes the per-category column order.
    pub fn csv_header(names: &[String]) -> Vec<String> {
        let mut cols = vec!["p_idle".to_string(), "s_total".to_string()];
        for n in names {
            for m in ["s", "p_s", "access_delay", "delay", "plr"] {
                cols.push(format!("{m}_{n}"));
            }
        }
        cols
    }

    /// Values in `csv_header` order; categories without flows are empty.
    pub fn csv_values(&self, names: &[String]) -> Vec<String> {
        let mut out = vec![fmt(self.p_idle), fmt(self.throughput)];
        for n in names {
            match self.acs.iter().find(|a| &a.name == n) {
                Some(a) => out.extend(
                    [a.throughput, a.success_prob, a.access_delay, a.delay, a.loss_ratio].map(fmt),
                ),
                None => out.extend(std::iter::repeat_n(String::new(), 5)),
            }
        }
        out
    }

    pub fn write_json<W: Write>(&self, w: W) -> io::Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(io::Error::other)
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else {
        String::new()
    }
}

/// Idle probability of a backoff slot from `gammas[n]`, the probability of no
/// transmission in the `(n + 1)`-th slot after the shortest AIFS, for
/// `n = 0..=d0`. Solves
/// `p = Σ_{n<d0} γ_n (1 − p) p^n + γ_{d0} p^{d0}` by bisection.
pub fn idle_probability(gammas: &[f64]) -> Result<f64, ModelError> {
    let Some((&last, head)) = gammas.split_last() else {
        return Err(ModelError::Dimension("no AIFS slot probabilities".into()));
    };
    let d0 = head.len() as i32;
    let f = |p: f64| {
        let busy: f64 = head.iter().enumerate().map(|(n, g)| g * (1.0 - p) * p.powi(n as i32)).sum();
        busy + last * p.powi(d0) - p
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_hi.abs() <= BISECTION_TOL {
        return Ok(1.0);
    }
    if f_lo < -BISECTION_TOL || f_hi > BISECTION_TOL {
        return Err(ModelError::NoIdleRoot);
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Probability that a backoff slot holds a successful transmission of
/// category `i`, summed over the slot positions after a busy period.
pub fn success_probability(layout: &ZoneLayout, taus: &[f64], p_idle: f64, i: usize) -> f64 {
    let Some(di) = layout.offset(i) else {
        return 0.0;
    };
    let tau_i = taus[i];
    let flows = layout.flows();
    if tau_i <= 0.0 || flows[i] == 0 {
        return 0.0;
    }
    let d0 = layout.max_offset();
    let active: Vec<(usize, u32)> = (0..taus.len())
        .filter_map(|k| layout.offset(k).map(|d| (k, d)))
        .collect();
    // probability that nobody else transmits among categories with d ≤ bound
    let quiet = |bound: u32| -> f64 {
        active
            .iter()
            .filter(|&&(_, d)| d <= bound)
            .map(|&(k, _)| match layout.mode() {
                StationMode::Heterogeneous => (1.0 - taus[k]).powi(flows[k] as i32),
                StationMode::MultiAc => {
                    let own = if k > i { 1.0 - taus[k] } else { 1.0 };
                    (1.0 - taus[k]).powi(flows[k] as i32 - 1) * own
                }
            })
            .product()
    };
    let prefactor = match layout.mode() {
        StationMode::Heterogeneous => f64::from(flows[i]) * tau_i / (1.0 - tau_i),
        // the product already leaves out this station's own copy of `i`
        StationMode::MultiAc => f64::from(flows[i]) * tau_i,
    };
    let p_busy = 1.0 - p_idle;
    let mut sum: f64 = (di + 1..=d0)
        .map(|n| p_busy * p_idle.powi(n as i32 - 1) * quiet(n - 1))
        .sum();
    sum += p_idle.powi(d0 as i32) * quiet(d0);
    (prefactor * sum).clamp(0.0, 1.0)
}

/// Recursive head-of-line access delays of one category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccessDelays {
    /// `a[j][k]`: time from backoff state `(j, k)` to successful delivery.
    pub a: Vec<Vec<f64>>,
    /// Same, conditioned on the packet being dropped at the retry limit.
    pub a_drop: Vec<Vec<f64>>,
    pub mean: f64,
    pub mean_drop: f64,
    /// Access delay of a packet arriving at an idle, empty station.
    pub idle: f64,
    /// Probability of a drop at the retry limit.
    pub p_drop: f64,
    pub p_collision: f64,
    #[serde(skip)]
    pub durations: DelayDurations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDurations {
    pub success: f64,
    pub collision: f64,
    pub backoff_slot: f64,
    pub busy_slot: f64,
    /// Idle slot length.
    pub slot: f64,
    /// Spacing of exchanges inside a TXOP.
    pub exchange: f64,
    /// The AIFS that `success` ends with.
    pub aifs: f64,
}

impl AccessDelays {
    pub fn new(windows: &[u32], p_collision: f64, t: DelayDurations) -> Self {
        let r = windows.len();
        let fill = |first: f64| -> Vec<f64> {
            (0..=windows[r - 1]).map(|k| first + f64::from(k) * t.backoff_slot).collect()
        };
        let mean = |row: &[f64]| row.iter().sum::<f64>() / row.len() as f64;
        let mut a = vec![Vec::new(); r];
        let mut a_drop = vec![Vec::new(); r];
        a[r - 1] = fill(t.success);
        a_drop[r - 1] = fill(t.collision);
        for j in (0..r).rev() {
            a[j].truncate(windows[j] as usize + 1);
            a_drop[j].truncate(windows[j] as usize + 1);
            if j == 0 {
                break;
            }
            let first = (1.0 - p_collision) * t.success + p_collision * (mean(&a[j]) + t.collision);
            let first_drop = mean(&a_drop[j]) + t.collision;
            a[j - 1] = fill(first);
            a_drop[j - 1] = fill(first_drop);
        }
        let m = mean(&a[0]);
        let p_drop = p_collision.powi(r as i32);
        let idle = t.success * (1.0 - p_collision) + (m + t.busy_slot) * p_collision * (1.0 - p_drop);
        Self {
            mean: m,
            mean_drop: mean(&a_drop[0]),
            a,
            a_drop,
            idle,
            p_drop,
            p_collision,
            durations: t,
        }
    }

    /// `D(−1, −1, p)` for `p = 0..=max_position`: remaining delay of the
    /// packet at queue position `p` when a fresh access begins.
    pub fn fresh_access(&self, txop_exchanges: u32, exchange: f64, max_position: u32) -> Vec<f64> {
        let n = txop_exchanges as i64;
        let mut d = vec![0.0; max_position as usize + 1];
        let at = |d: &[f64], p: i64| if p <= 0 { 0.0 } else { d[p as usize] };
        for p in 1..=i64::from(max_position) {
            d[p as usize] = if p == 1 {
                self.mean * (1.0 - self.p_drop)
            } else {
                (1.0 - self.p_drop) * (self.mean + (n - 1).min(p - 1) as f64 * exchange + at(&d, p - n))
                    + self.p_drop * (self.mean_drop + at(&d, p - 1))
            };
        }
        d
    }
}

/// Delay of a packet that arrives when the chain enters each state, `None`
/// where no arrival is counted. An arrival that finds `l` packets queued
/// becomes position `l + 1`; states that take no time and full-queue states
/// (the arrival is discarded) are left out.
pub fn state_delays(space: &StateSpace, delays: &AccessDelays, exchange: f64) -> Vec<Option<f64>> {
    let n = space.txop_exchanges() as i64;
    let qs = space.queue_size();
    let fresh = delays.fresh_access(space.txop_exchanges(), exchange, qs + 1);
    let tail = |p: i64| if p <= 0 { 0.0 } else { fresh[p as usize] };
    space
        .states()
        .iter()
        .map(|s| {
            let k = i64::from(s.counter);
            let zero_time = k < 0 && (k == -n || s.queue == 0);
            if zero_time || s.queue == qs {
                return None;
            }
            let pos = i64::from(s.queue) + 1;
            let d = if k < 0 {
                let room = n + k;
                room.min(pos) as f64 * exchange + tail(pos - room)
            } else if s.queue == 0 {
                if k == 0 {
                    delays.idle
                } else {
                    delays.a[s.stage as usize][k as usize]
                }
            } else {
                let (j, k) = (s.stage as usize, k as usize);
                (1.0 - delays.p_drop) * (delays.a[j][k] + (n - 1).min(pos - 1) as f64 * exchange + tail(pos - n))
                    + delays.p_drop * (delays.a_drop[j][k] + tail(pos - 1))
            };
            Some(d)
        })
        .collect()
}

/// Mean delay of a delivered packet: `state_delays` averaged with the
/// normalised steady-state probabilities.
pub fn mean_delay(space: &StateSpace, b: &[f64], delays: &AccessDelays, exchange: f64) -> Result<f64, ModelError> {
    let mut total = 0.0;
    let mut mass = 0.0;
    for (d, &w) in state_delays(space, delays, exchange).into_iter().zip(b) {
        if let Some(d) = d {
            total += w * d;
            mass += w;
        }
    }
    if mass <= 0.0 {
        return Err(ModelError::Degenerate { what: "arrival-state weights" });
    }
    Ok(total / mass)
}

/// Mean delay of a delivered packet as seen by Poisson arrivals, from
/// arrival to the end of the acknowledged exchange.
///
/// Arrivals see states in proportion to the time the chain spends in them,
/// so each state is weighted by `b` times its mean sojourn, and an arrival
/// lands part-way through the sojourn: the full step in `state_delays` is
/// replaced by the mean residual step `E[T²] / 2E[T]`. An arrival at the
/// idle state falls into a busy slot with probability proportional to the
/// busy slot's length; it then waits out the rest of it and contends, while
/// one landing in an idle slot goes out in the next slot.
pub fn arrival_delay(space: &StateSpace, b: &[f64], delays: &AccessDelays) -> Result<f64, ModelError> {
    let t = &delays.durations;
    let p = delays.p_collision;
    // (mean, mean residual) of a step that lasts `x` with probability `w`
    let step = |parts: [(f64, f64); 2]| -> (f64, f64) {
        let m: f64 = parts.iter().map(|(w, x)| w * x).sum();
        let m2: f64 = parts.iter().map(|(w, x)| w * x * x).sum();
        (m, m2 / (2.0 * m))
    };
    let backoff = step([(1.0 - p, t.slot), (p, t.busy_slot)]);
    let attempt = step([(1.0 - p, t.success), (p, t.collision)]);
    let mut total = 0.0;
    let mut mass = 0.0;
    for ((s, d), &w) in space.states().iter().zip(state_delays(space, delays, t.exchange)).zip(b) {
        let Some(d) = d else { continue };
        let (sojourn, delay) = match (s.counter, s.queue) {
            (k, _) if k < 0 => (t.exchange, d - t.exchange / 2.0),
            (0, 0) => {
                let idle = (1.0 - p) * t.slot;
                let busy = p * t.busy_slot;
                let delay = idle * (t.slot / 2.0 + t.success)
                    + busy * (t.busy_slot / 2.0 + delays.mean * (1.0 - delays.p_drop));
                (idle + busy, delay / (idle + busy))
            }
            (0, _) => (attempt.0, d - attempt.0 + attempt.1),
            _ => (backoff.0, d - backoff.0 + backoff.1),
        };
        total += w * sojourn * delay;
        mass += w * sojourn;
    }
    if !(mass > 0.0) {
        return Err(ModelError::Degenerate { what: "arrival-state weights" });
    }
    Ok(total / mass - t.aifs)
}

/// Retry-limit drops of accepted packets plus arrivals to a full queue.
pub fn packet_loss_ratio(space: &StateSpace, b: &[f64], p_collision: f64, retry_limit: u32) -> f64 {
    let p_drop = p_collision.powi(retry_limit as i32);
    let qs = space.queue_size();
    let mut accepted = 0.0;
    let mut full = 0.0;
    for (s, &w) in space.states().iter().zip(b) {
        if s.counter < 0 {
            continue;
        }
        if s.queue == qs {
            full += w;
        } else {
            accepted += w;
        }
    }
    (accepted * p_drop + full).clamp(0.0, 1.0)
}

/// Marginal queue-length distribution, TXOP states included.
pub fn queue_distribution(space: &StateSpace, b: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; space.queue_size() as usize + 1];
    for (s, &w) in space.states().iter().zip(b) {
        q[s.queue as usize] += w;
    }
    let total: f64 = q.iter().sum();
    if total > 0.0 {
        q.iter_mut().for_each(|v| *v /= total);
    }
    q
}

/// All output measures of a solved model.
pub fn compute(model: &SolvedModel) -> Result<Metrics, ModelError> {
    let scenario = &model.scenario;
    let phy = &scenario.phy;
    let layout = &model.layout;
    let taus = model.taus();
    let gammas: Vec<f64> = (0..=layout.max_offset()).map(|n| layout.gamma(&taus, n)).collect();
    let p_idle = idle_probability(&gammas)?;

    let active = scenario.active();
    let aifs_min = active.iter().map(|&i| scenario.acs[i].aifs(phy)).fold(f64::INFINITY, f64::min);
    let p_s: Vec<f64> = (0..taus.len()).map(|i| success_probability(layout, &taus, p_idle, i)).collect();

    // busy periods measured up to the first backoff slot of the next idle period
    let mut busy_success = 0.0;
    let mut t_collision: f64 = 0.0;
    for (i, ac) in model.acs.iter().enumerate() {
        if let Some(ac) = ac {
            let d = &ac.durations;
            busy_success += p_s[i] * (d.txop - d.aifs + aifs_min);
            t_collision = t_collision.max(d.collision - d.aifs + aifs_min);
        }
    }
    let p_collision_slot = (1.0 - p_idle - p_s.iter().sum::<f64>()).max(0.0);
    let denominator = p_idle * phy.slot + busy_success + p_collision_slot * t_collision;
    if !(denominator > 0.0) {
        return Err(ModelError::Degenerate { what: "throughput denominator" });
    }

    let mut acs = Vec::new();
    for (i, sol) in model.acs.iter().enumerate() {
        let Some(sol) = sol else { continue };
        let cfg = &scenario.acs[i];
        let d = &sol.durations;
        let space = &sol.steady.space;
        let b = &sol.steady.b;
        let throughput = p_s[i] * d.exchanges_per_txop(phy.sifs) * d.payload / denominator;
        let windows: Vec<u32> = (0..space.stages()).map(|j| space.window(j)).collect();
        let delays = AccessDelays::new(
            &windows,
            sol.p_collision,
            DelayDurations {
                success: d.success,
                collision: d.collision,
                backoff_slot: d.backoff_slot,
                busy_slot: d.busy_slot,
                slot: phy.slot,
                exchange: d.exchange,
                aifs: d.aifs,
            },
        );
        let delay = if cfg.arrival_rate > 0.0 { arrival_delay(space, b, &delays)? } else { 0.0 };
        acs.push(AcMetrics {
            index: i,
            name: cfg.name.clone(),
            throughput,
            success_prob: p_s[i],
            access_delay: delays.mean,
            delay,
            loss_ratio: packet_loss_ratio(space, b, sol.p_collision, cfg.retry_limit),
            queue: queue_distribution(space, b),
        });
    }
    let throughput = acs.iter().map(|a| a.throughput).sum();
    Ok(Metrics { p_idle, throughput, acs })
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: DelayDurations = DelayDurations {
        success: 300e-6,
        collision: 280e-6,
        backoff_slot: 20e-6,
        busy_slot: 290e-6,
        slot: 9e-6,
        exchange: 250e-6,
        aifs: 37e-6,
    };

    #[test]
    fn idle_probability_examples() {
        assert!((idle_probability(&[0.8]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(idle_probability(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        let p = idle_probability(&[0.99, 0.9]).unwrap();
        let rhs = 0.99 * (1.0 - p) + 0.9 * p;
        assert!((p - rhs).abs() < 1e-10);
    }

    #[test]
    fn single_station_succeeds_alone() {
        let layout = ZoneLayout::from_parts(vec![Some(0)], vec![1], StationMode::Heterogeneous, 15).unwrap();
        let tau = 0.07;
        let p_idle = idle_probability(&[layout.gamma(&[tau], 0)]).unwrap();
        assert!((p_idle - (1.0 - tau)).abs() < 1e-12);
        let p_s = success_probability(&layout, &[tau], p_idle, 0);
        assert!((p_s - tau).abs() < 1e-12);
        assert_eq!(success_probability(&layout, &[0.0], 1.0, 0), 0.0);
    }

    #[test]
    fn slot_probabilities_partition_a_slot() {
        // idle + successes ≤ 1 with the remainder being collisions
        let layout =
            ZoneLayout::from_parts(vec![Some(1), Some(0)], vec![5, 5], StationMode::Heterogeneous, 63).unwrap();
        let taus = [0.05, 0.08];
        let gammas: Vec<f64> = (0..=1).map(|n| layout.gamma(&taus, n)).collect();
        let p_idle = idle_probability(&gammas).unwrap();
        let s: f64 = (0..2).map(|i| success_probability(&layout, &taus, p_idle, i)).sum();
        assert!(p_idle + s < 1.0);
        assert!(success_probability(&layout, &taus, p_idle, 1) > success_probability(&layout, &taus, p_idle, 0));
    }

    #[test]
    fn collision_free_access_delay_is_affine() {
        let d = AccessDelays::new(&[7, 15, 31], 0.0, T);
        for (j, row) in d.a.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let expected = k as f64 * T.backoff_slot + T.success;
                assert!((v - expected).abs() < 1e-15, "A({j},{k})");
            }
            assert!((row[0] - T.success).abs() < 1e-15);
        }
        assert!((d.mean - (3.5 * T.backoff_slot + T.success)).abs() < 1e-15);
        assert_eq!(d.p_drop, 0.0);
        assert!((d.idle - T.success).abs() < 1e-15);
    }

    #[test]
    fn single_attempt_access_delay() {
        let d = AccessDelays::new(&[15], 0.3, T);
        let expected: f64 = (0..16).map(|k| k as f64 * T.backoff_slot + T.success).sum::<f64>() / 16.0;
        assert!((d.mean - expected).abs() < 1e-15);
        assert!((d.p_drop - 0.3).abs() < 1e-15);
    }

    #[test]
    fn access_delay_recursion() {
        let p = 0.2;
        let w = [3, 7];
        let d = AccessDelays::new(&w, p, T);
        let mean1 = (0..8).map(|k| T.success + k as f64 * T.backoff_slot).sum::<f64>() / 8.0;
        assert!((d.a[0][0] - ((1.0 - p) * T.success + p * (mean1 + T.collision))).abs() < 1e-15);
        let mean1_drop = (0..8).map(|k| T.collision + k as f64 * T.backoff_slot).sum::<f64>() / 8.0;
        assert!((d.a_drop[0][0] - (mean1_drop + T.collision)).abs() < 1e-15);
        for row in d.a.iter().chain(&d.a_drop) {
            for pair in row.windows(2) {
                assert!((pair[1] - pair[0] - T.backoff_slot).abs() < 1e-15);
            }
        }
        assert!(d.a[0][0] >= T.success);
    }

    #[test]
    fn fresh_access_recursion() {
        let d = AccessDelays::new(&[7, 15], 0.1, T);
        let exchange = 250e-6;
        let f = d.fresh_access(3, exchange, 6);
        assert_eq!(f[0], 0.0);
        assert!((f[1] - d.mean * (1.0 - d.p_drop)).abs() < 1e-15);
        for p in 2..=6i64 {
            let at = |q: i64| if q <= 0 { 0.0 } else { f[q as usize] };
            let chi = (1.0 - d.p_drop) * (d.mean + (2.min(p - 1)) as f64 * exchange + at(p - 3))
                + d.p_drop * (d.mean_drop + at(p - 1));
            assert!((f[p as usize] - chi).abs() < 1e-15);
        }
    }

    #[test]
    fn idle_station_delay_is_idle_access_delay() {
        let space = StateSpace::from_windows(vec![7, 15], 1, 3);
        let mut b = vec![0.0; space.len()];
        b[space.index(0, 0, 0).unwrap()] = 1.0;
        let d = AccessDelays::new(&[7, 15], 0.1, T);
        assert!((mean_delay(&space, &b, &d, 250e-6).unwrap() - d.idle).abs() < 1e-15);
    }

    #[test]
    fn single_slot_queue_delay() {
        // QS = 1: an arrival behind a backlogged head is discarded, so only
        // empty-queue states contribute
        let space = StateSpace::from_windows(vec![7, 15], 1, 1);
        let d = AccessDelays::new(&[7, 15], 0.1, T);
        let mut b = vec![0.0; space.len()];
        b[space.index(0, 3, 0).unwrap()] = 0.5;
        b[space.index(1, 3, 1).unwrap()] = 0.5;
        assert!((mean_delay(&space, &b, &d, 250e-6).unwrap() - d.a[0][3]).abs() < 1e-15);
    }

    #[test]
    fn backlogged_arrival_waits_for_head() {
        let space = StateSpace::from_windows(vec![7, 15], 2, 4);
        let d = AccessDelays::new(&[7, 15], 0.1, T);
        let exchange = 250e-6;
        let f = d.fresh_access(2, exchange, 5);
        let mut b = vec![0.0; space.len()];
        b[space.index(1, 2, 2).unwrap()] = 1.0;
        let expected = (1.0 - d.p_drop) * (d.a[1][2] + exchange + f[1]) + d.p_drop * (d.a_drop[1][2] + f[2]);
        assert!((mean_delay(&space, &b, &d, exchange).unwrap() - expected).abs() < 1e-15);

        // one exchange left in the TXOP: the head packet takes it and the
        // arrival waits for a fresh access
        b.iter_mut().for_each(|v| *v = 0.0);
        b[space.index(0, -1, 1).unwrap()] = 1.0;
        let expected = exchange + f[1];
        assert!((mean_delay(&space, &b, &d, exchange).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn arrival_at_quiet_idle_station_waits_half_a_slot() {
        let space = StateSpace::from_windows(vec![7, 15], 1, 3);
        let mut b = vec![0.0; space.len()];
        b[space.index(0, 0, 0).unwrap()] = 1.0;
        let d = AccessDelays::new(&[7, 15], 0.0, T);
        let expected = T.slot / 2.0 + T.success - T.aifs;
        assert!((arrival_delay(&space, &b, &d).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn busy_slots_draw_arrivals_by_length() {
        let p = 0.1;
        let space = StateSpace::from_windows(vec![7, 15], 1, 3);
        let mut b = vec![0.0; space.len()];
        b[space.index(0, 0, 0).unwrap()] = 1.0;
        let d = AccessDelays::new(&[7, 15], p, T);
        let (idle, busy) = ((1.0 - p) * T.slot, p * T.busy_slot);
        let in_busy = busy / (idle + busy);
        assert!(in_busy > 0.7);
        let expected = (1.0 - in_busy) * (T.slot / 2.0 + T.success)
            + in_busy * (T.busy_slot / 2.0 + d.mean * (1.0 - d.p_drop))
            - T.aifs;
        assert!((arrival_delay(&space, &b, &d).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn states_are_weighted_by_sojourn() {
        // a postbackoff state and a TXOP state with equal chain mass
        let space = StateSpace::from_windows(vec![7, 15], 3, 4);
        let d = AccessDelays::new(&[7, 15], 0.0, T);
        let mut b = vec![0.0; space.len()];
        let (pb, tx) = (space.index(0, 3, 0).unwrap(), space.index(0, -1, 2).unwrap());
        b[pb] = 0.5;
        b[tx] = 0.5;
        let full = state_delays(&space, &d, T.exchange);
        let at_pb = full[pb].unwrap() - T.slot / 2.0;
        let at_tx = full[tx].unwrap() - T.exchange / 2.0;
        let expected = (T.slot * at_pb + T.exchange * at_tx) / (T.slot + T.exchange) - T.aifs;
        assert!((arrival_delay(&space, &b, &d).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn loss_ratio_arithmetic() {
        let space = StateSpace::from_windows(vec![1], 1, 1);
        let mut b = vec![0.0; space.len()];
        b[space.index(0, 0, 0).unwrap()] = 0.4;
        b[space.index(0, 1, 1).unwrap()] = 0.3;
        b[space.index(0, 0, 1).unwrap()] = 0.2;
        b[space.index(0, -1, 0).unwrap()] = 0.1;
        let p = 0.25;
        assert!((packet_loss_ratio(&space, &b, p, 1) - (0.4 * p + 0.5)).abs() < 1e-15);
        let q = queue_distribution(&space, &b);
        assert!((q[0] - 0.5).abs() < 1e-15 && (q[1] - 0.5).abs() < 1e-15);
    }
}
