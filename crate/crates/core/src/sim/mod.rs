//! Slot-level discrete-event simulator of EDCA stations.
//!
//! Time is kept in integer nanoseconds. After every busy period the medium
//! is idle from `t_end`, and slot boundary `m` falls at
//! `t_end + SIFS + m·slot`; a station with AIFSN `a` completes its AIFS at
//! boundary `a`. From then on, at every boundary, it either transmits (backoff
//! counter zero) or decrements its counter, so a busy slot costs every
//! deferring station exactly one decrement. Stations carry a single access
//! category each.

mod stats;
mod traffic;

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use stats::{confidence, AcSimStats, Confidence, DelayStats, PacketLedger, SimStats};
pub use traffic::TrafficModel;

use crate::config::{Scenario, StationMode};
use crate::durations::DurationSet;
use crate::error::{ConfigError, SimError};
use traffic::{ArrivalStream, NEVER};

/// Longest run whose nanosecond clock stays far from overflow.
pub const MAX_DURATION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub seed: u64,
    /// Simulated time, seconds.
    pub duration: f64,
    /// Initial stretch excluded from the measurements, seconds.
    pub warmup: f64,
}

impl SimOptions {
    /// Warm-up of a tenth of the run, capped at two seconds.
    pub fn new(seed: u64, duration: f64) -> Self {
        Self {
            seed,
            duration,
            warmup: (0.1 * duration).min(2.0),
        }
    }
}

/// Simulate `duration` seconds of `scenario` with one arrival process per
/// access category.
pub fn run(scenario: &Scenario, traffic: &[TrafficModel], seed: u64, duration: f64) -> Result<SimStats, SimError> {
    run_with(scenario, traffic, &SimOptions::new(seed, duration), None)
}

/// Like [`run`], optionally writing one line per event
/// (`time_ns station event queue_len`) to `trace`.
pub fn run_with(
    scenario: &Scenario,
    traffic: &[TrafficModel],
    options: &SimOptions,
    trace: Option<&mut dyn Write>,
) -> Result<SimStats, SimError> {
    scenario.validate()?;
    if scenario.stations != StationMode::Heterogeneous {
        return Err(SimError::MultiAcUnsupported);
    }
    if traffic.len() != scenario.acs.len() {
        return Err(SimError::Arrivals {
            expected: scenario.acs.len(),
            got: traffic.len(),
        });
    }
    let d = options.duration;
    if !(d.is_finite() && d > 0.0 && d <= MAX_DURATION) {
        return Err(SimError::Duration { got: d, max: MAX_DURATION });
    }
    if !(options.warmup.is_finite() && options.warmup >= 0.0 && options.warmup < d) {
        return Err(ConfigError::invalid("warmup", "must lie in [0, duration)").into());
    }
    let mut sim = Simulator::new(scenario, traffic, options, trace)?;
    sim.run()?;
    Ok(sim.finish())
}

fn ns(seconds: f64) -> u64 {
    (seconds * 1e9).round() as u64
}

/// Per-category constants in nanoseconds.
struct Class {
    aifsn: u64,
    windows: Vec<u32>,
    retry_limit: u32,
    queue_size: usize,
    payload_bits: u64,
    /// Busy time of a lone exchange, up to the moment the medium is idle.
    success: u64,
    /// Busy time of a collision including the response timeout.
    collision: u64,
    /// Spacing of consecutive exchanges inside one TXOP.
    exchange: u64,
    sifs: u64,
    txop_limit: u64,
}

impl Class {
    /// Whether exchange number `n + 1` still ends within the TXOP limit.
    fn fits(&self, n: u64) -> bool {
        (n + 1) * self.exchange - self.sifs <= self.txop_limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Access {
    /// No backoff pending; the next packet may go out at the first boundary.
    Idle,
    Backoff(u32),
}

struct Station {
    class: usize,
    stage: u32,
    access: Access,
    /// Arrival times of queued packets, head of line first.
    queue: VecDeque<u64>,
    /// When the head packet started contending.
    head_since: u64,
    /// Time up to which the queue-length histogram has been integrated.
    observed: u64,
    arrivals: ArrivalStream,
    rng: ChaCha8Rng,
}

struct Simulator<'a> {
    classes: Vec<Class>,
    stations: Vec<Station>,
    stats: SimStats,
    slot: u64,
    sifs: u64,
    warmup: u64,
    horizon: u64,
    /// End of the last busy period.
    t_end: u64,
    trace: Option<&'a mut dyn Write>,
}

impl<'a> Simulator<'a> {
    fn new(
        scenario: &Scenario,
        traffic: &[TrafficModel],
        options: &SimOptions,
        trace: Option<&'a mut dyn Write>,
    ) -> Result<Self, SimError> {
        let phy = &scenario.phy;
        let mut classes = Vec::new();
        let mut stations = Vec::new();
        let mut acs = Vec::new();
        for (i, ac) in scenario.acs.iter().enumerate() {
            let d = DurationSet::fixed(ac, phy, scenario.access)
                .map_err(|e| ConfigError::invalid(format!("ac[{i}]"), e.to_string()))?;
            let windows: Vec<u32> = (0..ac.retry_limit).map(|j| ac.cw_at_stage(j)).collect::<Result<_, _>>()?;
            classes.push(Class {
                aifsn: u64::from(ac.aifsn),
                windows,
                retry_limit: ac.retry_limit,
                queue_size: ac.queue_size as usize,
                payload_bits: u64::from(ac.payload_bits),
                success: ns(d.success - d.aifs),
                collision: ns(d.collision - d.aifs),
                exchange: ns(d.exchange),
                sifs: ns(phy.sifs),
                txop_limit: ns(ac.txop_limit),
            });
            acs.push(AcSimStats {
                index: i,
                name: ac.name.clone(),
                stations: ac.flows,
                queue_time: vec![0.0; ac.queue_size as usize + 1],
                ..Default::default()
            });
            for _ in 0..ac.flows {
                let s = stations.len() as u64;
                let stream = |n: u64| {
                    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                    rng.set_stream(n);
                    rng
                };
                stations.push(Station {
                    class: i,
                    stage: 0,
                    access: Access::Idle,
                    queue: VecDeque::with_capacity(ac.queue_size as usize),
                    head_since: 0,
                    observed: 0,
                    arrivals: ArrivalStream::new(traffic[i], ac.arrival_rate, stream(2 * s + 1)),
                    rng: stream(2 * s),
                });
            }
        }
        let mut sim = Self {
            classes,
            stations,
            stats: SimStats {
                seed: options.seed,
                measured: options.duration - options.warmup,
                data_rate: phy.data_rate,
                acs,
                ..Default::default()
            },
            slot: ns(phy.slot),
            sifs: ns(phy.sifs),
            warmup: ns(options.warmup),
            horizon: ns(options.duration),
            t_end: 0,
            trace,
        };
        // every station starts as if its previous access had just ended
        for s in 0..sim.stations.len() {
            sim.draw(s, 0)?;
        }
        Ok(sim)
    }

    fn boundary(&self, m: u64) -> u64 {
        self.t_end + self.sifs + m * self.slot
    }

    fn log(&mut self, t: u64, s: usize, event: &str) -> Result<(), SimError> {
        if let Some(w) = self.trace.as_mut() {
            writeln!(w, "{t} {s} {event} {}", self.stations[s].queue.len()).map_err(SimError::Trace)?;
        }
        Ok(())
    }

    fn measuring(&self, t: u64) -> bool {
        t >= self.warmup && t < self.horizon
    }

    /// Integrate the queue-length histogram of station `s` up to `t`.
    fn observe(&mut self, s: usize, t: u64) {
        let st = &mut self.stations[s];
        let lo = st.observed.max(self.warmup);
        let hi = t.min(self.horizon);
        if hi > lo {
            self.stats.acs[st.class].queue_time[st.queue.len()] += (hi - lo) as f64 * 1e-9;
        }
        st.observed = st.observed.max(t);
    }

    fn draw(&mut self, s: usize, stage: u32) -> Result<(), SimError> {
        let st = &mut self.stations[s];
        let w = self.classes[st.class].windows[stage as usize];
        let c = st.rng.gen_range(0..=w);
        st.stage = stage;
        st.access = Access::Backoff(c);
        let t = self.t_end;
        self.log(t, s, &format!("draw:{stage}:{c}"))
    }

    /// Enqueue every arrival of station `s` up to and including `t`. An
    /// arrival to an idle station while the medium is busy (before `busy_until`)
    /// starts a backoff.
    fn arrivals_until(&mut self, s: usize, t: u64, busy_until: Option<u64>) -> Result<(), SimError> {
        loop {
            let at = self.stations[s].arrivals.peek();
            if at == NEVER || at > t {
                return Ok(());
            }
            self.observe(s, at);
            let st = &mut self.stations[s];
            st.arrivals.advance();
            let class = &self.classes[st.class];
            let ac = &mut self.stats.acs[st.class];
            ac.ledger.generated += 1;
            let counted = at >= self.warmup && at < self.horizon;
            if counted {
                ac.generated += 1;
            }
            if st.queue.len() >= class.queue_size {
                ac.ledger.dropped_full += 1;
                if counted {
                    ac.dropped_full += 1;
                }
                self.log(at, s, "drop_full")?;
                continue;
            }
            if st.queue.is_empty() {
                st.head_since = at;
            }
            st.queue.push_back(at);
            let start_backoff = st.access == Access::Idle && busy_until.is_some_and(|b| at < b);
            self.log(at, s, "arrive")?;
            if start_backoff {
                self.draw(s, 0)?;
            }
        }
    }

    /// Boundary at which station `s` would transmit in the current idle
    /// period, given it is idle and its next arrival is at `at`.
    fn first_boundary_after(&self, a: u64, at: u64) -> u64 {
        let start = self.boundary(a);
        if at <= start {
            a
        } else {
            a + (at - start).div_ceil(self.slot)
        }
    }

    fn candidate(&self, s: usize) -> u64 {
        let st = &self.stations[s];
        let a = self.classes[st.class].aifsn;
        match st.access {
            Access::Backoff(c) => a + u64::from(c),
            Access::Idle => {
                let at = st.arrivals.peek();
                if at == NEVER {
                    NEVER
                } else {
                    self.first_boundary_after(a, at)
                }
            }
        }
    }

    fn count_idle_slots(&mut self, from: u64, to: u64) {
        // boundaries m in [from, to) whose start lies in the window
        if to <= from {
            return;
        }
        let first_in = |t: u64| -> u64 {
            let b0 = self.boundary(0);
            if t <= b0 {
                0
            } else {
                (t - b0).div_ceil(self.slot)
            }
        };
        let lo = from.max(first_in(self.warmup));
        let hi = to.min(first_in(self.horizon));
        if hi > lo {
            self.stats.idle_slots += hi - lo;
        }
    }

    fn run(&mut self) -> Result<(), SimError> {
        let a_min = self.classes.iter().map(|c| c.aifsn).min().unwrap_or(1);
        let mut candidates: Vec<u64> = (0..self.stations.len()).map(|s| self.candidate(s)).collect();
        loop {
            // find the first boundary at which somebody transmits
            let (m, transmitters) = loop {
                let m = candidates.iter().copied().min().unwrap_or(NEVER);
                if m == NEVER || self.boundary(m) >= self.horizon {
                    let end = if m == NEVER { NEVER } else { m };
                    self.count_idle_slots(a_min, end);
                    return Ok(());
                }
                let t = self.boundary(m);
                let mut tx = Vec::new();
                for s in 0..self.stations.len() {
                    if candidates[s] != m {
                        continue;
                    }
                    self.arrivals_until(s, t, None)?;
                    if self.stations[s].queue.is_empty() {
                        // postbackoff finished with nothing to send
                        self.stations[s].access = Access::Idle;
                        self.log(t, s, "idle")?;
                        candidates[s] = self.candidate(s);
                    } else {
                        tx.push(s);
                    }
                }
                if !tx.is_empty() {
                    break (m, tx);
                }
            };
            let t_tx = self.boundary(m);
            self.count_idle_slots(a_min, m);
            if self.measuring(t_tx) {
                self.stats.busy_slots += 1;
            }
            // deferring stations count the busy slot as one decrement
            for s in 0..self.stations.len() {
                if transmitters.contains(&s) {
                    continue;
                }
                let a = self.classes[self.stations[s].class].aifsn;
                if let Access::Backoff(c) = &mut self.stations[s].access {
                    if m >= a {
                        *c -= (m - a + 1) as u32;
                    }
                }
            }

            let busy_end = if let [s] = transmitters[..] {
                self.transmit_txop(s, t_tx)?
            } else {
                self.collide(&transmitters, t_tx)?
            };
            let old_end = self.t_end;
            self.t_end = busy_end;
            for s in 0..self.stations.len() {
                self.arrivals_until(s, busy_end, Some(busy_end))?;
            }
            for &s in &transmitters {
                let stage = self.stations[s].stage;
                self.draw(s, stage)?;
            }
            debug_assert!(self.t_end > old_end);
            for (s, c) in candidates.iter_mut().enumerate() {
                *c = self.candidate(s);
            }
        }
    }

    /// Collision among `transmitters` starting at `t`; returns the busy end.
    fn collide(&mut self, transmitters: &[usize], t: u64) -> Result<u64, SimError> {
        let busy = transmitters
            .iter()
            .map(|&s| self.classes[self.stations[s].class].collision)
            .max()
            .expect("at least two transmitters");
        let end = t + busy;
        let counted = self.measuring(t);
        for &s in transmitters {
            self.log(t, s, "collision")?;
            self.arrivals_until(s, end, None)?;
            let class = self.stations[s].class;
            if counted {
                self.stats.acs[class].collisions += 1;
            }
            let next = self.stations[s].stage + 1;
            if next >= self.classes[class].retry_limit {
                self.observe(s, end);
                let st = &mut self.stations[s];
                st.queue.pop_front();
                st.head_since = end;
                let ac = &mut self.stats.acs[class];
                ac.ledger.dropped_retry += 1;
                if counted {
                    ac.dropped_retry += 1;
                }
                st.stage = 0;
                self.log(end, s, "drop_retry")?;
            } else {
                self.stations[s].stage = next;
            }
        }
        Ok(end)
    }

    /// Channel access won by `s` at `t`: as many exchanges as the queue and
    /// the TXOP limit allow. Returns the busy end.
    fn transmit_txop(&mut self, s: usize, t: u64) -> Result<u64, SimError> {
        let class = self.stations[s].class;
        let (success, exchange) = (self.classes[class].success, self.classes[class].exchange);
        self.log(t, s, "tx")?;
        let mut n: u64 = 0;
        let mut end;
        loop {
            end = t + n * exchange + success;
            self.arrivals_until(s, end, None)?;
            self.observe(s, end);
            let st = &mut self.stations[s];
            let arrived = st.queue.pop_front().expect("transmitting station has a packet");
            let head_since = st.head_since;
            st.head_since = end;
            n += 1;
            let counted = end >= self.warmup && end < self.horizon;
            let payload_bits = self.classes[class].payload_bits;
            let ac = &mut self.stats.acs[class];
            ac.ledger.delivered += 1;
            if counted {
                ac.delivered += 1;
                ac.delivered_bits += payload_bits;
                ac.delay.record((end - arrived) as f64 * 1e-9);
                ac.access_delay.record((end - head_since) as f64 * 1e-9);
            }
            self.log(end, s, "success")?;
            // packets that arrived during this exchange may ride the TXOP
            if self.stations[s].queue.is_empty() || !self.classes[class].fits(n) {
                break;
            }
        }
        let measuring = self.measuring(t);
        let ac = &mut self.stats.acs[class];
        if measuring {
            ac.successes += 1;
            ac.max_burst = ac.max_burst.max(n as u32);
        }
        self.stations[s].stage = 0;
        Ok(end)
    }

    fn finish(mut self) -> SimStats {
        let end = self.t_end.max(self.horizon);
        for s in 0..self.stations.len() {
            // arrivals after the horizon are not part of the run
            let _ = self.arrivals_until(s, self.horizon, None);
            self.observe(s, end);
            let st = &self.stations[s];
            let ledger = &mut self.stats.acs[st.class].ledger;
            let len = st.queue.len() as u64;
            ledger.in_flight += len.min(1);
            ledger.queued += len.saturating_sub(1);
        }
        self.stats
    }
}
