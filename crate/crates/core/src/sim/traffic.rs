use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

/// Shape of a flow's packet arrival process. The mean rate always comes
/// from the access category's `arrival_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TrafficModel {
    #[default]
    Poisson,
    /// Constant inter-arrival time.
    Cbr,
    /// Constant-rate arrivals during exponentially distributed active
    /// periods, silence during exponentially distributed idle periods. The
    /// peak rate is scaled so the long-run mean equals the configured rate.
    OnOff { on_mean: f64, off_mean: f64 },
}

impl TrafficModel {
    /// Active and idle periods of 1.5 s on average.
    pub const fn on_off() -> Self {
        Self::OnOff {
            on_mean: 1.5,
            off_mean: 1.5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Poisson => "poisson",
            Self::Cbr => "cbr",
            Self::OnOff { .. } => "on_off",
        }
    }
}

pub(crate) const NEVER: u64 = u64::MAX;

fn to_ns(seconds: f64) -> u64 {
    let ns = (seconds * 1e9).round();
    if ns >= NEVER as f64 {
        NEVER
    } else {
        ns as u64
    }
}

/// Arrival times of one flow, generated lazily in nanoseconds.
pub(crate) struct ArrivalStream {
    kind: Kind,
    /// Time of the pending arrival in seconds.
    next: f64,
    rng: ChaCha8Rng,
}

enum Kind {
    Silent,
    Poisson(Exp<f64>),
    Cbr(f64),
    OnOff {
        period: f64,
        on: Exp<f64>,
        off: Exp<f64>,
        on_until: f64,
    },
}

impl ArrivalStream {
    pub(crate) fn new(model: TrafficModel, rate: f64, mut rng: ChaCha8Rng) -> Self {
        let exp = |r: f64| Exp::new(r).expect("positive rate");
        let (kind, next) = if !(rate > 0.0) {
            (Kind::Silent, f64::INFINITY)
        } else {
            match model {
                TrafficModel::Poisson => {
                    let d = exp(rate);
                    let first = d.sample(&mut rng);
                    (Kind::Poisson(d), first)
                }
                TrafficModel::Cbr => {
                    let period = 1.0 / rate;
                    (Kind::Cbr(period), rng.gen::<f64>() * period)
                }
                TrafficModel::OnOff { on_mean, off_mean } => {
                    let period = on_mean / (rate * (on_mean + off_mean));
                    let on = exp(1.0 / on_mean);
                    let off = exp(1.0 / off_mean);
                    // start in the stationary phase mix
                    let start = if rng.gen::<f64>() < on_mean / (on_mean + off_mean) {
                        0.0
                    } else {
                        off.sample(&mut rng)
                    };
                    let on_until = start + on.sample(&mut rng);
                    let mut kind = Kind::OnOff { period, on, off, on_until };
                    let first = Self::on_off_from(&mut kind, start + rng.gen::<f64>() * period, &mut rng);
                    (kind, first)
                }
            }
        };
        Self { kind, next, rng }
    }

    /// First arrival at or after `candidate`, which lies on the current
    /// active period's grid. Each active period starts at a random phase so
    /// that its expected count is its length over the period.
    fn on_off_from(kind: &mut Kind, mut candidate: f64, rng: &mut ChaCha8Rng) -> f64 {
        let Kind::OnOff { period, on, off, on_until } = kind else {
            unreachable!("on/off stream")
        };
        while candidate > *on_until {
            let start = *on_until + off.sample(rng);
            *on_until = start + on.sample(rng);
            candidate = start + rng.gen::<f64>() * *period;
        }
        candidate
    }

    /// Time of the pending arrival, `NEVER` if there is none.
    pub(crate) fn peek(&self) -> u64 {
        to_ns(self.next)
    }

    pub(crate) fn advance(&mut self) {
        self.next = match &mut self.kind {
            Kind::Silent => f64::INFINITY,
            Kind::Poisson(d) => self.next + d.sample(&mut self.rng),
            Kind::Cbr(period) => self.next + *period,
            Kind::OnOff { period, .. } => {
                let candidate = self.next + *period;
                Self::on_off_from(&mut self.kind, candidate, &mut self.rng)
            }
        };
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn count(model: TrafficModel, rate: f64, horizon: f64, seed: u64) -> usize {
        let mut s = ArrivalStream::new(model, rate, ChaCha8Rng::seed_from_u64(seed));
        let end = to_ns(horizon);
        let mut n = 0;
        let mut last = 0;
        while s.peek() <= end {
            assert!(s.peek() >= last);
            last = s.peek();
            n += 1;
            s.advance();
        }
        n
    }

    #[test]
    fn mean_rate_is_shared_by_all_models() {
        let rate = 200.0;
        let horizon = 2000.0;
        for model in [TrafficModel::Poisson, TrafficModel::Cbr, TrafficModel::on_off()] {
            let n = count(model, rate, horizon, 7) as f64;
            let expected = rate * horizon;
            assert!((n - expected).abs() / expected < 0.03, "{model:?}: {n} vs {expected}");
        }
    }

    #[test]
    fn cbr_is_periodic() {
        let mut s = ArrivalStream::new(TrafficModel::Cbr, 1000.0, ChaCha8Rng::seed_from_u64(1));
        let first = s.peek();
        assert!(first < 1_000_000);
        s.advance();
        s.advance();
        assert_eq!(s.peek() - first, 2_000_000);
    }

    #[test]
    fn zero_rate_never_arrives() {
        let s = ArrivalStream::new(TrafficModel::Poisson, 0.0, ChaCha8Rng::seed_from_u64(1));
        assert_eq!(s.peek(), NEVER);
    }
}
