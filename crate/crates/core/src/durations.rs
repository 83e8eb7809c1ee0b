use serde::Serialize;

use crate::config::{AcConfig, AccessMode, PhyTiming};
use crate::error::ModelError;

/// Durations (seconds) the chain of one access category spends per state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DurationSet {
    pub aifs: f64,
    /// Data frame airtime including PHY and MAC headers.
    pub frame: f64,
    /// Airtime of the payload alone.
    pub payload: f64,
    /// Successful exchange followed by AIFS.
    pub success: f64,
    /// Collision followed by the timeout and AIFS.
    pub collision: f64,
    /// One SIFS-separated exchange inside a TXOP.
    pub exchange: f64,
    /// Maximum number of exchanges that fit into one TXOP.
    pub txop_exchanges: u32,
    /// Mean TXOP duration.
    pub txop: f64,
    /// Mean time between two backoff counter decrements.
    pub backoff_slot: f64,
    /// Mean length of a busy slot seen from the idle state.
    pub busy_slot: f64,
}

impl DurationSet {
    /// Durations that depend only on the configuration. The contention
    /// dependent fields start from their idle-channel values.
    pub fn fixed(ac: &AcConfig, phy: &PhyTiming, access: AccessMode) -> Result<Self, ModelError> {
        let aifs = ac.aifs(phy);
        let frame = phy.frame_time(ac.payload_bits);
        let delta = phy.prop_delay;
        let data_exchange = frame + delta + phy.sifs + phy.ack + delta;
        let (success, collision) = match access {
            AccessMode::Basic => (data_exchange + aifs, frame + phy.ack_timeout() + aifs),
            AccessMode::RtsCts => (
                phy.rts + delta + phy.sifs + phy.cts + delta + phy.sifs + data_exchange + aifs,
                phy.rts + phy.cts_timeout() + aifs,
            ),
        };
        let exchange = success - aifs + phy.sifs;
        let txop_exchanges = txop_exchanges(ac.txop_limit, phy.sifs, exchange);
        let set = Self {
            aifs,
            frame,
            payload: phy.payload_time(ac.payload_bits),
            success,
            collision,
            exchange,
            txop_exchanges,
            txop: success,
            backoff_slot: phy.slot,
            busy_slot: collision,
        };
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        for (what, value) in [
            ("success", self.success),
            ("collision", self.collision),
            ("exchange", self.exchange),
            ("txop", self.txop),
            ("backoff_slot", self.backoff_slot),
            ("busy_slot", self.busy_slot),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::Duration { what, value });
            }
        }
        Ok(())
    }

    /// Mean number of exchanges per TXOP implied by the mean TXOP duration.
    pub fn exchanges_per_txop(&self, sifs: f64) -> f64 {
        (self.txop - self.aifs + sifs) / self.exchange
    }
}

/// Number of exchanges of length `exchange` that fit into a TXOP limit;
/// at least one, since a zero limit still grants a single exchange.
pub fn txop_exchanges(txop_limit: f64, sifs: f64, exchange: f64) -> u32 {
    let n = ((txop_limit + sifs) / exchange).floor();
    if n.is_finite() && n >= 1.0 {
        n as u32
    } else {
        1
    }
}
