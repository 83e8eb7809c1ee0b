//! TOML scenario files.
//!
//! ```toml
//! access = "basic"            # or "rts_cts"
//! stations = "heterogeneous"  # or "multi_ac"
//!
//! [phy]                       # optional, every key defaults to 802.11g
//! slot_us = 9
//! sifs_us = 10
//!
//! [[ac]]                      # lowest priority first
//! name = "AC1"
//! aifsn = 3
//! cw_min = 15
//! max_stage = 3
//! retry_limit = 7
//! txop_limit_ms = 0
//! queue_size = 10
//! payload_bytes = 1034
//! load_bps = 2e6              # or rate_pps, exactly one of the two
//! flows = 5
//! arrival = "poisson"         # simulator only: "poisson", "cbr" or "on_off"
//! ```

use serde::Deserialize;

use super::{AcConfig, AccessMode, PhyTiming, Scenario, StationMode};
use crate::error::ConfigError;
use crate::sim::TrafficModel;

/// A parsed scenario together with the arrival processes the simulator
/// should use for each access category.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDocument {
    pub scenario: Scenario,
    pub traffic: Vec<TrafficModel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    access: AccessMode,
    #[serde(default)]
    stations: StationMode,
    #[serde(default)]
    phy: RawPhy,
    ac: Vec<RawAc>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPhy {
    slot_us: Option<f64>,
    sifs_us: Option<f64>,
    prop_delay_us: Option<f64>,
    data_rate_mbps: Option<f64>,
    basic_rate_mbps: Option<f64>,
    phy_overhead_us: Option<f64>,
    mac_overhead_bytes: Option<u32>,
    ack_us: Option<f64>,
    rts_us: Option<f64>,
    cts_us: Option<f64>,
    ack_timeout_us: Option<f64>,
    cts_timeout_us: Option<f64>,
}

#[derive(Deserialize, Clone, Copy, Default)]
#[serde(rename_all = "snake_case")]
enum RawArrival {
    #[default]
    Poisson,
    Cbr,
    OnOff,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAc {
    name: Option<String>,
    aifsn: u32,
    cw_min: u32,
    max_stage: u32,
    retry_limit: u32,
    #[serde(default)]
    txop_limit_ms: f64,
    queue_size: u32,
    payload_bytes: u32,
    load_bps: Option<f64>,
    rate_pps: Option<f64>,
    flows: u32,
    #[serde(default)]
    arrival: RawArrival,
    on_mean_s: Option<f64>,
    off_mean_s: Option<f64>,
}

impl RawPhy {
    fn into_phy(self) -> PhyTiming {
        let d = PhyTiming::ieee80211g();
        let us = |v: Option<f64>, default: f64| v.map_or(default, |x| x * 1e-6);
        let mbps = |v: Option<f64>, default: f64| v.map_or(default, |x| x * 1e6);
        PhyTiming {
            slot: us(self.slot_us, d.slot),
            sifs: us(self.sifs_us, d.sifs),
            prop_delay: us(self.prop_delay_us, d.prop_delay),
            data_rate: mbps(self.data_rate_mbps, d.data_rate),
            basic_rate: mbps(self.basic_rate_mbps, d.basic_rate),
            phy_overhead: us(self.phy_overhead_us, d.phy_overhead),
            mac_overhead_bits: self.mac_overhead_bytes.map_or(d.mac_overhead_bits, |b| b * 8),
            ack: us(self.ack_us, d.ack),
            rts: us(self.rts_us, d.rts),
            cts: us(self.cts_us, d.cts),
            ack_timeout: self.ack_timeout_us.map(|x| x * 1e-6),
            cts_timeout: self.cts_timeout_us.map(|x| x * 1e-6),
        }
    }
}

impl RawAc {
    fn into_parts(self, index: usize) -> Result<(AcConfig, TrafficModel), ConfigError> {
        let key = format!("ac[{index}]");
        let payload_bits = self
            .payload_bytes
            .checked_mul(8)
            .ok_or_else(|| ConfigError::invalid(format!("{key}.payload_bytes"), "too large"))?;
        let arrival_rate = match (self.load_bps, self.rate_pps) {
            (Some(bps), None) => bps / f64::from(payload_bits.max(1)),
            (None, Some(pps)) => pps,
            (Some(_), Some(_)) => {
                return Err(ConfigError::invalid(
                    format!("{key}.load_bps"),
                    "give either load_bps or rate_pps, not both",
                ))
            }
            (None, None) => {
                return Err(ConfigError::invalid(
                    format!("{key}.load_bps"),
                    "missing offered load (load_bps or rate_pps)",
                ))
            }
        };
        let traffic = match self.arrival {
            RawArrival::Poisson => TrafficModel::Poisson,
            RawArrival::Cbr => TrafficModel::Cbr,
            RawArrival::OnOff => {
                let on_mean = self.on_mean_s.unwrap_or(1.5);
                let off_mean = self.off_mean_s.unwrap_or(1.5);
                for (k, v) in [("on_mean_s", on_mean), ("off_mean_s", off_mean)] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(ConfigError::invalid(format!("{key}.{k}"), "must be > 0"));
                    }
                }
                TrafficModel::OnOff { on_mean, off_mean }
            }
        };
        let ac = AcConfig {
            name: self.name.unwrap_or_else(|| format!("AC{index}")),
            aifsn: self.aifsn,
            cw_min: self.cw_min,
            max_stage: self.max_stage,
            retry_limit: self.retry_limit,
            txop_limit: self.txop_limit_ms * 1e-3,
            queue_size: self.queue_size,
            payload_bits,
            arrival_rate,
            flows: self.flows,
        };
        Ok((ac, traffic))
    }
}

/// Parses and validates a TOML scenario.
pub fn parse_scenario(text: &str) -> Result<ScenarioDocument, ConfigError> {
    let raw: RawScenario = toml::from_str(text)?;
    let mut acs = Vec::with_capacity(raw.ac.len());
    let mut traffic = Vec::with_capacity(raw.ac.len());
    for (i, ac) in raw.ac.into_iter().enumerate() {
        let (ac, t) = ac.into_parts(i)?;
        acs.push(ac);
        traffic.push(t);
    }
    let scenario = Scenario {
        acs,
        phy: raw.phy.into_phy(),
        access: raw.access,
        stations: raw.stations,
    };
    scenario.validate()?;
    Ok(ScenarioDocument { scenario, traffic })
}
