//! Scenario parameters: PHY timing, per-access-category EDCA settings and the
//! station/access modes that select between model variants.

mod file;

pub use file::{parse_scenario, ScenarioDocument};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Timing of the physical layer and of the control frames that surround a
/// data frame. All durations are in seconds, rates in bits per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyTiming {
    pub slot: f64,
    pub sifs: f64,
    pub prop_delay: f64,
    pub data_rate: f64,
    pub basic_rate: f64,
    /// Preamble and PLCP header time paid by every data frame.
    pub phy_overhead: f64,
    /// MAC header, FCS and encapsulation bits sent at the data rate along with
    /// the payload.
    pub mac_overhead_bits: u32,
    pub ack: f64,
    pub rts: f64,
    pub cts: f64,
    /// Defaults to `EIFS - AIFS = SIFS + ack` when unset.
    pub ack_timeout: Option<f64>,
    /// Defaults to `SIFS + cts` when unset.
    pub cts_timeout: Option<f64>,
}

const ACK_BITS: u32 = 14 * 8;
const RTS_BITS: u32 = 20 * 8;
const CTS_BITS: u32 = 14 * 8;

/// ERP-OFDM frame duration: 20 us preamble and SIGNAL, 4 us data symbols
/// carrying SERVICE + tail + payload bits, and the 6 us signal extension.
fn erp_ofdm_frame(bits: u32, rate: f64) -> f64 {
    let bits_per_symbol = (rate * 4e-6).round();
    let symbols = (f64::from(16 + 6 + bits) / bits_per_symbol).ceil();
    20e-6 + symbols * 4e-6 + 6e-6
}

impl PhyTiming {
    /// 802.11g profile with 54 Mbps data and 6 Mbps basic rate.
    pub fn ieee80211g() -> Self {
        let basic_rate = 6e6;
        Self {
            slot: 9e-6,
            sifs: 10e-6,
            prop_delay: 1e-6,
            data_rate: 54e6,
            basic_rate,
            phy_overhead: 26e-6,
            // 802.11e QoS data header + FCS (30 B), LLC/SNAP (8 B), IP + UDP (28 B)
            mac_overhead_bits: 66 * 8,
            ack: erp_ofdm_frame(ACK_BITS, basic_rate),
            rts: erp_ofdm_frame(RTS_BITS, basic_rate),
            cts: erp_ofdm_frame(CTS_BITS, basic_rate),
            ack_timeout: None,
            cts_timeout: None,
        }
    }

    /// Airtime of a data frame carrying `payload_bits`, headers included.
    pub fn frame_time(&self, payload_bits: u32) -> f64 {
        self.phy_overhead + f64::from(payload_bits + self.mac_overhead_bits) / self.data_rate
    }

    /// Airtime of the payload bits alone.
    pub fn payload_time(&self, payload_bits: u32) -> f64 {
        f64::from(payload_bits) / self.data_rate
    }

    pub fn ack_timeout(&self) -> f64 {
        self.ack_timeout.unwrap_or(self.sifs + self.ack)
    }

    pub fn cts_timeout(&self) -> f64 {
        self.cts_timeout.unwrap_or(self.sifs + self.cts)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("phy.slot", self.slot),
            ("phy.sifs", self.sifs),
            ("phy.data_rate", self.data_rate),
            ("phy.basic_rate", self.basic_rate),
            ("phy.phy_overhead", self.phy_overhead),
            ("phy.ack", self.ack),
            ("phy.rts", self.rts),
            ("phy.cts", self.cts),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::invalid(key, "must be finite and > 0"));
            }
        }
        if !(self.prop_delay.is_finite() && self.prop_delay >= 0.0) {
            return Err(ConfigError::invalid("phy.prop_delay", "must be finite and >= 0"));
        }
        for (key, value) in [
            ("phy.ack_timeout", self.ack_timeout),
            ("phy.cts_timeout", self.cts_timeout),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ConfigError::invalid(key, "must be finite and > 0"));
                }
            }
        }
        Ok(())
    }
}

impl Default for PhyTiming {
    fn default() -> Self {
        Self::ieee80211g()
    }
}

/// EDCA parameters, traffic and buffer of one access category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcConfig {
    pub name: String,
    pub aifsn: u32,
    pub cw_min: u32,
    /// Number of window doublings; `CW_max = 2^max_stage (CW_min + 1) - 1`.
    pub max_stage: u32,
    /// Transmission attempts before a packet is dropped.
    pub retry_limit: u32,
    /// Seconds; zero means a single frame exchange per access.
    pub txop_limit: f64,
    /// MAC queue capacity in packets.
    pub queue_size: u32,
    pub payload_bits: u32,
    /// Poisson packet arrival rate per flow, packets per second.
    pub arrival_rate: f64,
    /// Number of stations carrying this access category.
    pub flows: u32,
}

impl AcConfig {
    /// Arbitration interframe space, `SIFS + AIFSN * slot`.
    pub fn aifs(&self, phy: &PhyTiming) -> f64 {
        phy.sifs + f64::from(self.aifsn) * phy.slot
    }

    /// Contention window at backoff stage `stage`.
    pub fn cw_at_stage(&self, stage: u32) -> Result<u32, ConfigError> {
        if stage >= self.retry_limit {
            return Err(ConfigError::invalid(
                format!("{}.stage", self.name),
                format!("stage {stage} outside 0..{}", self.retry_limit),
            ));
        }
        Ok(self.window(stage))
    }

    pub(crate) fn window(&self, stage: u32) -> u32 {
        (1u32 << stage.min(self.max_stage)) * (self.cw_min + 1) - 1
    }

    pub fn cw_max(&self) -> u32 {
        self.window(self.max_stage)
    }

    /// Offered load per flow in bits per second.
    pub fn offered_load(&self) -> f64 {
        self.arrival_rate * f64::from(self.payload_bits)
    }

    /// Returns a copy offering `bps` bits per second per flow.
    pub fn with_offered_load(&self, bps: f64) -> Self {
        Self {
            arrival_rate: bps / f64::from(self.payload_bits),
            ..self.clone()
        }
    }

    pub fn validate(&self, key: &str) -> Result<(), ConfigError> {
        if self.aifsn < 1 {
            return Err(ConfigError::invalid(format!("{key}.aifsn"), "must be >= 1"));
        }
        if self.cw_min < 1 {
            return Err(ConfigError::invalid(format!("{key}.cw_min"), "must be >= 1"));
        }
        if self.retry_limit < 1 {
            return Err(ConfigError::invalid(format!("{key}.retry_limit"), "must be >= 1"));
        }
        if self.max_stage >= self.retry_limit {
            return Err(ConfigError::invalid(
                format!("{key}.max_stage"),
                "must be smaller than retry_limit",
            ));
        }
        let cw_max = (u64::from(self.cw_min) + 1).checked_shl(self.max_stage);
        if self.max_stage > 16 || cw_max.is_none_or(|w| w > 1 << 20) {
            return Err(ConfigError::invalid(
                format!("{key}.max_stage"),
                "maximum contention window is unreasonably large",
            ));
        }
        if self.queue_size < 1 {
            return Err(ConfigError::invalid(format!("{key}.queue_size"), "must be >= 1"));
        }
        if self.payload_bits < 1 {
            return Err(ConfigError::invalid(format!("{key}.payload"), "must be > 0"));
        }
        if !(self.txop_limit.is_finite() && self.txop_limit >= 0.0) {
            return Err(ConfigError::invalid(format!("{key}.txop_limit"), "must be >= 0"));
        }
        if !(self.arrival_rate.is_finite() && self.arrival_rate >= 0.0) {
            return Err(ConfigError::invalid(format!("{key}.load"), "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AccessMode {
    #[default]
    Basic,
    RtsCts,
}

/// Whether each station carries one access category or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StationMode {
    #[default]
    Heterogeneous,
    MultiAc,
}

/// A complete network configuration. Access categories are ordered by
/// priority: a higher index means a higher priority and an AIFS no larger
/// than any lower index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub acs: Vec<AcConfig>,
    pub phy: PhyTiming,
    pub access: AccessMode,
    pub stations: StationMode,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.phy.validate()?;
        if self.acs.is_empty() {
            return Err(ConfigError::invalid("ac", "at least one access category is required"));
        }
        for (i, ac) in self.acs.iter().enumerate() {
            ac.validate(&format!("ac[{i}]"))?;
        }
        if self.acs.iter().all(|ac| ac.flows == 0) {
            return Err(ConfigError::invalid("ac.flows", "no access category has flows >= 1"));
        }
        for (i, pair) in self.acs.windows(2).enumerate() {
            if pair[1].aifsn > pair[0].aifsn {
                return Err(ConfigError::invalid(
                    format!("ac[{}].aifsn", i + 1),
                    "access categories must be listed from lowest to highest priority \
                     (AIFSN non-increasing)",
                ));
            }
        }
        if self.stations == StationMode::MultiAc {
            let mut flows = self.acs.iter().map(|ac| ac.flows).filter(|&f| f > 0);
            let first = flows.next().unwrap_or(0);
            if flows.any(|f| f != first) {
                return Err(ConfigError::invalid(
                    "ac.flows",
                    "multi_ac stations carry every active category, so flow counts must match",
                ));
            }
        }
        Ok(())
    }

    /// Indices of the access categories with at least one flow.
    pub fn active(&self) -> Vec<usize> {
        (0..self.acs.len()).filter(|&i| self.acs[i].flows > 0).collect()
    }

    /// Copy with every access category offering `bps` per flow.
    pub fn with_offered_load(&self, bps: f64) -> Self {
        let mut s = self.clone();
        for ac in &mut s.acs {
            *ac = ac.with_offered_load(bps);
        }
        s
    }

    /// Copy with every active access category carried by `flows` stations.
    pub fn with_flows(&self, flows: u32) -> Self {
        let mut s = self.clone();
        for ac in s.acs.iter_mut().filter(|ac| ac.flows > 0) {
            ac.flows = flows;
        }
        s
    }

    /// Two-class 802.11g network: five low-priority (AIFSN 3, CW 15) and five
    /// high-priority (AIFSN 2, CW 7) stations, 1034-byte payloads.
    pub fn two_class_reference(load_bps: f64, queue_size: u32, txop: bool) -> Self {
        let payload_bits = 1034 * 8;
        let ac = |name: &str, aifsn, cw_min, txop_limit| AcConfig {
            name: name.to_string(),
            aifsn,
            cw_min,
            max_stage: 3,
            retry_limit: 7,
            txop_limit,
            queue_size,
            payload_bits,
            arrival_rate: load_bps / f64::from(payload_bits),
            flows: 5,
        };
        let (low_txop, high_txop) = if txop { (3.008e-3, 1.504e-3) } else { (0.0, 0.0) };
        Self {
            acs: vec![ac("AC1", 3, 15, low_txop), ac("AC3", 2, 7, high_txop)],
            phy: PhyTiming::ieee80211g(),
            access: AccessMode::Basic,
            stations: StationMode::Heterogeneous,
        }
    }
}
