//! AIFS contention zones.
//!
//! After every busy period the medium is idle for `AIFS_min`, then backoff
//! slots `n = 1, 2, …` follow. An access category whose AIFS exceeds the
//! minimum by `d` slots contends from slot `d + 1` on, so slot `n` belongs to
//! the zone of the largest `d ≤ n − 1`. The slot position itself is a Markov
//! chain that advances while slots stay idle and restarts at 1 after any
//! transmission; it is truncated at `W_min`, the smallest maximum contention
//! window, after which every station has necessarily transmitted.

use serde::Serialize;

use crate::config::{Scenario, StationMode};
use crate::error::ModelError;

/// One contention zone: the slots in which exactly the access categories
/// with `d ≤ self.d` may transmit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Zone {
    pub d: u32,
    /// Highest-priority access category whose AIFS opens this zone.
    pub label: usize,
    /// First and last backoff slot (1-based, inclusive).
    pub first_slot: u32,
    pub last_slot: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneLayout {
    /// AIFS offset in slots per access category; `None` for inactive ones.
    d: Vec<Option<u32>>,
    flows: Vec<u32>,
    mode: StationMode,
    zones: Vec<Zone>,
    w_min: u32,
}

/// Stationary slot-position occupancy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneOccupancy {
    /// `b[n - 1]` is the probability of backoff slot `n`.
    pub b: Vec<f64>,
    /// Probability mass per zone, in layout order.
    pub p_z: Vec<f64>,
}

/// Outcome of a backoff slot in one zone as seen by an access category in
/// backoff (its own transmission excluded).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotOutcomes {
    pub idle: f64,
    /// Exactly one transmission, per transmitting access category.
    pub success: Vec<f64>,
    pub collision: f64,
}

/// Durations of the possible slot outcomes. Busy slots last until the
/// slot-1 boundary of the next idle period, i.e. airtime plus `AIFS_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDurations {
    pub idle: f64,
    pub collision: f64,
    /// Per access category.
    pub success: Vec<f64>,
}

impl ZoneLayout {
    pub fn new(scenario: &Scenario) -> Result<Self, ModelError> {
        let active = scenario.active();
        let Some(aifsn_min) = active.iter().map(|&i| scenario.acs[i].aifsn).min() else {
            return Err(ModelError::Degenerate { what: "zone layout without active access categories" });
        };
        let d: Vec<Option<u32>> = scenario
            .acs
            .iter()
            .map(|ac| (ac.flows > 0).then(|| ac.aifsn - aifsn_min))
            .collect();
        let w_min = active.iter().map(|&i| scenario.acs[i].cw_max()).min().unwrap_or(0);
        let flows = scenario.acs.iter().map(|ac| ac.flows).collect();
        Self::from_parts(d, flows, scenario.stations, w_min)
    }

    /// Layout from per-AC offsets; `None` marks an inactive access category.
    pub fn from_parts(d: Vec<Option<u32>>, flows: Vec<u32>, mode: StationMode, w_min: u32) -> Result<Self, ModelError> {
        if d.len() != flows.len() {
            return Err(ModelError::Dimension(format!("{} offsets for {} flow counts", d.len(), flows.len())));
        }
        let mut distinct: Vec<u32> = d.iter().flatten().copied().collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.is_empty() {
            return Err(ModelError::Degenerate { what: "zone layout without active access categories" });
        }
        for (ac, di) in d.iter().enumerate() {
            if let Some(di) = di {
                if *di >= w_min {
                    return Err(ModelError::EmptySlotRange { ac });
                }
            }
        }
        let zones = distinct
            .iter()
            .enumerate()
            .map(|(z, &dz)| Zone {
                d: dz,
                label: d.iter().rposition(|&x| x == Some(dz)).expect("offset of an active category"),
                first_slot: dz + 1,
                last_slot: distinct.get(z + 1).copied().unwrap_or(w_min),
            })
            .collect();
        Ok(Self { d, flows, mode, zones, w_min })
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn w_min(&self) -> u32 {
        self.w_min
    }

    pub fn offset(&self, ac: usize) -> Option<u32> {
        self.d[ac]
    }

    pub fn flows(&self) -> &[u32] {
        &self.flows
    }

    pub fn mode(&self) -> StationMode {
        self.mode
    }

    /// Largest AIFS offset among active access categories.
    pub fn max_offset(&self) -> u32 {
        self.zones.last().map_or(0, |z| z.d)
    }

    /// Zone index of 1-based backoff slot `n` (slots past `W_min` belong to
    /// the last zone).
    pub fn zone_of_slot(&self, n: u32) -> usize {
        self.zones.iter().rposition(|z| z.d < n.max(1)).unwrap_or(0)
    }

    /// Whether access category `ac` may transmit in zone `zone`.
    pub fn contends(&self, ac: usize, zone: usize) -> bool {
        self.d[ac].is_some_and(|d| d <= self.zones[zone].d)
    }

    /// `(ac, d, tau, flows)` of every active access category.
    fn active_offsets<'s>(&'s self, taus: &'s [f64]) -> impl Iterator<Item = (usize, u32, f64, u32)> + 's {
        self.d
            .iter()
            .enumerate()
            .filter_map(move |(i, d)| d.map(|d| (i, d, taus[i], self.flows[i])))
    }

    /// Probability that at least one station transmits in a slot of `zone`.
    pub fn p_tr(&self, taus: &[f64], zone: usize) -> f64 {
        let dx = self.zones[zone].d;
        let quiet: f64 = self
            .active_offsets(taus)
            .filter(|&(_, d, _, _)| d <= dx)
            .map(|(_, _, t, f)| (1.0 - t).powi(f as i32))
            .product();
        1.0 - quiet
    }

    /// Probability that no transmission happens in 0-based AIFS slot `n`
    /// after the shortest AIFS.
    pub fn gamma(&self, taus: &[f64], n: u32) -> f64 {
        1.0 - self.p_tr(taus, self.zone_of_slot(n + 1))
    }

    pub fn occupancy(&self, taus: &[f64]) -> ZoneOccupancy {
        let p_tr: Vec<f64> = (0..self.zones.len()).map(|z| self.p_tr(taus, z)).collect();
        let mut b = Vec::with_capacity(self.w_min as usize);
        let mut reach = 1.0;
        for n in 1..=self.w_min {
            b.push(reach);
            reach *= 1.0 - p_tr[self.zone_of_slot(n)];
        }
        let total: f64 = b.iter().sum();
        b.iter_mut().for_each(|v| *v /= total);
        let p_z = self
            .zones
            .iter()
            .map(|z| b[(z.first_slot - 1) as usize..z.last_slot as usize].iter().sum())
            .collect();
        ZoneOccupancy { b, p_z }
    }

    /// Conditional collision probability of access category `i` when it
    /// transmits in a slot of `zone`.
    pub fn p_c_zone(&self, taus: &[f64], i: usize, zone: usize) -> Result<f64, ModelError> {
        if !self.contends(i, zone) {
            return Err(ModelError::ZoneNotReachable { ac: i, zone });
        }
        let dx = self.zones[zone].d;
        let quiet: f64 = match self.mode {
            StationMode::Heterogeneous => self
                .active_offsets(taus)
                .filter(|&(_, d, _, _)| d <= dx)
                .map(|(k, _, t, f)| (1.0 - t).powi(f as i32 - i32::from(k == i)))
                .product(),
            StationMode::MultiAc => {
                let others: f64 = self
                    .active_offsets(taus)
                    .filter(|&(_, d, _, _)| d <= dx)
                    .map(|(_, _, t, f)| (1.0 - t).powi(f as i32 - 1))
                    .product();
                let own_higher: f64 = self
                    .active_offsets(taus)
                    .filter(|&(k, _, _, _)| k > i)
                    .map(|(_, _, t, _)| 1.0 - t)
                    .product();
                others * own_higher
            }
        };
        Ok((1.0 - quiet).clamp(0.0, 1.0))
    }

    /// Collision probability of access category `i` averaged over the
    /// backoff slots in which it can transmit.
    pub fn average_collision_prob(&self, occ: &ZoneOccupancy, taus: &[f64], i: usize) -> Result<f64, ModelError> {
        let di = self.d[i].ok_or(ModelError::EmptySlotRange { ac: i })?;
        let per_zone = (0..self.zones.len())
            .map(|z| if self.contends(i, z) { self.p_c_zone(taus, i, z) } else { Ok(0.0) })
            .collect::<Result<Vec<_>, _>>()?;
        let mut num = 0.0;
        let mut den = 0.0;
        for n in di + 1..=self.w_min {
            let w = occ.b[(n - 1) as usize];
            num += per_zone[self.zone_of_slot(n)] * w;
            den += w;
        }
        if den <= 0.0 {
            return Err(ModelError::EmptySlotRange { ac: i });
        }
        Ok(num / den)
    }

    /// Slot outcome probabilities in every zone for an observer `i` that is
    /// in backoff; the observer itself does not transmit.
    pub fn slot_outcomes(&self, taus: &[f64], i: usize) -> Vec<SlotOutcomes> {
        (0..self.zones.len())
            .map(|z| {
                let dx = self.zones[z].d;
                let counts: Vec<(usize, f64, i32)> = self
                    .active_offsets(taus)
                    .filter(|&(_, d, _, _)| d <= dx)
                    .map(|(k, _, t, f)| (k, t, f as i32 - i32::from(k == i)))
                    .collect();
                let idle: f64 = counts.iter().map(|&(_, t, n)| (1.0 - t).powi(n)).product();
                let mut success = vec![0.0; self.d.len()];
                for &(k, t, n) in &counts {
                    if n == 0 {
                        continue;
                    }
                    let rest: f64 = counts
                        .iter()
                        .filter(|&&(k2, _, _)| k2 != k)
                        .map(|&(_, t2, n2)| (1.0 - t2).powi(n2))
                        .product();
                    success[k] = f64::from(n) * t * (1.0 - t).powi(n - 1) * rest;
                }
                let collision = (1.0 - idle - success.iter().sum::<f64>()).max(0.0);
                SlotOutcomes { idle, success, collision }
            })
            .collect()
    }

    /// Mean time between two backoff counter decrements of `i`: every slot
    /// weighted by its occupancy, per slot in which `i` counts down.
    pub fn mean_backoff_slot(
        &self,
        occ: &ZoneOccupancy,
        outcomes: &[SlotOutcomes],
        durations: &SlotDurations,
        i: usize,
    ) -> Result<f64, ModelError> {
        let own_mass: f64 = (0..self.zones.len())
            .filter(|&z| self.contends(i, z))
            .map(|z| occ.p_z[z])
            .sum();
        if own_mass <= 0.0 {
            return Err(ModelError::Degenerate { what: "backoff slot normalisation" });
        }
        let total: f64 = outcomes
            .iter()
            .zip(&occ.p_z)
            .map(|(o, &pz)| {
                let busy: f64 = o.success.iter().zip(&durations.success).map(|(p, t)| p * t).sum();
                (o.idle * durations.idle + o.collision * durations.collision + busy) * pz
            })
            .sum();
        Ok(total / own_mass)
    }

    /// Mean length of a busy slot. Zones without any transmission carry no
    /// busy slot and are left out.
    pub fn mean_busy_slot(
        &self,
        occ: &ZoneOccupancy,
        outcomes: &[SlotOutcomes],
        durations: &SlotDurations,
    ) -> Result<f64, ModelError> {
        let mut total = 0.0;
        let mut mass = 0.0;
        for (o, &pz) in outcomes.iter().zip(&occ.p_z) {
            let busy = 1.0 - o.idle;
            if busy <= 0.0 {
                continue;
            }
            let success: f64 = o.success.iter().zip(&durations.success).map(|(p, t)| p * t).sum();
            total += (o.collision * durations.collision + success) / busy * pz;
            mass += pz;
        }
        if mass <= 0.0 {
            return Err(ModelError::Degenerate { what: "busy slot with an idle channel" });
        }
        Ok(total / mass)
    }

    /// Mean length of a backoff slot of `i` given that it is not an idle
    /// slot `i` counts down in: the busy slot itself plus the slots spent in
    /// zones `i` may not use yet, normalised like the backoff slot. This is
    /// the busy branch seen from the idle state; with a single zone it
    /// equals `mean_busy_slot`.
    pub fn mean_deferral_slot(
        &self,
        occ: &ZoneOccupancy,
        outcomes: &[SlotOutcomes],
        durations: &SlotDurations,
        i: usize,
    ) -> Result<f64, ModelError> {
        let mut total = 0.0;
        let mut busy_mass = 0.0;
        for (z, (o, &pz)) in outcomes.iter().zip(&occ.p_z).enumerate() {
            let success: f64 = o.success.iter().zip(&durations.success).map(|(p, t)| p * t).sum();
            total += (o.collision * durations.collision + success) * pz;
            if self.contends(i, z) {
                busy_mass += (1.0 - o.idle) * pz;
            } else {
                total += o.idle * durations.idle * pz;
            }
        }
        if busy_mass <= 0.0 {
            return Err(ModelError::Degenerate { what: "busy slot with an idle channel" });
        }
        Ok(total / busy_mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_zone() -> ZoneLayout {
        ZoneLayout::from_parts(vec![Some(1), Some(0)], vec![5, 5], StationMode::Heterogeneous, 63).unwrap()
    }

    #[test]
    fn reference_layout() {
        let s = Scenario::two_class_reference(2e6, 10, false);
        let layout = ZoneLayout::new(&s).unwrap();
        assert_eq!(layout.w_min(), 63);
        assert_eq!(
            layout.zones(),
            &[
                Zone { d: 0, label: 1, first_slot: 1, last_slot: 1 },
                Zone { d: 1, label: 0, first_slot: 2, last_slot: 63 },
            ]
        );
        assert_eq!(layout.zone_of_slot(1), 0);
        assert_eq!(layout.zone_of_slot(2), 1);
        assert!(layout.contends(1, 0) && !layout.contends(0, 0));
    }

    #[test]
    fn equal_aifs_shares_zone_labelled_by_higher_priority() {
        let l = ZoneLayout::from_parts(vec![Some(2), Some(0), Some(0)], vec![1, 1, 1], StationMode::Heterogeneous, 15)
            .unwrap();
        assert_eq!(l.zones().len(), 2);
        assert_eq!(l.zones()[0].label, 2);
        assert_eq!(l.zones()[0].last_slot, 2);
        assert_eq!(l.zone_of_slot(2), 0);
        assert_eq!(l.zone_of_slot(3), 1);
    }

    #[test]
    fn inactive_categories_are_ignored() {
        let l = ZoneLayout::from_parts(vec![None, Some(3), Some(1)], vec![0, 2, 2], StationMode::Heterogeneous, 15)
            .unwrap();
        assert_eq!(l.zones()[0].d, 1);
        assert_eq!(l.zones()[0].first_slot, 2);
        assert_eq!(l.p_tr(&[0.9, 0.0, 0.0], 1), 0.0);
    }

    #[test]
    fn offset_beyond_window_is_rejected() {
        let err = ZoneLayout::from_parts(vec![Some(8), Some(0)], vec![1, 1], StationMode::Heterogeneous, 7);
        assert_eq!(err, Err(ModelError::EmptySlotRange { ac: 0 }));
    }

    #[test]
    fn p_tr_examples() {
        let l = two_zone();
        assert_eq!(l.p_tr(&[0.0, 0.0], 1), 0.0);
        let single = ZoneLayout::from_parts(vec![Some(0)], vec![1], StationMode::Heterogeneous, 7).unwrap();
        assert!((single.p_tr(&[0.3], 0) - 0.3).abs() < 1e-15);
        let p = l.p_tr(&[0.1, 0.2], 1);
        assert!((p - (1.0 - 0.9f64.powi(5) * 0.8f64.powi(5))).abs() < 1e-15);
        assert!((p - 0.8065).abs() < 5e-5);
    }

    #[test]
    fn occupancy_examples() {
        let l = two_zone();
        let occ = l.occupancy(&[0.0, 0.0]);
        assert!(occ.b.iter().all(|&v| (v - 1.0 / 63.0).abs() < 1e-15));
        let single = ZoneLayout::from_parts(vec![Some(0)], vec![2], StationMode::Heterogeneous, 10).unwrap();
        let occ = single.occupancy(&[0.2]);
        let q: f64 = 0.8f64.powi(2);
        let z: f64 = (0..10).map(|n| q.powi(n)).sum();
        for (n, v) in occ.b.iter().enumerate() {
            assert!((v - q.powi(n as i32) / z).abs() < 1e-15);
        }
        assert!((occ.p_z[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p_c_examples() {
        let single = ZoneLayout::from_parts(vec![Some(0)], vec![1], StationMode::Heterogeneous, 7).unwrap();
        assert_eq!(single.p_c_zone(&[0.4], 0, 0).unwrap(), 0.0);
        let l = two_zone();
        let p = l.p_c_zone(&[0.1, 0.2], 0, 1).unwrap();
        assert!((p - (1.0 - 0.9f64.powi(5) * 0.8f64.powi(5) / 0.9)).abs() < 1e-14);
        assert!((p - 0.7850).abs() < 5e-5);
        assert_eq!(l.p_c_zone(&[0.1, 0.2], 0, 0), Err(ModelError::ZoneNotReachable { ac: 0, zone: 0 }));

        let multi = ZoneLayout::from_parts(vec![Some(1), Some(0)], vec![1, 1], StationMode::MultiAc, 15).unwrap();
        assert_eq!(multi.p_c_zone(&[0.3, 0.2], 1, 1).unwrap(), 0.0);
        assert!((multi.p_c_zone(&[0.3, 0.2], 0, 1).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn averaged_p_c_examples() {
        let single = ZoneLayout::from_parts(vec![Some(0)], vec![4], StationMode::Heterogeneous, 15).unwrap();
        let taus = [0.1];
        let occ = single.occupancy(&taus);
        let avg = single.average_collision_prob(&occ, &taus, 0).unwrap();
        assert!((avg - single.p_c_zone(&taus, 0, 0).unwrap()).abs() < 1e-15);

        // high-priority observer: slot 1 uses the first zone, the rest the second
        let l = two_zone();
        let taus = [0.1, 0.2];
        let occ = l.occupancy(&taus);
        let (a, b) = (l.p_c_zone(&taus, 1, 0).unwrap(), l.p_c_zone(&taus, 1, 1).unwrap());
        let expected = a * occ.p_z[0] + b * occ.p_z[1];
        assert!((l.average_collision_prob(&occ, &taus, 1).unwrap() - expected).abs() < 1e-15);
        // low-priority observer only sees the second zone
        let low = l.average_collision_prob(&occ, &taus, 0).unwrap();
        assert!((low - l.p_c_zone(&taus, 0, 1).unwrap()).abs() < 1e-15);
    }

    /// Two-class average from the per-slot form: the low class contends only
    /// from slot 2, the high class in every slot.
    #[test]
    fn two_class_average_matches_direct_evaluation() {
        let l = two_zone();
        let (t_lo, t_hi) = (0.05, 0.08);
        let taus = [t_lo, t_hi];
        let occ = l.occupancy(&taus);
        let first = 1.0 - (1.0 - t_hi).powi(5);
        let later = 1.0 - (1.0 - t_hi).powi(5) * (1.0 - t_lo).powi(5);
        let reach: Vec<f64> = (1..=63)
            .map(|n| if n == 1 { 1.0 } else { (1.0 - first) * (1.0 - later).powi(n - 2) })
            .collect();
        let pc_hi_1 = 1.0 - (1.0 - t_hi).powi(4);
        let pc_hi = 1.0 - (1.0 - t_hi).powi(4) * (1.0 - t_lo).powi(5);
        let expected = (pc_hi_1 * reach[0] + pc_hi * reach[1..].iter().sum::<f64>()) / reach.iter().sum::<f64>();
        assert!((l.average_collision_prob(&occ, &taus, 1).unwrap() - expected).abs() < 1e-14);
    }

    /// Outcome probabilities by enumerating every transmit pattern of the
    /// contending stations other than the observer.
    fn enumerate(taus: &[(f64, u32)], observer: usize) -> (f64, Vec<f64>, f64) {
        let stations: Vec<(usize, f64)> = taus
            .iter()
            .enumerate()
            .flat_map(|(k, &(t, f))| {
                let n = if k == observer { f - 1 } else { f };
                std::iter::repeat((k, t)).take(n as usize)
            })
            .collect();
        let mut idle = 0.0;
        let mut success = vec![0.0; taus.len()];
        let mut collision = 0.0;
        for mask in 0u32..1 << stations.len() {
            let mut p = 1.0;
            for (s, &(_, t)) in stations.iter().enumerate() {
                p *= if mask >> s & 1 == 1 { t } else { 1.0 - t };
            }
            match mask.count_ones() {
                0 => idle += p,
                1 => success[stations[mask.trailing_zeros() as usize].0] += p,
                _ => collision += p,
            }
        }
        (idle, success, collision)
    }

    #[test]
    fn slot_outcomes_match_enumeration() {
        let l = ZoneLayout::from_parts(vec![Some(1), Some(0)], vec![5, 6], StationMode::Heterogeneous, 63).unwrap();
        let taus = [0.1, 0.2];
        for observer in 0..2 {
            let outcomes = l.slot_outcomes(&taus, observer);
            // latest zone: everyone contends
            let (idle, success, collision) = enumerate(&[(0.1, 5), (0.2, 6)], observer);
            let o = &outcomes[1];
            assert!((o.idle - idle).abs() < 1e-14);
            assert!((o.collision - collision).abs() < 1e-14);
            for k in 0..2 {
                assert!((o.success[k] - success[k]).abs() < 1e-14);
            }
            // first zone: only the high class
            let o = &outcomes[0];
            assert_eq!(o.success[0], 0.0);
            let (idle, success, _) = if observer == 1 {
                enumerate(&[(0.0, 0), (0.2, 6)], 1)
            } else {
                enumerate(&[(0.0, 1), (0.2, 6)], 0)
            };
            assert!((o.idle - idle).abs() < 1e-14);
            assert!((o.success[1] - success[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn all_idle_outcomes() {
        let l = two_zone();
        for o in l.slot_outcomes(&[0.0, 0.0], 0) {
            assert_eq!(o.idle, 1.0);
            assert_eq!(o.collision, 0.0);
            assert!(o.success.iter().all(|&s| s == 0.0));
        }
    }

    fn durations() -> SlotDurations {
        SlotDurations { idle: 9e-6, collision: 270e-6, success: vec![300e-6, 1.3e-3] }
    }

    #[test]
    fn backoff_slot_examples() {
        let single = ZoneLayout::from_parts(vec![Some(0)], vec![1], StationMode::Heterogeneous, 15).unwrap();
        let taus = [0.3];
        let occ = single.occupancy(&taus);
        let d = SlotDurations { idle: 9e-6, collision: 270e-6, success: vec![300e-6] };
        let t = single.mean_backoff_slot(&occ, &single.slot_outcomes(&taus, 0), &d, 0).unwrap();
        assert!((t - 9e-6).abs() < 1e-18);

        let o = vec![SlotOutcomes { idle: 0.8, success: vec![0.0], collision: 0.2 }];
        let t = single.mean_backoff_slot(&occ, &o, &d, 0).unwrap();
        assert!((t - (0.8 * 9e-6 + 0.2 * 270e-6)).abs() < 1e-18);
    }

    #[test]
    fn busy_slot_examples() {
        let l = two_zone();
        let d = durations();
        let occ = l.occupancy(&[0.1, 0.2]);
        let only_collisions = vec![
            SlotOutcomes { idle: 0.5, success: vec![0.0, 0.0], collision: 0.5 },
            SlotOutcomes { idle: 0.1, success: vec![0.0, 0.0], collision: 0.9 },
        ];
        assert!((l.mean_busy_slot(&occ, &only_collisions, &d).unwrap() - 270e-6).abs() < 1e-15);
        let one_sender = vec![
            SlotOutcomes { idle: 0.5, success: vec![0.0, 0.5], collision: 0.0 },
            SlotOutcomes { idle: 0.9, success: vec![0.0, 0.1], collision: 0.0 },
        ];
        assert!((l.mean_busy_slot(&occ, &one_sender, &d).unwrap() - 1.3e-3).abs() < 1e-15);
        let mixed = vec![
            SlotOutcomes { idle: 0.6, success: vec![0.0, 0.3], collision: 0.1 },
            SlotOutcomes { idle: 0.5, success: vec![0.2, 0.2], collision: 0.1 },
        ];
        let z0 = 0.1 / 0.4 * 270e-6 + 0.3 / 0.4 * 1.3e-3;
        let z1 = 0.1 / 0.5 * 270e-6 + 0.2 / 0.5 * 300e-6 + 0.2 / 0.5 * 1.3e-3;
        let expected = z0 * occ.p_z[0] + z1 * occ.p_z[1];
        assert!((l.mean_busy_slot(&occ, &mixed, &d).unwrap() - expected).abs() < 1e-15);
        let idle = l.slot_outcomes(&[0.0, 0.0], 0);
        assert!(l.mean_busy_slot(&occ, &idle, &d).is_err());
    }

    #[test]
    fn deferral_slot_splits_the_backoff_slot() {
        let single = ZoneLayout::from_parts(vec![Some(0), Some(0)], vec![3, 4], StationMode::Heterogeneous, 31).unwrap();
        let d = durations();
        let taus = [0.05, 0.12];
        let occ = single.occupancy(&taus);
        let o = single.slot_outcomes(&taus, 0);
        let busy = single.mean_busy_slot(&occ, &o, &d).unwrap();
        assert!((single.mean_deferral_slot(&occ, &o, &d, 0).unwrap() - busy).abs() < 1e-15);

        // idle own slot or deferral: the two branches rebuild T_bs
        let l = two_zone();
        let occ = l.occupancy(&taus);
        for i in 0..2 {
            let o = l.slot_outcomes(&taus, i);
            let p = l.average_collision_prob(&occ, &taus, i).unwrap();
            let t_bs = l.mean_backoff_slot(&occ, &o, &d, i).unwrap();
            let t_def = l.mean_deferral_slot(&occ, &o, &d, i).unwrap();
            assert!(((1.0 - p) * d.idle + p * t_def - t_bs).abs() < 1e-15, "ac {i}");
        }
    }

    #[test]
    fn equal_aifs_collapses_to_classic_collision_probability() {
        let l = ZoneLayout::from_parts(vec![Some(0), Some(0)], vec![3, 4], StationMode::Heterogeneous, 31).unwrap();
        let taus = [0.05, 0.12];
        let occ = l.occupancy(&taus);
        assert_eq!(occ.p_z, vec![1.0]);
        let classic = 1.0 - 0.95f64.powi(2) * 0.88f64.powi(4);
        assert!((l.average_collision_prob(&occ, &taus, 0).unwrap() - classic).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn distributions_are_valid(
            t0 in 0.0f64..1.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
            f0 in 1u32..6, f1 in 1u32..6, f2 in 1u32..6,
            d0 in 0u32..5, d1 in 0u32..5,
        ) {
            let (d0, d1) = (d0.max(d1), d1.min(d0));
            let l = ZoneLayout::from_parts(
                vec![Some(d0), Some(d1), Some(0)],
                vec![f0, f1, f2],
                StationMode::Heterogeneous,
                15,
            ).unwrap();
            let taus = [t0, t1, t2];
            let occ = l.occupancy(&taus);
            prop_assert!((occ.b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((occ.p_z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(occ.b.iter().all(|&v| v >= 0.0));
            for i in 0..3 {
                for o in l.slot_outcomes(&taus, i) {
                    let total = o.idle + o.collision + o.success.iter().sum::<f64>();
                    prop_assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn collision_probability_monotone_in_tau(
            t0 in 0.0f64..0.5, t1 in 0.0f64..0.5, bump in 0.0f64..0.4, which in 0usize..2,
        ) {
            let l = two_zone();
            let taus = [t0, t1];
            let mut raised = taus;
            raised[which] += bump;
            for i in 0..2 {
                let before = l.average_collision_prob(&l.occupancy(&taus), &taus, i).unwrap();
                let after = l.average_collision_prob(&l.occupancy(&raised), &raised, i).unwrap();
                prop_assert!(after >= before - 1e-12, "ac {} {} -> {}", i, before, after);
            }
        }
    }
}
