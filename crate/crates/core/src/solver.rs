//! Damped fixed-point iteration coupling the per-category chains through
//! their transmission probabilities.

use std::io::{self, Write};

use serde::Serialize;

use crate::arrival::ArrivalKernel;
use crate::config::Scenario;
use crate::dtmc::{ChainInputs, StateSpace, SteadyState};
use crate::durations::DurationSet;
use crate::error::{ModelError, SolveError};
use crate::zones::{SlotDurations, ZoneLayout, ZoneOccupancy};

/// Largest collision probability handed to a chain; keeps it irreducible.
const MAX_COLLISION: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Weight of the new iterate, in `(0, 1]`.
    pub damping: f64,
    /// Convergence threshold on the largest change of any τ.
    pub tol: f64,
    pub max_iters: usize,
    /// Starting τ per access category; defaults to `2 / (CW_min + 2)` for
    /// categories with traffic and 0 otherwise.
    pub initial_tau: Option<Vec<f64>>,
    /// Keep the per-iteration trace.
    pub trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-8,
            max_iters: 500,
            initial_tau: None,
            trace: false,
        }
    }
}

impl SolveOptions {
    pub fn with_initial_tau(mut self, tau: f64, categories: usize) -> Self {
        self.initial_tau = Some(vec![tau; categories]);
        self
    }

    fn validate(&self, categories: usize) -> Result<(), ModelError> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(ModelError::Degenerate { what: "damping outside (0, 1]" });
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(ModelError::Degenerate { what: "tolerance or iteration cap" });
        }
        if let Some(t) = &self.initial_tau {
            if t.len() != categories {
                return Err(ModelError::Dimension(format!("{} initial τ for {categories} categories", t.len())));
            }
            if t.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(ModelError::Degenerate { what: "initial τ outside [0, 1]" });
            }
        }
        Ok(())
    }
}

/// Converged state of one access category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcSolution {
    pub tau: f64,
    pub p_collision: f64,
    pub rho: f64,
    pub durations: DurationSet,
    #[serde(skip)]
    pub steady: SteadyState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub tau: Vec<f64>,
    pub p_collision: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvedModel {
    #[serde(skip)]
    pub scenario: Scenario,
    pub layout: ZoneLayout,
    pub occupancy: ZoneOccupancy,
    /// One entry per access category; `None` for those without flows.
    pub acs: Vec<Option<AcSolution>>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl SolvedModel {
    pub fn taus(&self) -> Vec<f64> {
        self.acs.iter().map(|a| a.as_ref().map_or(0.0, |a| a.tau)).collect()
    }

    pub fn ac(&self, i: usize) -> Option<&AcSolution> {
        self.acs.get(i).and_then(Option::as_ref)
    }

    /// Iteration trace as CSV: `iteration,tau_<i>…,p_c_<i>…,residual`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let names: Vec<&str> = self.scenario.acs.iter().map(|a| a.name.as_str()).collect();
        let header: Vec<String> = std::iter::once("iteration".to_string())
            .chain(names.iter().map(|n| format!("tau_{n}")))
            .chain(names.iter().map(|n| format!("p_c_{n}")))
            .chain(std::iter::once("residual".to_string()))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for row in &self.trace {
            let mut fields = vec![row.iteration.to_string()];
            fields.extend(row.tau.iter().map(|v| format!("{v:e}")));
            fields.extend(row.p_collision.iter().map(|v| format!("{v:e}")));
            fields.push(format!("{:e}", row.residual));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Durations of every active category at the given contention level.
/// `t_txop` holds each category's mean TXOP duration from the previous
/// iterate (or its single-exchange time at the start).
pub fn compute_durations(
    scenario: &Scenario,
    layout: &ZoneLayout,
    taus: &[f64],
    occupancy: &ZoneOccupancy,
    t_txop: &[f64],
) -> Result<Vec<Option<DurationSet>>, ModelError> {
    let phy = &scenario.phy;
    let aifs_min = scenario
        .active()
        .iter()
        .map(|&i| scenario.acs[i].aifs(phy))
        .fold(f64::INFINITY, f64::min);
    let success: Vec<f64> = scenario
        .acs
        .iter()
        .zip(t_txop)
        .map(|(ac, &t)| t - ac.aifs(phy) + aifs_min)
        .collect();
    scenario
        .acs
        .iter()
        .enumerate()
        .map(|(i, ac)| {
            if ac.flows == 0 {
                return Ok(None);
            }
            let mut d = DurationSet::fixed(ac, phy, scenario.access)?;
            d.txop = t_txop[i];
            let slots = SlotDurations {
                idle: phy.slot,
                collision: d.collision - d.aifs + aifs_min,
                success: success.clone(),
            };
            let outcomes = layout.slot_outcomes(taus, i);
            d.backoff_slot = layout.mean_backoff_slot(occupancy, &outcomes, &slots, i)?;
            d.busy_slot = match layout.mean_deferral_slot(occupancy, &outcomes, &slots, i) {
                Ok(t) => t,
                // nobody transmits: the busy branch carries no probability
                Err(ModelError::Degenerate { .. }) => slots.collision,
                Err(e) => return Err(e),
            };
            d.check()?;
            Ok(Some(d))
        })
        .collect()
}

struct Iterate {
    acs: Vec<Option<AcSolution>>,
    taus: Vec<f64>,
    occupancy: ZoneOccupancy,
}

fn evaluate(scenario: &Scenario, layout: &ZoneLayout, taus: &[f64], t_txop: &[f64]) -> Result<Iterate, ModelError> {
    let occupancy = layout.occupancy(taus);
    let durations = compute_durations(scenario, layout, taus, &occupancy, t_txop)?;
    let mut acs = Vec::with_capacity(scenario.acs.len());
    let mut new_taus = vec![0.0; scenario.acs.len()];
    for (i, (ac, d)) in scenario.acs.iter().zip(durations).enumerate() {
        let Some(d) = d else {
            acs.push(None);
            continue;
        };
        let p_collision = layout.average_collision_prob(&occupancy, taus, i)?.min(MAX_COLLISION);
        let kernel = ArrivalKernel::new(ac.arrival_rate, ac.queue_size);
        let rho = kernel.rho(scenario.phy.slot);
        let inputs = ChainInputs { p_collision, rho, durations: &d, kernel };
        let steady = SteadyState::solve(StateSpace::new(ac, d.txop_exchanges), &inputs)?;
        new_taus[i] = steady.tau;
        acs.push(Some(AcSolution { tau: steady.tau, p_collision, rho, durations: d, steady }));
    }
    Ok(Iterate { acs, taus: new_taus, occupancy })
}

/// Cap on the estimated contraction rate of the damped iteration.
const MAX_RATE: f64 = 0.999;

/// Solves the coupled model by damped fixed-point iteration on τ.
pub fn solve(scenario: &Scenario, opts: &SolveOptions) -> Result<SolvedModel, SolveError> {
    scenario.validate()?;
    let n = scenario.acs.len();
    opts.validate(n)?;
    let layout = ZoneLayout::new(scenario)?;
    let mut taus: Vec<f64> = match &opts.initial_tau {
        Some(t) => t.clone(),
        None => scenario
            .acs
            .iter()
            .map(|ac| if ac.arrival_rate > 0.0 { 2.0 / (f64::from(ac.cw_min) + 2.0) } else { 0.0 })
            .collect(),
    };
    for (t, ac) in taus.iter_mut().zip(&scenario.acs) {
        if ac.flows == 0 {
            *t = 0.0;
        }
    }
    let mut t_txop: Vec<f64> = scenario
        .acs
        .iter()
        .map(|ac| DurationSet::fixed(ac, &scenario.phy, scenario.access).map(|d| d.success))
        .collect::<Result<_, _>>()?;

    let mut trace = Vec::new();
    let mut best: Option<SolvedModel> = None;
    let mut previous: Option<f64> = None;
    for iteration in 1..=opts.max_iters {
        let it = evaluate(scenario, &layout, &taus, &t_txop)?;
        let residual = it
            .taus
            .iter()
            .zip(&taus)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if opts.trace {
            trace.push(TraceRow {
                iteration,
                tau: it.taus.clone(),
                p_collision: it.acs.iter().map(|a| a.as_ref().map_or(0.0, |a| a.p_collision)).collect(),
                residual,
            });
        }
        for (t, a) in t_txop.iter_mut().zip(&it.acs) {
            if let Some(a) = a {
                *t = a.steady.t_txop;
            }
        }
        // A slowly contracting map leaves the iterate further from the fixed
        // point than its last step; tighten the step bound accordingly.
        let rate = previous.map_or(0.0, |p| if p > 0.0 { (residual / p).min(MAX_RATE) } else { 0.0 });
        previous = Some(residual);
        let converged = residual < opts.tol * ((1.0 - rate) / opts.damping).min(1.0);
        if converged || best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(SolvedModel {
                scenario: scenario.clone(),
                layout: layout.clone(),
                occupancy: it.occupancy,
                acs: it.acs,
                iterations: iteration,
                residual,
                converged,
                trace: Vec::new(),
            });
        }
        if converged {
            break;
        }
        for (t, new) in taus.iter_mut().zip(&it.taus) {
            *t = (1.0 - opts.damping) * *t + opts.damping * new;
        }
    }
    let mut model = best.expect("at least one iteration");
    model.iterations = model.iterations.max(trace.len());
    model.trace = trace;
    if model.converged {
        Ok(model)
    } else {
        model.iterations = opts.max_iters;
        Err(SolveError::MaxIterations(Box::new(model)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_network_converges_immediately() {
        let s = Scenario::two_class_reference(0.0, 10, false);
        let m = solve(&s, &SolveOptions::default()).unwrap();
        assert!(m.iterations <= 2);
        for a in m.acs.iter().flatten() {
            assert_eq!(a.tau, 0.0);
            assert_eq!(a.p_collision, 0.0);
        }
    }

    #[test]
    fn rejects_bad_options() {
        let s = Scenario::two_class_reference(1e6, 10, false);
        let opts = SolveOptions { damping: 0.0, ..Default::default() };
        assert!(solve(&s, &opts).is_err());
        let opts = SolveOptions { initial_tau: Some(vec![0.1]), ..Default::default() };
        assert!(solve(&s, &opts).is_err());
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let s = Scenario::two_class_reference(3e6, 4, false);
        let opts = SolveOptions { max_iters: 2, trace: true, ..Default::default() };
        match solve(&s, &opts) {
            Err(SolveError::MaxIterations(m)) => {
                assert!(!m.converged);
                assert_eq!(m.iterations, 2);
                assert_eq!(m.trace.len(), 2);
                assert!(m.residual <= m.trace[0].residual);
            }
            other => panic!("expected MaxIterations, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let s = Scenario::two_class_reference(1e6, 4, false);
        let m = solve(&s, &SolveOptions { trace: true, ..Default::default() }).unwrap();
        let mut out = Vec::new();
        m.write_trace_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iteration,tau_AC1,tau_AC3,p_c_AC1,p_c_AC3,residual");
        assert_eq!(lines.count(), m.trace.len());
    }
}
