//! Cascade detection and index checks on finished traces.

use super::{BifurcationEvent, ComponentTrace, EventKind, Termination};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundedFlag {
    BoundedEnd,
    UnboundedEnd,
    Undetermined,
}

impl BoundedFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundedFlag::BoundedEnd => "bounded_end",
            BoundedFlag::UnboundedEnd => "unbounded_end",
            BoundedFlag::Undetermined => "undetermined",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeRecord {
    pub base_period: usize,
    /// Parameters of the doublings `m -> 2m -> 4m -> ...`, in that order.
    pub pd_lambdas: Vec<f64>,
    pub monotone_window: (f64, f64),
    pub bounded_flag: BoundedFlag,
    pub component_id: String,
}

impl CascadeRecord {
    pub fn doublings(&self) -> usize {
        self.pd_lambdas.len()
    }

    /// Whether `|λ_{j+1} - λ_j|` decreases for `j >= 2` (1-based).
    pub fn gaps_decreasing(&self) -> bool {
        let gaps: Vec<f64> = self.pd_lambdas.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        gaps.iter().skip(1).collect::<Vec<_>>().windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "base_period": self.base_period,
            "pd_lambdas": self.pd_lambdas,
            "monotone_window": [self.monotone_window.0, self.monotone_window.1],
            "bounded_flag": self.bounded_flag.as_str(),
            "component_id": self.component_id,
        })
    }
}

fn lower_period(e: &BifurcationEvent) -> usize {
    e.incoming_period.min(e.outgoing_period)
}

fn bounded_flag(trace: &ComponentTrace) -> BoundedFlag {
    use Termination::*;
    let ends = [trace.start_termination, trace.termination];
    if ends.contains(&LeftDomain) {
        BoundedFlag::UnboundedEnd
    } else if ends.iter().all(|t| matches!(t, MaxPeriodReached | StepUnderflow | ShootingLimit)) {
        BoundedFlag::BoundedEnd
    } else {
        BoundedFlag::Undetermined
    }
}

/// Cascades with at least `min_doublings` doublings.
pub fn detect_cascades_with(trace: &ComponentTrace, min_doublings: usize) -> Vec<CascadeRecord> {
    let flag = bounded_flag(trace);
    let id = trace.component_id();
    let mut runs: Vec<Vec<&BifurcationEvent>> = Vec::new();
    let mut run: Vec<&BifurcationEvent> = Vec::new();
    for e in &trace.events {
        if e.kind != EventKind::PeriodDoubling {
            if !run.is_empty() {
                runs.push(std::mem::take(&mut run));
            }
            continue;
        }
        let extends = run.last().is_some_and(|prev| {
            let (a, b) = (lower_period(prev), lower_period(e));
            let up = prev.outgoing_period > prev.incoming_period;
            let up_e = e.outgoing_period > e.incoming_period;
            up == up_e && ((up && b == 2 * a) || (!up && a == 2 * b))
        });
        if !extends && !run.is_empty() {
            runs.push(std::mem::take(&mut run));
        }
        run.push(e);
    }
    if !run.is_empty() {
        runs.push(run);
    }
    runs.into_iter()
        .filter(|r| r.len() >= min_doublings)
        .enumerate()
        .map(|(i, r)| {
            let mut evs = r;
            evs.sort_by_key(|e| lower_period(e));
            let pd_lambdas: Vec<f64> = evs.iter().map(|e| e.lambda).collect();
            let lo = pd_lambdas.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = pd_lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            CascadeRecord {
                base_period: lower_period(evs[0]),
                pd_lambdas,
                monotone_window: (lo, hi),
                bounded_flag: flag,
                component_id: format!("{id}#{i}"),
            }
        })
        .collect()
}

/// Cascades with at least four doublings.
pub fn detect_cascades(trace: &ComponentTrace) -> Vec<CascadeRecord> {
    detect_cascades_with(trace, 4)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventCheck {
    pub kind: EventKind,
    pub lambda: f64,
    pub period: usize,
    pub indices: Vec<Option<i8>>,
    pub eigenvalue_defect: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConservationReport {
    pub checks: Vec<EventCheck>,
}

impl ConservationReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

fn check_event(e: &BifurcationEvent) -> EventCheck {
    let mut indices = vec![e.incoming_index, e.outgoing_index];
    let (passed, detail) = match e.kind {
        EventKind::SaddleNode => match (e.incoming_index, e.outgoing_index) {
            (Some(a), Some(b)) => (a + b == 0, format!("{a} + {b}")),
            _ => (false, "missing side index".to_string()),
        },
        EventKind::Hopf => match (e.incoming_index, e.outgoing_index) {
            (Some(a), Some(b)) => (a == b, format!("{a} -> {b}")),
            _ => (false, "missing side index".to_string()),
        },
        EventKind::PeriodDoubling => match e.doubling {
            Some(d) => {
                indices = vec![d.phi_a, d.phi_b, d.phi_c];
                match (d.phi_a, d.phi_b, d.phi_c) {
                    (Some(a), Some(b), Some(c)) => {
                        let one_flip = (a == 0) != (b == 0);
                        (a == b + c && one_flip, format!("{a} = {b} + {c}"))
                    }
                    _ => (false, "missing side index".to_string()),
                }
            }
            None => (false, "no doubling data".to_string()),
        },
    };
    EventCheck {
        kind: e.kind,
        lambda: e.lambda,
        period: e.period,
        indices,
        eigenvalue_defect: e.eigenvalue_defect(),
        passed,
        detail,
    }
}

/// Per-event index bookkeeping without failing.
pub fn check_index_conservation(trace: &ComponentTrace) -> ConservationReport {
    ConservationReport { checks: trace.events.iter().map(check_event).collect() }
}

/// Fails on the first event that violates index conservation.
pub fn verify_index_conservation(trace: &ComponentTrace) -> Result<ConservationReport> {
    let report = check_index_conservation(trace);
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(Error::ConservationViolation(format!(
            "{} at lambda = {} (period {}): {}",
            bad.kind.as_str(),
            bad.lambda,
            bad.period,
            bad.detail
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrientationReport {
    pub checked: usize,
    /// Arclength positions where the orientation fails.
    pub violations: Vec<f64>,
}

impl OrientationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `sign(dλ/ds) = -φ` at hyperbolic snapshots, on the tangent and on
/// the parameter change to the next snapshot of the same index.
pub fn check_index_orientation(trace: &ComponentTrace) -> OrientationReport {
    let mut rep = OrientationReport::default();
    let snaps = &trace.snapshots;
    for (i, o) in snaps.iter().enumerate() {
        let Some(phi) = o.index() else { continue };
        if phi == 0 {
            continue;
        }
        let want = -phi as f64;
        let t = trace.dlambda_ds[i];
        if t.abs() > 1e-12 {
            rep.checked += 1;
            if t * want < 0.0 {
                rep.violations.push(trace.arclength[i]);
                continue;
            }
        }
        if let Some(next) = snaps.get(i + 1) {
            if next.index() == Some(phi) && next.period == o.period {
                let dl = next.lambda - o.lambda;
                if dl != 0.0 {
                    rep.checked += 1;
                    if dl * want < 0.0 {
                        rep.violations.push(trace.arclength[i]);
                    }
                }
            }
        }
    }
    rep
}
