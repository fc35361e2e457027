//! Pseudo-arclength continuation of components of nonflip periodic orbits,
//! oriented by the orbit index, with saddle-node, period-doubling and Hopf
//! events and switching onto doubled branches.

mod cascades;
mod events;
pub mod export;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::maps::MapDefinition;
use crate::orbits::{hausdorff_distance, iterate_linearized, orbit_from_data, PeriodicOrbit};

pub use cascades::{
    check_index_conservation, check_index_orientation, detect_cascades, detect_cascades_with, verify_index_conservation, BoundedFlag,
    CascadeRecord, ConservationReport, EventCheck, OrientationReport,
};
pub use events::{
    locate_period_doubling, switch_branch_pd, test_values, BifurcationEvent, DoubledSeed, DoublingIndices, EventKind,
    TestValues,
};

use events::state_of;

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationConfig {
    /// Largest step, in units of the domain width.
    pub max_step: f64,
    /// Smallest step, in units of the domain width.
    pub min_step: f64,
    pub initial_step: f64,
    pub growth: f64,
    pub easy_steps_to_grow: usize,
    pub max_corrector_iterations: usize,
    pub corrector_tol: f64,
    /// Default: 64 times the seed period.
    pub max_period: Option<usize>,
    pub max_steps: usize,
    /// Total arclength limit, in units of the domain width.
    pub max_arclength: f64,
    /// Arclength width of the final event bracket.
    pub event_tol: f64,
    pub max_eigenvalue_change: f64,
    pub min_tangent_cos: f64,
    pub pd_epsilon: f64,
    pub pd_retries: usize,
    pub escape_radius: f64,
    pub min_doublings: usize,
    pub closed_loop_tol: f64,
    pub tol_eig: f64,
    /// Largest monodromy growth `max |μ|` accepted for a doubled orbit.
    pub max_shooting_growth: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            max_step: 1e-2,
            min_step: 1e-12,
            initial_step: 1e-3,
            growth: 1.3,
            easy_steps_to_grow: 3,
            max_corrector_iterations: 5,
            corrector_tol: 1e-10,
            max_period: None,
            max_steps: 200_000,
            max_arclength: 1e3,
            event_tol: 1e-10,
            max_eigenvalue_change: 0.2,
            min_tangent_cos: 0.9,
            pd_epsilon: 1e-4,
            pd_retries: 4,
            escape_radius: 1e6,
            min_doublings: 4,
            closed_loop_tol: 1e-7,
            tol_eig: 1e-9,
            max_shooting_growth: 1e14,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    LeftDomain,
    MaxPeriodReached,
    StepUnderflow,
    /// The doubled orbit is too unstable for single shooting.
    ShootingLimit,
    ClosedLoop,
    MaxArclength,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::LeftDomain => "left_domain",
            Termination::MaxPeriodReached => "max_period_reached",
            Termination::StepUnderflow => "step_underflow",
            Termination::ShootingLimit => "shooting_limit",
            Termination::ClosedLoop => "closed_loop",
            Termination::MaxArclength => "max_arclength",
        }
    }
}

/// Entry of the orientation history: arclength, sign of `dλ/ds`, orbit index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientationSample {
    pub arclength: f64,
    pub dlambda_sign: i8,
    pub index: Option<i8>,
}

/// One component traced in index-orientation order.
#[derive(Clone, Debug)]
pub struct ComponentTrace {
    pub map: MapDefinition,
    pub seed: PeriodicOrbit,
    pub seed_position: usize,
    pub snapshots: Vec<PeriodicOrbit>,
    /// `dλ/ds` at each snapshot in trace orientation.
    pub dlambda_ds: Vec<f64>,
    pub arclength: Vec<f64>,
    pub events: Vec<BifurcationEvent>,
    pub orientation_sign_history: Vec<OrientationSample>,
    /// Termination at the first snapshot.
    pub start_termination: Termination,
    /// Termination at the last snapshot.
    pub termination: Termination,
    pub domain: (f64, f64),
}

impl ComponentTrace {
    pub fn component_id(&self) -> String {
        format!("{}:p{}@{:.10}", self.map.name, self.seed.period, self.seed.lambda)
    }

    pub fn min_period(&self) -> usize {
        self.snapshots.iter().map(|o| o.period).min().unwrap_or(0)
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &BifurcationEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Point {
    pub u: DVector<f64>,
    pub tangent: DVector<f64>,
    pub orbit: PeriodicOrbit,
    pub tests: TestValues,
    pub halving: Option<DVector<f64>>,
}

impl Point {
    fn period(&self) -> usize {
        self.orbit.period
    }
}

/// Half-march result (raw, in march direction).
struct March {
    points: Vec<Point>,
    events: Vec<(usize, BifurcationEvent)>,
    termination: Termination,
}

pub(crate) struct Tracer<'a> {
    pub map: &'a MapDefinition,
    pub cfg: &'a ContinuationConfig,
    pub domain: (f64, f64),
    pub scale: f64,
    pub max_period: usize,
}

enum StepOutcome {
    Accept(Point),
    Reject,
}

impl<'a> Tracer<'a> {
    fn system(&self, u: &DVector<f64>, p: usize) -> Result<(DVector<f64>, DMatrix<f64>, crate::orbits::OrbitData)> {
        let n = self.map.dimension;
        let x = state_of(u);
        let data = iterate_linearized(self.map, u[0], &x, p)?;
        let m = data.monodromy.to_matrix().ok_or_else(|| Error::NumericalOverflow("monodromy".into()))?;
        let h = self.map.phase_space.difference(&data.end, &x);
        let mut dh = DMatrix::zeros(n, n + 1);
        dh.column_mut(0).copy_from(&data.dlambda);
        dh.columns_mut(1, n).copy_from(&(m - DMatrix::identity(n, n)));
        Ok((h, dh, data))
    }

    /// Newton corrector on `[H(u); τ·(u - u_pred)] = 0`.
    fn correct(&self, u_pred: &DVector<f64>, tau: &DVector<f64>, p: usize) -> Option<(DVector<f64>, usize)> {
        let n = self.map.dimension;
        let mut u = u_pred.clone();
        for it in 1..=self.cfg.max_corrector_iterations {
            let (h, dh, _) = self.system(&u, p).ok()?;
            let mut a = DMatrix::zeros(n + 1, n + 1);
            a.rows_mut(0, n).copy_from(&dh);
            a.row_mut(n).copy_from(&tau.transpose());
            let mut rhs = DVector::zeros(n + 1);
            rhs.rows_mut(0, n).copy_from(&(-h));
            rhs[n] = -tau.dot(&(&u - u_pred));
            let du = linalg::solve(&a, &rhs)?;
            u += &du;
            if du.norm() <= self.cfg.corrector_tol * (1.0 + u.norm()) {
                return Some((u, it));
            }
        }
        None
    }

    fn make_point(&self, u: DVector<f64>, reference: &DVector<f64>, p: usize) -> Option<Point> {
        let (_, dh, data) = self.system(&u, p).ok()?;
        let tangent = linalg::tangent(&dh, reference)?;
        let orbit = orbit_from_data(self.map, u[0], data, self.cfg.tol_eig).ok()?;
        let tests = test_values(&orbit.scaled_eigenvalues);
        let halving = (p % 2 == 0).then(|| self.map.phase_space.difference(&orbit.points[p / 2], &orbit.points[0]));
        Some(Point { u, tangent, orbit, tests, halving })
    }

    pub(crate) fn corrected_point(&self, u_pred: &DVector<f64>, tau: &DVector<f64>, p: usize) -> Option<Point> {
        let (u, _) = self.correct(u_pred, tau, p)?;
        self.make_point(u, tau, p)
    }

    fn seed_point(&self, seed: &PeriodicOrbit) -> Result<Point> {
        let n = self.map.dimension;
        let mut u = DVector::zeros(n + 1);
        u[0] = seed.lambda;
        u.rows_mut(1, n).copy_from(&seed.points[0]);
        let mut reference = DVector::zeros(n + 1);
        reference[0] = 1.0;
        // fixed-λ Newton polish
        let p = seed.period;
        for _ in 0..20 {
            let (h, dh, _) = self.system(&u, p).map_err(|e| Error::BadSeed(e.to_string()))?;
            if h.norm() <= 1e-13 * (1.0 + u.norm()) {
                break;
            }
            let a = dh.columns(1, n).into_owned();
            let dx = linalg::solve(&a, &(-h)).ok_or_else(|| Error::BadSeed("singular system at seed".into()))?;
            let mut x = u.rows_mut(1, n);
            x += &dx;
            if dx.norm() <= 1e-14 * (1.0 + u.norm()) {
                break;
            }
        }
        let (h, _, _) = self.system(&u, p).map_err(|e| Error::BadSeed(e.to_string()))?;
        if !(h.norm() <= 1e-8 * (1.0 + u.norm())) {
            return Err(Error::BadSeed(format!("seed residual {:e}", h.norm())));
        }
        self.make_point(u, &reference, p).ok_or_else(|| Error::BadSeed("tangent undefined at seed".into()))
    }

    fn escaped(&self, pt: &Point) -> bool {
        let l = pt.u[0];
        l < self.domain.0 || l > self.domain.1 || pt.orbit.points.iter().any(|x| x.norm() > self.cfg.escape_radius)
    }

    fn eigen_jump(&self, a: &Point, b: &Point) -> bool {
        let ea = &a.orbit.eigenvalues;
        let eb = &b.orbit.eigenvalues;
        if ea.len() != eb.len() {
            return true;
        }
        ea.iter().any(|x| {
            let d = eb.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min);
            d > self.cfg.max_eigenvalue_change * (1.0 + x.norm())
        })
    }

    fn try_step(&self, cur: &Point, h: f64) -> (StepOutcome, usize) {
        let p = cur.period();
        let u_pred = &cur.u + &cur.tangent * h;
        let Some((u, iters)) = self.correct(&u_pred, &cur.tangent, p) else {
            return (StepOutcome::Reject, usize::MAX);
        };
        let Some(pt) = self.make_point(u, &cur.tangent, p) else {
            return (StepOutcome::Reject, usize::MAX);
        };
        if pt.tangent.dot(&cur.tangent) < self.cfg.min_tangent_cos && !self.escaped(&pt) {
            return (StepOutcome::Reject, iters);
        }
        if self.eigen_jump(cur, &pt) && !self.escaped(&pt) {
            return (StepOutcome::Reject, iters);
        }
        (StepOutcome::Accept(pt), iters)
    }

    fn halving_crossed(&self, cur: &Point, new: &Point) -> bool {
        match (&cur.halving, &new.halving) {
            (Some(a), Some(b)) => a.dot(b) < 0.0 || b.norm() <= 1e-7 * (1.0 + new.orbit.points[0].norm()),
            _ => false,
        }
    }

    fn sign_changes(&self, cur: &Point, new: &Point) -> Vec<EventKind> {
        let mut ev = Vec::new();
        if cur.tests.t_plus * new.tests.t_plus < 0.0 {
            ev.push(EventKind::SaddleNode);
        }
        if cur.tests.t_minus * new.tests.t_minus < 0.0 {
            ev.push(EventKind::PeriodDoubling);
        }
        if cur.tests.complex_pairs > 0
            && cur.tests.complex_pairs == new.tests.complex_pairs
            && cur.tests.t_hopf * new.tests.t_hopf < 0.0
        {
            ev.push(EventKind::Hopf);
        }
        ev
    }

    /// Orbit index on the hyperbolic segment leaving `base` along `dir`.
    fn probe(&self, base: &DVector<f64>, dir: &DVector<f64>, p: usize) -> Option<Point> {
        let mut delta = 1e-7 * (1.0 + base.norm());
        for _ in 0..8 {
            if let Some(pt) = self.corrected_point(&(base + dir * delta), dir, p) {
                let away = (&pt.u - base).dot(dir) > 0.0;
                if pt.orbit.hyperbolic() && away {
                    return Some(pt);
                }
            }
            delta *= 4.0;
        }
        None
    }

    fn event_orbit_point(&self, u: &DVector<f64>, reference: &DVector<f64>, p: usize) -> Option<Point> {
        self.make_point(u.clone(), reference, p)
    }

    fn march(&self, start: Point, seed_orbit: &PeriodicOrbit) -> Result<March> {
        let cfg = self.cfg;
        let mut points = vec![start];
        let mut events: Vec<(usize, BifurcationEvent)> = Vec::new();
        let mut h = cfg.initial_step * self.scale;
        let h_max = cfg.max_step * self.scale;
        let h_min = cfg.min_step * self.scale;
        let h_init = h;
        let mut easy = 0;
        let mut arclength = 0.0;
        let mut ambiguous = 0;
        for _ in 0..cfg.max_steps {
            if arclength > cfg.max_arclength * self.scale {
                return Ok(March { points, events, termination: Termination::MaxArclength });
            }
            if h < h_min {
                return Ok(March { points, events, termination: Termination::StepUnderflow });
            }
            let cur = points.last().expect("nonempty").clone();
            let (outcome, iters) = self.try_step(&cur, h);
            let new = match outcome {
                StepOutcome::Reject => {
                    h *= 0.5;
                    easy = 0;
                    continue;
                }
                StepOutcome::Accept(pt) => pt,
            };
            if self.escaped(&new) {
                return Ok(March { points, events, termination: Termination::LeftDomain });
            }
            let mut kinds = self.sign_changes(&cur, &new);
            let halved = self.halving_crossed(&cur, &new);
            if halved && !kinds.contains(&EventKind::PeriodDoubling) {
                kinds.push(EventKind::PeriodDoubling);
            }
            if kinds.len() > 1 {
                ambiguous += 1;
                h *= 0.5;
                if h < h_min || ambiguous > 60 {
                    return Err(Error::AmbiguousEvent(format!(
                        "{:?} near lambda = {}",
                        kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>(),
                        cur.u[0]
                    )));
                }
                continue;
            }
            ambiguous = 0;
            let step_len = (&new.u - &cur.u).norm();
            match kinds.first() {
                None => {
                    points.push(new);
                }
                Some(EventKind::SaddleNode) | Some(EventKind::Hopf) => {
                    let kind = kinds[0];
                    let test = move |pt: &Point| match kind {
                        EventKind::SaddleNode => pt.tests.t_plus,
                        _ => pt.tests.t_hopf,
                    };
                    let f_a = test(&cur);
                    let ev_pt = self
                        .bisect(&cur.u, &cur.tangent, h, cur.period(), f_a, test)
                        .ok_or_else(|| Error::NoConvergence(format!("{} refinement", kind.as_str())))?;
                    let incoming = cur.orbit.index().or_else(|| self.probe(&ev_pt.u, &(-&cur.tangent), cur.period()).and_then(|p| p.orbit.index()));
                    let outgoing = new.orbit.index().or_else(|| self.probe(&ev_pt.u, &new.tangent, new.period()).and_then(|p| p.orbit.index()));
                    let event = BifurcationEvent {
                        kind,
                        lambda: ev_pt.u[0],
                        orbit: ev_pt.orbit.clone(),
                        period: cur.period(),
                        incoming_index: incoming,
                        outgoing_index: outgoing,
                        incoming_period: cur.period(),
                        outgoing_period: cur.period(),
                        doubling: None,
                        position: 0,
                    };
                    let mut ev_point = ev_pt;
                    ev_point.tangent = cur.tangent.clone();
                    points.push(ev_point);
                    events.push((points.len() - 1, event));
                    points.push(new);
                }
                Some(EventKind::PeriodDoubling) => {
                    let next = if halved {
                        self.handle_halving(&cur, h, &mut points, &mut events)?
                    } else {
                        self.handle_doubling(&cur, &new, h, &mut points, &mut events)?
                    };
                    match next {
                        Some(pt) => points.push(pt),
                        None => {
                            let termination = if 2 * cur.period() > self.max_period {
                                Termination::MaxPeriodReached
                            } else {
                                Termination::ShootingLimit
                            };
                            return Ok(March { points, events, termination });
                        }
                    }
                    h = h_init.min(h);
                    easy = 0;
                }
            }
            arclength += step_len;
            if iters <= 3 {
                easy += 1;
                if easy >= cfg.easy_steps_to_grow {
                    h = (h * cfg.growth).min(h_max);
                    easy = 0;
                }
            } else {
                easy = 0;
            }
            let last = points.last().expect("nonempty");
            if arclength > 10.0 * h_init
                && last.period() == seed_orbit.period
                && hausdorff_distance(&last.orbit, seed_orbit) < cfg.closed_loop_tol.max(1.5 * h)
                && self.closes(last, seed_orbit)
            {
                return Ok(March { points, events, termination: Termination::ClosedLoop });
            }
        }
        Ok(March { points, events, termination: Termination::MaxArclength })
    }

    fn closes(&self, last: &Point, seed: &PeriodicOrbit) -> bool {
        let n = self.map.dimension;
        let mut u = DVector::zeros(n + 1);
        u[0] = seed.lambda;
        u.rows_mut(1, n).copy_from(&seed.points[0]);
        match self.correct(&u, &last.tangent, last.period()) {
            Some((v, _)) => (&v - &u).norm() < self.cfg.closed_loop_tol.max(1e-9 * (1.0 + u.norm())),
            None => false,
        }
    }

    /// Period doubling met on the lower-period branch: record the event and
    /// move onto the doubled branch.
    fn handle_doubling(
        &self,
        cur: &Point,
        new: &Point,
        h: f64,
        points: &mut Vec<Point>,
        events: &mut Vec<(usize, BifurcationEvent)>,
    ) -> Result<Option<Point>> {
        let p = cur.period();
        let approx = self
            .bisect(&cur.u, &cur.tangent, h, p, cur.tests.t_minus, |pt| pt.tests.t_minus)
            .ok_or_else(|| Error::NoConvergence("period-doubling refinement".into()))?;
        let u_star = locate_period_doubling(self.map, &approx.u, p)
            .ok()
            .filter(|u| (u - &approx.u).norm() < 1e-4 * (1.0 + approx.u.norm()))
            .unwrap_or(approx.u.clone());
        let ev = self.event_orbit_point(&u_star, &cur.tangent, p).unwrap_or(approx);
        let phi_in = cur.orbit.index().or_else(|| self.probe(&ev.u, &(-&ev.tangent), p).and_then(|q| q.orbit.index()));
        let phi_beyond = if new.orbit.hyperbolic() {
            new.orbit.index()
        } else {
            self.probe(&ev.u, &ev.tangent, p).and_then(|q| q.orbit.index())
        };
        let seed = switch_branch_pd(self.map, &ev.orbit, self.cfg);
        let growth = ev.orbit.eigenvalues.iter().map(|m| m.norm()).fold(0.0, f64::max).powi(2);
        if seed.is_err() && growth > self.cfg.max_shooting_growth {
            return Ok(None);
        }
        let (phi_c, side_c, seed_point) = match &seed {
            Ok(s) => {
                let start = self.make_point(s.u.clone(), &s.tangent, 2 * p);
                let hyper = match &start {
                    Some(pt) if pt.orbit.hyperbolic() => Some(pt.clone()),
                    _ => self.probe(&s.u, &s.tangent, 2 * p),
                };
                let phi = hyper.as_ref().and_then(|q| q.orbit.index());
                let side = hyper.as_ref().map(|q| (q.u[0] - u_star[0]).signum()).unwrap_or((s.u[0] - u_star[0]).signum());
                (phi, side, start)
            }
            Err(_) => (None, 0.0, None),
        };
        let side_in = (cur.u[0] - u_star[0]).signum();
        let (phi_a, phi_b) = if side_in == side_c { (phi_beyond, phi_in) } else { (phi_in, phi_beyond) };
        let event = BifurcationEvent {
            kind: EventKind::PeriodDoubling,
            lambda: u_star[0],
            orbit: ev.orbit.clone(),
            period: p,
            incoming_index: phi_in,
            outgoing_index: phi_c,
            incoming_period: p,
            outgoing_period: 2 * p,
            doubling: Some(DoublingIndices { phi_a, phi_b, phi_c }),
            position: 0,
        };
        let mut ev_point = ev;
        ev_point.tangent = cur.tangent.clone();
        points.push(ev_point);
        events.push((points.len() - 1, event));
        if 2 * p > self.max_period {
            return Ok(None);
        }
        match (seed, seed_point) {
            (Ok(_), Some(pt)) => Ok(Some(pt)),
            _ => Err(Error::BranchSwitchFailure(u_star[0])),
        }
    }

    /// Doubled branch returned to its period-doubling point: continue on the
    /// nonflip side of the lower-period branch.
    fn handle_halving(
        &self,
        cur: &Point,
        h: f64,
        points: &mut Vec<Point>,
        events: &mut Vec<(usize, BifurcationEvent)>,
    ) -> Result<Option<Point>> {
        let q = cur.period();
        let p = q / 2;
        let guess_from = |pt: &Point| {
            let x = state_of(&pt.u);
            let d = pt.halving.clone().unwrap_or_else(|| DVector::zeros(x.len()));
            let mut g = pt.u.clone();
            g.rows_mut(1, x.len()).copy_from(&(&x + d * 0.5));
            g
        };
        let mut u_star = locate_period_doubling(self.map, &guess_from(cur), p).ok();
        if u_star.is_none() {
            let d_ref = cur.halving.clone().expect("even period");
            if let Some(near) = self.bisect(&cur.u, &cur.tangent, h, q, 1.0, |pt| {
                pt.halving.as_ref().map_or(1.0, |d| d.dot(&d_ref).signum() * d.norm().max(1e-300))
            }) {
                u_star = locate_period_doubling(self.map, &guess_from(&near), p).ok();
            }
        }
        let u_star = u_star.ok_or(Error::BranchSwitchFailure(cur.u[0]))?;
        let n = self.map.dimension;
        let (_, dh, _) = self.system(&u_star, p)?;
        let mut reference = DVector::zeros(n + 1);
        reference[0] = 1.0;
        let tau = linalg::tangent(&dh, &reference).ok_or(Error::BranchSwitchFailure(u_star[0]))?;
        let plus = self.probe(&u_star, &tau, p);
        let minus = self.probe(&u_star, &(-&tau), p);
        let nonflip = |o: &Option<Point>| o.as_ref().is_some_and(|pt| pt.orbit.is_nonflip());
        let chosen = match (nonflip(&plus), nonflip(&minus)) {
            (true, false) => plus.clone(),
            (false, true) => minus.clone(),
            _ => return Err(Error::BranchSwitchFailure(u_star[0])),
        }
        .expect("probe present");
        let ev = self.event_orbit_point(&u_star, &chosen.tangent, p).ok_or(Error::BranchSwitchFailure(u_star[0]))?;
        let side_c = (cur.u[0] - u_star[0]).signum();
        let phi_c = cur.orbit.index();
        let (phi_plus, phi_minus) = (plus.as_ref().and_then(|x| x.orbit.index()), minus.as_ref().and_then(|x| x.orbit.index()));
        let lam_plus = plus.as_ref().map_or(f64::NAN, |x| x.u[0]);
        let (phi_b, phi_a) = if (lam_plus - u_star[0]).signum() == side_c { (phi_plus, phi_minus) } else { (phi_minus, phi_plus) };
        let event = BifurcationEvent {
            kind: EventKind::PeriodDoubling,
            lambda: u_star[0],
            orbit: ev.orbit.clone(),
            period: p,
            incoming_index: phi_c,
            outgoing_index: chosen.orbit.index(),
            incoming_period: q,
            outgoing_period: p,
            doubling: Some(DoublingIndices { phi_a, phi_b, phi_c }),
            position: 0,
        };
        let mut ev_point = ev;
        ev_point.tangent = chosen.tangent.clone();
        points.push(ev_point);
        events.push((points.len() - 1, event));
        Ok(Some(chosen))
    }
}

/// Continues the component of nonflip orbits through `seed` in both
/// directions and returns it in index-orientation order (`dλ/ds = -φ`).
pub fn continue_component(
    map: &MapDefinition,
    seed: &PeriodicOrbit,
    domain: (f64, f64),
    cfg: &ContinuationConfig,
) -> Result<ComponentTrace> {
    if seed.is_flip() {
        return Err(Error::NotNonflip);
    }
    if !seed.hyperbolic() {
        return Err(Error::BadSeed("seed orbit is not hyperbolic".into()));
    }
    if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
        return Err(Error::BadParameter("domain must be a finite interval".into()));
    }
    if seed.lambda < domain.0 || seed.lambda > domain.1 {
        return Err(Error::BadSeed("seed parameter outside the domain".into()));
    }
    let tracer = Tracer {
        map,
        cfg,
        domain,
        scale: domain.1 - domain.0,
        max_period: cfg.max_period.unwrap_or(64 * seed.period),
    };
    let start = tracer.seed_point(seed)?;
    let phi = start.orbit.index().ok_or_else(|| Error::BadSeed("seed lost hyperbolicity".into()))?;
    let mut forward_start = start.clone();
    if forward_start.tangent[0] * (-phi as f64) < 0.0 {
        forward_start.tangent = -forward_start.tangent;
    }
    let mut backward_start = forward_start.clone();
    backward_start.tangent = -&forward_start.tangent;

    let fwd = tracer.march(forward_start, &start.orbit)?;
    let bwd = if fwd.termination == Termination::ClosedLoop {
        March { points: vec![backward_start], events: vec![], termination: Termination::ClosedLoop }
    } else {
        tracer.march(backward_start, &start.orbit)?
    };

    // assemble: reversed backward half (without the seed), then forward half
    let nb = bwd.points.len();
    let mut snapshots = Vec::new();
    let mut tangents = Vec::new();
    let mut us: Vec<DVector<f64>> = Vec::new();
    for pt in bwd.points.iter().skip(1).rev() {
        snapshots.push(pt.orbit.clone());
        tangents.push(-pt.tangent[0]);
        us.push(pt.u.clone());
    }
    let seed_position = snapshots.len();
    for pt in &fwd.points {
        snapshots.push(pt.orbit.clone());
        tangents.push(pt.tangent[0]);
        us.push(pt.u.clone());
    }
    let mut events = Vec::new();
    for (pos, ev) in bwd.events.into_iter().rev() {
        let mut ev = ev.reversed();
        ev.position = nb - 1 - pos;
        events.push(ev);
    }
    for (pos, mut ev) in fwd.events {
        ev.position = seed_position + pos;
        events.push(ev);
    }
    let mut arclength = vec![0.0; us.len()];
    for i in 1..us.len() {
        arclength[i] = arclength[i - 1] + (&us[i] - &us[i - 1]).norm();
    }
    let orientation_sign_history = snapshots
        .iter()
        .zip(&tangents)
        .zip(&arclength)
        .map(|((o, t), s)| OrientationSample {
            arclength: *s,
            dlambda_sign: if *t > 0.0 {
                1
            } else if *t < 0.0 {
                -1
            } else {
                0
            },
            index: o.index(),
        })
        .collect();
    Ok(ComponentTrace {
        map: map.clone(),
        seed: start.orbit,
        seed_position,
        snapshots,
        dlambda_ds: tangents,
        arclength,
        events,
        orientation_sign_history,
        start_termination: bwd.termination,
        termination: fwd.termination,
        domain,
    })
}
