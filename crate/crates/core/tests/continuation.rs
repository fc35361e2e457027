use std::collections::BTreeMap;

use cascades::continuation::export::{cascades_json, trace_lines};
use cascades::continuation::{
    check_index_conservation, check_index_orientation, continue_component, detect_cascades, detect_cascades_with, BoundedFlag,
    ComponentTrace, ContinuationConfig, EventKind, Termination,
};
use cascades::orbits::{find_orbit, NewtonOptions};
use cascades::{builtin_map, Error};
use nalgebra::DVector;

fn run(name: &str, params: &[(&str, f64)], lambda: f64, x: &[f64], p: usize, domain: (f64, f64)) -> ComponentTrace {
    let o: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let m = builtin_map(name, &o).unwrap();
    let seed = find_orbit(&m, lambda, &DVector::from_vec(x.to_vec()), p, &NewtonOptions::default()).unwrap();
    continue_component(&m, &seed, domain, &ContinuationConfig::default()).unwrap()
}

fn assert_consistent(t: &ComponentTrace) {
    let c = check_index_conservation(t);
    assert!(c.passed(), "{}: {:?}", t.map.name, c.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    let o = check_index_orientation(t);
    assert!(o.passed(), "{}: orientation fails at {:?}", t.map.name, o.violations);
}

#[test]
fn quadratic_period_three_window() {
    let t = run("quadratic", &[], 36.1, &[-5.5367], 3, (-2.1, 36.1));
    assert_consistent(&t);
    let sn: Vec<_> = t.events_of(EventKind::SaddleNode).collect();
    assert_eq!(sn.len(), 1);
    assert!((sn[0].lambda - 1.75).abs() < 1e-8);
    let cs = detect_cascades(&t);
    assert_eq!(cs.len(), 1);
    assert_eq!(cs[0].base_period, 3);
    assert!(cs[0].pd_lambdas[0] > 1.75 && cs[0].pd_lambdas[0] < 1.77);
    assert_eq!(t.min_period(), 3);
}

#[test]
fn trace_runs_in_index_orientation() {
    let t = run("quadratic", &[], 0.0, &[0.0], 1, (-1.0, 3.0));
    let arcs = &t.arclength;
    assert!(arcs.windows(2).all(|w| w[1] >= w[0]));
    for (o, d) in t.snapshots.iter().zip(&t.dlambda_ds) {
        match o.index() {
            Some(1) => assert!(*d <= 1e-12),
            Some(-1) => assert!(*d >= -1e-12),
            _ => {}
        }
    }
    assert_eq!(t.termination, Termination::LeftDomain);
    assert_eq!(t.start_termination, Termination::MaxPeriodReached);
}

#[test]
fn coupled_runs_conserve_index() {
    for c in [0.1, 0.2, 0.3, -0.2] {
        let t = run("coupled_quadratic", &[("c", c)], 0.0, &[0.0, 0.0], 1, (-1.0, 3.0));
        assert_consistent(&t);
        let hopf: Vec<_> = t.events_of(EventKind::Hopf).collect();
        assert!(!hopf.is_empty(), "c = {c}");
        for h in hopf {
            assert_eq!(h.incoming_index, h.outgoing_index);
            assert!(h.eigenvalue_defect() < 1e-7);
        }
    }
}

#[test]
fn doubling_indices_split() {
    let t = run("logistic", &[], 2.5, &[0.6], 1, (2.0, 4.0));
    for e in t.events_of(EventKind::PeriodDoubling) {
        let d = e.doubling.unwrap();
        assert_eq!(d.phi_a, d.phi_b.zip(d.phi_c).map(|(b, c)| b + c));
        assert!((d.phi_a == Some(0)) != (d.phi_b == Some(0)));
        assert!(e.eigenvalue_defect() < 1e-8);
    }
}

#[test]
fn period_cap_bounds_the_cascade() {
    let m = builtin_map("quadratic", &BTreeMap::new()).unwrap();
    let seed = find_orbit(&m, 0.0, &DVector::from_element(1, 0.0), 1, &NewtonOptions::default()).unwrap();
    let cfg = ContinuationConfig { max_period: Some(8), ..Default::default() };
    let t = continue_component(&m, &seed, (-1.0, 3.0), &cfg).unwrap();
    assert!(t.snapshots.iter().all(|o| o.period <= 8));
    assert_eq!(detect_cascades_with(&t, 3)[0].doublings(), 4);
    assert!(detect_cascades_with(&t, 5).is_empty());
    assert_eq!(detect_cascades(&t)[0].bounded_flag, BoundedFlag::UnboundedEnd);
}

#[test]
fn flip_seed_is_rejected() {
    let m = builtin_map("quadratic", &BTreeMap::new()).unwrap();
    let seed = find_orbit(&m, 1.0, &DVector::from_element(1, 0.7), 1, &NewtonOptions::default()).unwrap();
    assert!(seed.is_flip());
    let r = continue_component(&m, &seed, (-1.0, 3.0), &ContinuationConfig::default());
    assert!(matches!(r, Err(Error::NotNonflip)));
}

#[test]
fn export_is_line_per_record() {
    let t = run("quadratic", &[], 0.0, &[0.0], 1, (-1.0, 3.0));
    let lines = trace_lines(&t);
    assert_eq!(lines[0]["type"], "header");
    let orbits = lines.iter().filter(|l| l["type"] == "orbit").count();
    let events = lines.iter().filter(|l| l["type"] == "event").count();
    assert_eq!(orbits, t.snapshots.len());
    assert_eq!(events, t.events.len());
    let cs = cascades_json(&detect_cascades(&t));
    assert_eq!(cs[0]["base_period"], 1);
    assert_eq!(cs[0]["pd_lambdas"][0], 0.75);
}

#[test]
fn modified_logistic_bounded_period_three() {
    let t = run("modified_logistic", &[], 3.2, &[0.1768], 3, (2.5, 4.0));
    assert_consistent(&t);
    assert_eq!(t.start_termination, Termination::MaxPeriodReached);
    assert_eq!(t.termination, Termination::MaxPeriodReached);
    let sn: Vec<f64> = t.events_of(EventKind::SaddleNode).map(|e| e.lambda).collect();
    assert_eq!(sn.len(), 2);
    assert!(sn.iter().all(|l| *l > 2.9 && *l < 3.5));
    let cs = detect_cascades(&t);
    assert_eq!(cs.len(), 2);
    for c in &cs {
        assert_eq!(c.base_period, 3);
        assert_eq!(c.bounded_flag, BoundedFlag::BoundedEnd);
    }
}
