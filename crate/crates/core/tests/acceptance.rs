//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cascades::census::{
    analytic_bounds, boundary_census, cascade_inside, off_on_off_census, predict_cascades, stem_period_check, verify_horseshoe,
    CensusConfig, Family, HorseshoeModel, PredictionCase,
};
use cascades::combinatorics::{cubic_nonflip_count, gamma_1, gamma_n, numeric_census_crosscheck, tent_necklace_census};
use cascades::continuation::{
    check_index_orientation, continue_component, detect_cascades, verify_index_conservation, ComponentTrace, ContinuationConfig,
    EventKind,
};
use cascades::maps::{builtin_names, fd_jacobian};
use cascades::orbits::{find_orbit, hausdorff_distance, NewtonOptions, PeriodicOrbit};
use cascades::sweep::{attracting_set_sweep, SweepConfig};
use cascades::{builtin_map, MapDefinition};
use nalgebra::DVector;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn map(name: &str) -> MapDefinition {
    builtin_map(name, &BTreeMap::new()).expect("builtin map")
}

fn map_with(name: &str, params: &[(&str, f64)]) -> MapDefinition {
    let p = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin_map(name, &p).expect("builtin map")
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_vec(x.to_vec())
}

fn trace(m: &MapDefinition, lambda: f64, x0: &[f64], p: usize, domain: (f64, f64)) -> Result<ComponentTrace, String> {
    let seed = find_orbit(m, lambda, &v(x0), p, &NewtonOptions::default()).map_err(|e| e.to_string())?;
    continue_component(m, &seed, domain, &ContinuationConfig::default()).map_err(|e| e.to_string())
}

fn quadratic_trace() -> Result<ComponentTrace, String> {
    trace(&map("quadratic"), 0.0, &[0.0], 1, (-1.0, 3.0))
}

fn logistic_trace() -> Result<ComponentTrace, String> {
    trace(&map("logistic"), 2.5, &[0.6], 1, (2.0, 4.0))
}

fn coupled_trace() -> Result<ComponentTrace, String> {
    trace(&map_with("coupled_quadratic", &[("c", 0.1)]), 0.0, &[0.0, 0.0], 1, (-1.0, 3.0))
}

fn criterion_1() -> Outcome {
    let t = quadratic_trace()?;
    let sn: Vec<_> = t.events_of(EventKind::SaddleNode).collect();
    let pd: Vec<_> = t.events_of(EventKind::PeriodDoubling).filter(|e| e.incoming_period.min(e.outgoing_period) == 1).collect();
    ensure(sn.len() == 1, format!("{} saddle-nodes", sn.len()))?;
    ensure(pd.len() == 1, format!("{} period-1 doublings", pd.len()))?;
    let (ls, xs) = (sn[0].lambda, sn[0].orbit.points[0][0]);
    let (lp, xp) = (pd[0].lambda, pd[0].orbit.points[0][0]);
    ensure((ls + 0.25).abs() <= 1e-8 && (xs + 0.5).abs() <= 1e-8, format!("saddle-node at ({ls}, {xs})"))?;
    ensure((lp - 0.75).abs() <= 1e-8 && (xp - 0.5).abs() <= 1e-8, format!("doubling at ({lp}, {xp})"))?;
    Ok(format!("saddle-node ({ls:.12}, {xs:.12}), doubling ({lp:.12}, {xp:.12})"))
}

fn criterion_2() -> Outcome {
    let t = quadratic_trace()?;
    let cs = detect_cascades(&t);
    let c = cs.iter().find(|c| c.base_period == 1).ok_or("no period-1 cascade")?;
    ensure(c.doublings() >= 5, format!("{} doublings", c.doublings()))?;
    ensure((c.pd_lambdas[0] - 0.75).abs() <= 1e-8, format!("first doubling {}", c.pd_lambdas[0]))?;
    ensure((c.pd_lambdas[1] - 1.25).abs() <= 1e-8, format!("second doubling {}", c.pd_lambdas[1]))?;
    ensure(c.gaps_decreasing(), format!("gaps not decreasing: {:?}", c.pd_lambdas))?;
    let l = logistic_trace()?;
    let lc = detect_cascades(&l);
    let lc = lc.iter().find(|c| c.base_period == 1).ok_or("no logistic cascade")?;
    let want = [3.0, 1.0 + 6f64.sqrt()];
    for (got, want) in lc.pd_lambdas.iter().zip(want) {
        ensure((got - want).abs() <= 1e-6, format!("logistic doubling {got} vs {want}"))?;
    }
    Ok(format!("quadratic {} doublings, logistic {} doublings", c.doublings(), lc.doublings()))
}

fn criterion_3() -> Outcome {
    let traces = [quadratic_trace()?, logistic_trace()?, coupled_trace()?];
    let mut events = 0;
    for t in &traces {
        let r = verify_index_conservation(t).map_err(|e| format!("{}: {e}", t.map.name))?;
        events += r.checks.len();
    }
    let hopf = traces[2].events_of(EventKind::Hopf).count();
    ensure(hopf > 0, "coupled run has no Hopf event")?;
    Ok(format!("{events} events, 0 violations, {hopf} Hopf"))
}

fn criterion_4() -> Outcome {
    let traces = [quadratic_trace()?, logistic_trace()?, coupled_trace()?];
    let mut checked = 0;
    for t in &traces {
        let r = check_index_orientation(t);
        ensure(r.passed(), format!("{}: violations at arclength {:?}", t.map.name, r.violations))?;
        checked += r.checked;
    }
    ensure(checked > 0, "nothing checked")?;
    Ok(format!("{checked} orientation checks, 0 violations"))
}

/// Least period of a cyclic word.
fn word_period(w: &[u8]) -> usize {
    let k = w.len();
    (1..=k).find(|&d| k % d == 0 && (0..k).all(|i| w[i] == w[(i + d) % k])).unwrap_or(k)
}

/// Brute-force (nonflip, flip) counts of least-period-`k` orbits over `m`
/// symbols; `negatives(s)` lists the coordinates where symbol `s` reverses
/// orientation.
fn brute_force<F: Fn(u8) -> Vec<usize>>(m: u64, k: usize, coords: usize, negatives: F) -> (u64, u64) {
    let mut seen = BTreeSet::new();
    let mut word = vec![0u8; k];
    let total = m.pow(k as u32);
    let (mut nonflip, mut flip) = (0, 0);
    for mut idx in 0..total {
        for s in word.iter_mut() {
            *s = (idx % m) as u8;
            idx /= m;
        }
        if word_period(&word) != k {
            continue;
        }
        let canon = (0..k).map(|r| [&word[r..], &word[..r]].concat()).min().unwrap();
        if !seen.insert(canon) {
            continue;
        }
        let mut parity = vec![0usize; coords];
        for &s in &word {
            for c in negatives(s) {
                parity[c] += 1;
            }
        }
        if parity.iter().filter(|p| *p % 2 == 1).count() % 2 == 0 {
            nonflip += 1;
        } else {
            flip += 1;
        }
    }
    (nonflip, flip)
}

fn criterion_5() -> Outcome {
    for k in 1..=20u64 {
        let rec = gamma_1(k).map_err(|e| e.to_string())?;
        let census = tent_necklace_census(k as usize).map_err(|e| e.to_string())?.nonflip_count;
        ensure(rec == BigUint::from(census), format!("k={k}: recursion {rec} vs necklaces {census}"))?;
        if k <= 16 {
            let (bf, _) = brute_force(2, k as usize, 1, |s| if s == 1 { vec![0] } else { vec![] });
            ensure(rec == BigUint::from(bf), format!("k={k}: recursion {rec} vs brute force {bf}"))?;
        }
    }
    for p in [3u64, 5, 7, 11, 13] {
        let want = ((1u64 << p) - 2) / (2 * p);
        ensure(gamma_1(p).unwrap() == BigUint::from(want), format!("prime {p}"))?;
    }
    let table: Vec<BigUint> = (1..=8).map(|k| gamma_1(k).unwrap()).collect();
    let want: Vec<BigUint> = [1u32, 0, 1, 1, 3, 4, 9, 14].iter().map(|&x| BigUint::from(x)).collect();
    ensure(table == want, format!("table {table:?}"))?;
    Ok("k = 1..20 match, primes match, table 1,0,1,1,3,4,9,14".into())
}

fn criterion_6() -> Outcome {
    for p in [3usize, 5, 7] {
        let want = (3u64.pow(p as u32) - 3) / (2 * p as u64);
        let got = cubic_nonflip_count(p).map_err(|e| e.to_string())?;
        let (bf, _) = brute_force(3, p, 1, |s| if s == 1 { vec![0] } else { vec![] });
        ensure(got == want && bf == want, format!("cubic p={p}: {got}, brute force {bf}, formula {want}"))?;
    }
    let product = |n: usize, k: usize| brute_force(1 << n, k, n, move |s| (0..n).filter(|c| (s >> c) & 1 == 1).collect()).0;
    for (n, k, want) in [(2, 1, 2u64), (2, 2, 2)] {
        let got = gamma_n(n, k).map_err(|e| e.to_string())?;
        ensure(got == want && product(n, k) == want, format!("Gamma({n},{k}) = {got}"))?;
    }
    for n in 1..=8 {
        let got = gamma_n(n, 1).map_err(|e| e.to_string())?;
        let want = 1u64 << (n - 1);
        ensure(got == want && product(n, 1) == want, format!("Gamma({n},1) = {got}"))?;
    }
    Ok("cubic p = 3, 5, 7; Gamma(2,1), Gamma(2,2), Gamma(N,1) for N <= 8".into())
}

fn criterion_7() -> Outcome {
    let cert = verify_horseshoe(Family::Quadratic, 1.0, -2.1, 36.1).map_err(|e| e.to_string())?;
    ensure(cert.passed(), format!("certificate {}", cert.to_json()))?;
    let q = map("quadratic");
    let mut counts = vec![];
    for k in 1..=5 {
        let r = numeric_census_crosscheck(&q, 36.1, k).map_err(|e| e.to_string())?;
        counts.push(r.nonflip_numeric);
    }
    ensure(counts[2] == 1 && counts[4] == 3, format!("quadratic counts {counts:?}"))?;
    let c = map("cubic");
    let mut cubic = vec![];
    for k in 1..=4 {
        let r = numeric_census_crosscheck(&c, 30.0, k).map_err(|e| e.to_string())?;
        cubic.push(r.nonflip_numeric);
    }
    Ok(format!("certificate passed; quadratic nonflip {counts:?}; cubic nonflip {cubic:?}"))
}

/// Cascades per stem period from continuing every cascade-heading boundary
/// orbit of a C0 census.
fn cascades_per_stem(m: &MapDefinition, l0: f64, l1: f64) -> Result<(BTreeMap<usize, usize>, BTreeMap<usize, usize>), String> {
    let census = boundary_census(m, l0, l1, 3, &CensusConfig::default()).map_err(|e| e.to_string())?;
    let pred = predict_cascades(&census).map_err(|e| e.to_string())?;
    ensure(pred.case == PredictionCase::OneToOne, "not the one-to-one case")?;
    ensure(census.complete == (true, true), "census not certified complete")?;
    let mut found = BTreeMap::new();
    let heads: Vec<&PeriodicOrbit> = census.entry_orbits.iter().chain(&census.exit_orbits).filter(|o| o.lambda == l1).collect();
    ensure(!heads.is_empty(), "no nonflip orbits at lambda1")?;
    for o in heads {
        let t = continue_component(m, o, (l0, l1), &ContinuationConfig::default()).map_err(|e| e.to_string())?;
        let cs = detect_cascades(&t);
        let c = cs.first().ok_or_else(|| format!("no cascade from period-{} orbit", o.period))?;
        ensure(cascade_inside(&c.pd_lambdas, l0, l1), format!("cascade window {:?}", c.monotone_window))?;
        ensure(stem_period_check(&t, o), format!("stem period {} vs seed {}", t.min_period(), o.period))?;
        *found.entry(c.base_period).or_insert(0) += 1;
    }
    Ok((pred.per_period, found))
}

fn criterion_8() -> Outcome {
    let (pred, found) = cascades_per_stem(&map("quadratic"), -2.1, 36.1)?;
    ensure(pred == found, format!("predicted {pred:?}, found {found:?}"))?;
    Ok(format!("C0 case, cascades per stem period {found:?}"))
}

fn criterion_9() -> Outcome {
    let (base, _) = cascades_per_stem(&map("quadratic"), -2.1, 36.1)?;
    let m = map_with("perturbed_quadratic", &[("gamma", 3.0)]);
    let beta = HorseshoeModel::from_map(&m).and_then(|h| h.beta).ok_or("no perturbation bound")?;
    let (l0, l1) = analytic_bounds(Family::Quadratic, beta, 0.1);
    let (pred, found) = cascades_per_stem(&m, l0, l1)?;
    ensure(pred == found && found == base, format!("perturbed {found:?} (predicted {pred:?}) vs unperturbed {base:?}"))?;
    Ok(format!("beta {beta:.4}, slab [{l0:.3}, {l1:.3}], cascades per stem period {found:?}"))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pend = map("pendulum_strobe");
    let want = (-0.6 * std::f64::consts::PI).exp();
    for _ in 0..5 {
        let lambda = rng.gen_range(0.0..10.0);
        let x = v(&[rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0)]);
        let det = pend.jacobian(lambda, &x).map_err(|e| e.to_string())?.determinant();
        ensure((det - want).abs() <= 1e-6, format!("det {det} at lambda {lambda}"))?;
    }

    for name in builtin_names() {
        let m = map(name);
        let (lo, hi) = m.spatial_box.clone().unwrap_or((vec![-1.0; m.dimension], vec![1.0; m.dimension]));
        let (pl, ph) = m.param_hint.unwrap_or((0.0, 1.0));
        for _ in 0..3 {
            let lambda = rng.gen_range(pl..ph);
            let x = DVector::from_fn(m.dimension, |i, _| lo[i] + (hi[i] - lo[i]) * rng.gen_range(0.05..0.95));
            let (Ok(j), Ok(fd)) = (m.jacobian(lambda, &x), fd_jacobian(|y| m.eval(lambda, y), &x)) else { continue };
            let err = (&j - &fd).norm() / (1.0 + j.norm());
            ensure(err <= 1e-5, format!("{name}: Jacobian vs difference quotient {err:e}"))?;
        }
    }

    let q = map("quadratic");
    let opts = NewtonOptions::default();
    let mut orbits = vec![];
    while orbits.len() < 30 {
        let lambda = rng.gen_range(1.5..2.0);
        let p = rng.gen_range(1..=4);
        if let Ok(o) = find_orbit(&q, lambda, &v(&[rng.gen_range(-1.5..1.5)]), p, &opts) {
            orbits.push(o);
        }
    }
    for t in orbits.chunks(3) {
        let (a, b, c) = (&t[0], &t[1], &t[2]);
        ensure(hausdorff_distance(a, a) == 0.0, "d(a, a) != 0")?;
        ensure((hausdorff_distance(a, b) - hausdorff_distance(b, a)).abs() < 1e-15, "asymmetric")?;
        ensure(hausdorff_distance(a, c) <= hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-12, "triangle inequality")?;
    }

    let mut last = f64::INFINITY;
    for j in 1..=6 {
        let lambda = 0.75 + 10f64.powi(-j);
        let r = (4.0 * lambda - 3.0).sqrt();
        let child = find_orbit(&q, lambda, &v(&[0.5 + 0.9 * r / 2.0]), 2, &opts).map_err(|e| e.to_string())?;
        let parent = find_orbit(&q, lambda, &v(&[0.5]), 1, &opts).map_err(|e| e.to_string())?;
        ensure(child.period == 2 && parent.period == 1, "wrong periods near the doubling")?;
        let d = hausdorff_distance(&child, &parent);
        ensure(d < last, format!("child-to-parent distance {d} not below {last}"))?;
        last = d;
    }

    let duffing = map("duffing_strobe");
    let mut sweep = SweepConfig::new(0.5, 2.5, 5, v(&[1.0, 0.0]));
    sweep.transient_iterations = 100;
    sweep.record_iterations = 50;
    let data = attracting_set_sweep(&duffing, &sweep).map_err(|e| e.to_string())?;
    ensure(data.escape_count() == 0 && !data.rows.is_empty(), "Duffing sweep escaped")?;
    ensure(data.rows.iter().all(|r| r.2.is_finite() && r.2.abs() < 1e3), "Duffing sweep unbounded")?;

    let cfg = CensusConfig { per_axis: 12, ..Default::default() };
    let cont = ContinuationConfig { max_period: Some(8), ..Default::default() };
    let report = off_on_off_census(&pend, (0.0, 2.5, 10.0), 1, &cfg, &cont, 4).map_err(|e| e.to_string())?;
    ensure(report.unbounded_bound <= 4, format!("unbounded cascade bound {}", report.unbounded_bound))?;
    Ok(format!(
        "determinants, Jacobians, Hausdorff axioms, doubling distances; pendulum unbounded bound {}",
        report.unbounded_bound
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, u64); 10] = [
        ("quadratic landmark bifurcations", criterion_1, 1),
        ("cascade detection", criterion_2, 10),
        ("index conservation", criterion_3, 60),
        ("index orientation", criterion_4, 60),
        ("Gamma(1,k) counts", criterion_5, 1),
        ("cubic and product counts", criterion_6, 10),
        ("horseshoe certificate and numeric census", criterion_7, 60),
        ("boundary-census prediction realized", criterion_8, 300),
        ("large-perturbation robustness", criterion_9, 300),
        ("property suite", criterion_10, 300),
    ];
    let mut failures = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(m) if elapsed > Duration::from_secs(*limit) => Err(format!("{m}; exceeded {limit} s")),
            o => o,
        };
        match outcome {
            Ok(m) => println!("PASS criterion {:>2} {name} ({:.3} s): {m}", i + 1, elapsed.as_secs_f64()),
            Err(m) => {
                failures += 1;
                println!("FAIL criterion {:>2} {name} ({:.3} s): {m}", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
