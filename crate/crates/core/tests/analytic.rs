//! Continuum quantities checked against exact finite-N laws and closed forms.

use erw_core::cgf::{
    cgf_ode, closed_form_curve, convention_check, finite_n_cgf, geometric_grid, legendre_entropy, CgfConvention,
};
use erw_core::exact::{evolve, evolve_snapshots, extrapolate_entropy, WalkInit};
use erw_core::phase::{scan, Region};
use erw_core::trajectories::{
    auxiliary_l, current_conservation_check, log_tau_grid, optimal_path, rate_functional, zero_cost_path,
    VariationalGrid,
};
use erw_core::UrnSpec64;

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn ode_reproduces_closed_form() {
    let grid = geometric_grid(1e-3, 10.0, 120);
    for p in [0.55, 0.6, 0.75, 0.9, 0.97] {
        let spec = UrnSpec64::majority(1, p).unwrap();
        let ode = cgf_ode(&spec, &grid, CgfConvention::Increasing).unwrap();
        let cf = closed_form_curve(p, &grid).unwrap();
        let gap = max_gap(&ode.zeta, &cf.zeta);
        assert!(gap <= 1e-6, "p={p}: {gap}");
    }
}

#[test]
fn ode_tracks_finite_n_transform_for_k3() {
    let spec = UrnSpec64::majority(3, 0.8).unwrap();
    let grid = geometric_grid(0.1, 5.0, 40);
    let ode = cgf_ode(&spec, &grid, CgfConvention::Increasing).unwrap();
    let table = evolve(&spec, WalkInit::default(), 8000).unwrap();
    let fin = finite_n_cgf(&table, &grid, CgfConvention::Increasing);
    assert!(max_gap(&ode.zeta, &fin.zeta) <= 2e-3);
    assert!(convention_check(&ode, &table, 2e-3).consistent);
}

#[test]
fn mislabelled_convention_is_detected() {
    let spec = UrnSpec64::majority(1, 0.75).unwrap();
    let grid = geometric_grid(0.1, 5.0, 30);
    let mut dec = cgf_ode(&spec, &grid, CgfConvention::Decreasing).unwrap();
    let table = evolve(&spec, WalkInit::default(), 4000).unwrap();
    assert!(convention_check(&dec, &table, 5e-3).consistent);
    dec.convention = CgfConvention::Increasing;
    assert!(!convention_check(&dec, &table, 5e-3).consistent);
}

#[test]
fn legendre_dual_matches_exact_entropy() {
    let spec = UrnSpec64::majority(1, 0.75).unwrap();
    let curve = cgf_ode(&spec, &geometric_grid(1e-4, 10.0, 1500), CgfConvention::Increasing).unwrap();
    let ys: Vec<f64> = (0..8).map(|i| 0.55 + 0.05 * i as f64).collect();
    let dual = legendre_entropy(&curve, &ys).unwrap();
    let tables = evolve_snapshots(&spec, WalkInit::default(), &[2000, 4000, 8000, 16000]).unwrap();
    let extra = extrapolate_entropy(&tables, &ys).unwrap();
    for ((y, a), b) in ys.iter().zip(&dual.phi).zip(&extra.phi) {
        assert!((a - b).abs() <= 1e-2, "y={y}: {a} vs {b}");
    }
}

#[test]
fn constant_urn_costs_bernoulli_divergence() {
    let spec = UrnSpec64::fair_coin();
    let grid = VariationalGrid::new(50, 3200).unwrap();
    for i in 0..=10 {
        let y = 0.05 + 0.09 * i as f64;
        let path = optimal_path(&spec, y, grid).unwrap();
        // the straight line is optimal: J = -L(y, 1/2)
        let expected = -auxiliary_l(y, 0.5).unwrap();
        assert!(
            (path.rate() - expected).abs() <= 1e-3,
            "y={y}: {} vs {expected}",
            path.rate()
        );
    }
}

#[test]
fn optimum_beats_straight_line() {
    let spec = UrnSpec64::majority(3, 0.9).unwrap();
    let y = 0.95;
    let path = optimal_path(&spec, y, VariationalGrid::new(100, 6400).unwrap()).unwrap();
    let tau: Vec<f64> = (1..=400).map(|i| i as f64 / 400.0).collect();
    let psi: Vec<f64> = tau.iter().map(|_| y).collect();
    let straight = rate_functional(&spec, &tau, &psi).unwrap();
    assert!(path.rate() <= straight + 1e-9);
    assert!(path.rate() >= 0.0);
}

#[test]
fn plateau_points_cost_almost_nothing() {
    let spec = UrnSpec64::majority(3, 0.9).unwrap();
    let path = optimal_path(&spec, 0.7, VariationalGrid::new(100, 6400).unwrap()).unwrap();
    assert!(path.rate() <= 2e-3, "{}", path.rate());
}

#[test]
fn zero_cost_paths_stay_ordered_and_free() {
    let spec = UrnSpec64::majority(3, 0.9).unwrap();
    let tau = log_tau_grid(1e-6, 2001).unwrap();
    let paths: Vec<_> = [0.55, 0.65, 0.75, 0.85]
        .iter()
        .map(|&y| zero_cost_path(&spec, y, &tau).unwrap())
        .collect();
    for w in paths.windows(2) {
        assert!(w[0].psi.iter().zip(&w[1].psi).all(|(a, b)| a < b));
    }
    for p in &paths {
        assert!(p.rate <= 1e-8);
        // pulled back toward the unstable point as τ shrinks
        assert!((p.psi[0] - 0.5).abs() < (p.psi.last().unwrap() - 0.5).abs());
    }
}

#[test]
fn probability_current_is_conserved_inside_plateau() {
    let spec = UrnSpec64::majority(3, 0.9).unwrap();
    let report = current_conservation_check(&spec, 0.6, 0.7, &[(8000, 0.5), (8000, 0.25)]).unwrap();
    assert!(report.applicable);
    assert!(report.max_abs_delta <= 0.1, "{report:?}");

    let outside = current_conservation_check(&spec, 0.6, 0.99, &[(8000, 0.5)]).unwrap();
    assert!(!outside.applicable);
}

#[test]
fn phase_scan_boundaries() {
    let ps: Vec<f64> = (0..101).map(|i| 0.5 + 0.005 * i as f64).collect();
    let xs: Vec<f64> = (0..201).map(|i| -1.0 + 0.01 * i as f64).collect();
    assert!(scan(1, &ps, &xs)
        .unwrap()
        .iter()
        .all(|c| c.region != Region::ZeroEntropyPlateau));
    let cells = scan(3, &ps, &xs).unwrap();
    for c in cells.iter().filter(|c| c.region == Region::ZeroEntropyPlateau) {
        assert!(c.p > 5.0 / 6.0);
        let edge = ((6.0 * c.p - 5.0) / (2.0 * c.p - 1.0)).sqrt();
        assert!(c.x.abs() < edge + 0.01);
    }
}
