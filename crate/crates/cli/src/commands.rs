use anyhow::{bail, Result};
use serde_json::json;

use erw_core::cgf::{self, CgfConvention, CgfCurve};
use erw_core::exact::{self, WalkInit};
use erw_core::mc::{self, Mechanism};
use erw_core::urn::{critical_params, step_limit_critical_params, x_from_y, UrnFunctionSpec};
use erw_core::{phase, trajectories, UrnSpec64};

use crate::args::*;
use crate::output::{Cell, PlotSpec, Report, Table};

/// Invalid command-line input detected by the front end itself.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

macro_rules! usage {
    ($($t:tt)*) => {
        bail!(Usage(format!($($t)*)))
    };
}

pub fn run(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::FixedPoints(a) => fixed_points(a),
        Command::Critical(a) => critical(a),
        Command::ExactDist(a) => exact_dist(a),
        Command::Entropy(a) => entropy(a),
        Command::Mc(a) => monte_carlo(a),
        Command::Crossings(a) => crossings(a),
        Command::Trajectory(a) => trajectory(a),
        Command::OptimalPath(a) => optimal_path(a),
        Command::Cgf(a) => cgf_cmd(a),
        Command::Legendre(a) => legendre(a),
        Command::PhaseScan(a) => phase_scan(a),
        Command::DecayExponent(a) => decay(a),
        Command::CurrentCheck(a) => current_check(a),
    }
}

pub fn seed_of(cmd: &Command) -> Option<u64> {
    match cmd {
        Command::Mc(a) => Some(a.seed),
        Command::Crossings(a) => Some(a.seed),
        _ => None,
    }
}

fn spec(u: &UrnArgs) -> Result<UrnSpec64> {
    Ok(match u.kind {
        UrnKind::Majority => UrnFunctionSpec::majority(u.k, u.p)?,
        UrnKind::Linear => UrnFunctionSpec::linear(u.a, u.b)?,
        UrnKind::Kgw => UrnFunctionSpec::kgw(u.j)?,
        UrnKind::StepLimit => UrnFunctionSpec::step_limit(u.p)?,
    })
}

fn init(i: &InitArgs) -> Result<WalkInit> {
    Ok(WalkInit::new(i.init_steps, i.init_positive)?)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || lo.is_nan() || hi.is_nan() || lo > hi || (n > 1 && lo == hi) {
        usage!("grid needs at least one point and lo < hi (got {lo}..{hi}, {n} points)");
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect())
}

fn line(x: &'static str, y: &[&'static str], title: String) -> Option<PlotSpec> {
    Some(PlotSpec {
        x,
        y: y.to_vec(),
        title,
        scatter: false,
    })
}

fn fixed_points(a: &FixedPointsArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let mut t = Table::new(&["y", "x", "derivative", "crossing"]);
    for f in s.fixed_points() {
        t.push(vec![
            f.location.into(),
            x_from_y(f.location)?.into(),
            f.derivative.into(),
            f.crossing.name().into(),
        ]);
    }
    Ok(Report {
        summary: json!({ "count": t.rows.len(), "spec": s }),
        table: t,
        plot: None,
    })
}

fn critical(a: &CriticalArgs) -> Result<Report> {
    let c = if a.step_limit {
        step_limit_critical_params::<f64>()
    } else {
        critical_params::<f64>(a.k)?
    };
    let mut t = Table::new(&["name", "value"]);
    t.push(vec!["p_c".into(), c.p_c.into()]);
    t.push(vec!["p_star".into(), c.p_star.into()]);
    t.push(vec!["p_double_star".into(), c.p_double_star.into()]);
    Ok(Report {
        summary: json!({ "p_c": c.p_c, "p_star": c.p_star, "p_double_star": c.p_double_star }),
        table: t,
        plot: None,
    })
}

fn exact_dist(a: &ExactDistArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let tab = exact::evolve(&s, init(&a.init)?, a.n)?;
    let mut t = Table::new(&["N", "n", "y", "log_prob"]);
    for (n, &l) in tab.log_prob.iter().enumerate() {
        t.push(vec![a.n.into(), n.into(), tab.share(n).into(), l.into()]);
    }
    Ok(Report {
        summary: json!({ "log_total": tab.log_total(), "modes": tab.modes() }),
        table: t,
        plot: line("y", &["log_prob"], format!("exact log-probability, N = {}", a.n)),
    })
}

fn entropy_table(curve: &exact::EntropyCurve<f64>) -> Table {
    let mut t = Table::new(&["y", "phi", "method"]);
    let label = curve.method.label();
    for (&y, &phi) in curve.y.iter().zip(&curve.phi) {
        t.push(vec![y.into(), phi.into(), label.as_str().into()]);
    }
    t
}

fn entropy(a: &EntropyArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let mut ns = a.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let tables = exact::evolve_snapshots(&s, init(&a.init)?, &ns)?;
    let curve = if tables.len() == 1 {
        tables[0].entropy_profile()
    } else {
        let ys = linspace(a.y_min, a.y_max, a.y_points)?;
        exact::extrapolate_entropy(&tables, &ys)?
    };
    Ok(Report {
        summary: json!({ "method": curve.method.label(), "sizes": ns }),
        table: entropy_table(&curve),
        plot: line("y", &["phi"], "entropy density".into()),
    })
}

fn mechanism(m: MechanismArg) -> Mechanism {
    match m {
        MechanismArg::Direct => Mechanism::Direct,
        MechanismArg::Collapsed => Mechanism::Collapsed,
    }
}

fn ensemble_table(e: &mc::EnsembleResult<f64>) -> Table {
    let mut t = Table::new(&["sample_index", "final_count", "y_final", "crossings"]);
    let with_crossings = e.crossings.is_some();
    for o in &e.outcomes {
        t.push(vec![
            o.index.into(),
            o.final_count.into(),
            (o.final_count as f64 / e.n_steps as f64).into(),
            if with_crossings {
                o.crossings.into()
            } else {
                Cell::Missing
            },
        ]);
    }
    t
}

fn histogram_plot(title: String) -> Option<PlotSpec> {
    Some(PlotSpec {
        x: "sample_index",
        y: vec!["y_final"],
        title,
        scatter: true,
    })
}

fn monte_carlo(a: &McArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let e = mc::run_ensemble(&s, init(&a.init)?, a.n, a.samples, a.seed, mechanism(a.mechanism), None)?;
    Ok(Report {
        summary: json!({
            "samples": e.samples,
            "N": e.n_steps,
            "seed": e.seed,
            "mechanism": e.mechanism.label(),
            "mean_abs_x": e.mean_abs_x(),
            "fraction_positive": e.fraction_positive(),
            "histogram": e.histogram,
        }),
        table: ensemble_table(&e),
        plot: histogram_plot(format!("final shares, N = {}", a.n)),
    })
}

fn crossings(a: &CrossingsArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let e = mc::crossing_stats(&s, init(&a.init)?, a.n, a.samples, a.level, a.seed)?;
    Ok(Report {
        summary: json!({
            "samples": e.samples,
            "N": e.n_steps,
            "seed": e.seed,
            "crossings": e.crossings,
            "after": a.after,
            "fraction_without_crossing_after": e.fraction_settled_after(a.after),
        }),
        table: ensemble_table(&e),
        plot: Some(PlotSpec {
            x: "sample_index",
            y: vec!["crossings"],
            title: format!("crossings of y = {}", a.level),
            scatter: true,
        }),
    })
}

fn trajectory_table(s: &UrnSpec64, tr: &trajectories::Trajectory<f64>) -> Table {
    let mut t = Table::new(&["tau", "psi", "phi", "local_cost"]);
    let phi = tr.phi();
    let cost = tr.local_cost(s);
    for j in 0..tr.tau.len() {
        t.push(vec![tr.tau[j].into(), tr.psi[j].into(), phi[j].into(), cost[j].into()]);
    }
    t
}

fn trajectory(a: &TrajectoryArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let grid = trajectories::log_tau_grid(a.eps, a.points)?;
    let tr = trajectories::zero_cost_path(&s, a.y, &grid)?;
    Ok(Report {
        summary: json!({ "rate": tr.rate, "psi_at_eps": tr.psi[0] }),
        table: trajectory_table(&s, &tr),
        plot: line("tau", &["psi"], format!("zero-cost path to y = {}", a.y)),
    })
}

fn optimal_path(a: &OptimalPathArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let g = trajectories::VariationalGrid::new(a.time_steps, a.phi_levels)?;
    let out = trajectories::optimal_path(&s, a.y, g)?;
    Ok(Report {
        summary: json!({ "rate": out.rate(), "entropy": -out.rate() }),
        table: trajectory_table(&s, &out.trajectory),
        plot: line("tau", &["psi"], format!("optimal path to y = {}", a.y)),
    })
}

fn cgf_curve(s: &UrnSpec64, o: &CgfOptions) -> Result<CgfCurve<f64>> {
    if !(o.lambda_min > 0.0 && o.lambda_min < o.lambda_max) || o.lambda_points < 2 {
        usage!("λ grid needs 0 < lambda-min < lambda-max and at least two points");
    }
    let grid = cgf::geometric_grid(o.lambda_min, o.lambda_max, o.lambda_points);
    let conv = match o.convention {
        ConventionArg::Increasing => CgfConvention::Increasing,
        ConventionArg::Decreasing => CgfConvention::Decreasing,
    };
    Ok(match o.source {
        CgfSource::Ode => cgf::cgf_ode(s, &grid, conv)?,
        CgfSource::FiniteN => {
            let tab = exact::evolve(s, init(&o.init)?, o.n)?;
            cgf::finite_n_cgf(&tab, &grid, conv)
        }
        CgfSource::ClosedForm => {
            let UrnFunctionSpec::MajorityMemory { k: 1, p } = *s else {
                usage!("the closed form exists only for --kind majority --k 1");
            };
            if conv != CgfConvention::Increasing {
                usage!("the closed form is available in the increasing convention only");
            }
            cgf::closed_form_curve(p, &grid)?
        }
    })
}

fn cgf_cmd(a: &CgfArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let c = cgf_curve(&s, &a.cgf)?;
    let mut t = Table::new(&["lambda", "zeta", "provenance"]);
    let label = c.provenance.label();
    for (&l, &z) in c.lambda.iter().zip(&c.zeta) {
        t.push(vec![l.into(), z.into(), label.as_str().into()]);
    }
    let singular = match s {
        UrnFunctionSpec::MajorityMemory { k: 1, p } if p > 0.5 && p < 1.0 => {
            let (order, log) = cgf::singular_order(p)?;
            json!({ "order": order, "logarithmic": log })
        }
        _ => serde_json::Value::Null,
    };
    Ok(Report {
        summary: json!({ "convention": c.convention.label(), "provenance": label, "singular_derivative": singular }),
        table: t,
        plot: line("lambda", &["zeta"], "cumulant generating function".into()),
    })
}

fn legendre(a: &LegendreArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let c = cgf_curve(&s, &a.cgf)?;
    let ys = linspace(a.y_min, a.y_max, a.y_points)?;
    let e = cgf::legendre_entropy(&c, &ys)?;
    Ok(Report {
        summary: json!({ "convention": c.convention.label(), "cgf_provenance": c.provenance.label() }),
        table: entropy_table(&e),
        plot: line("y", &["phi"], "entropy density (Legendre)".into()),
    })
}

fn phase_scan(a: &PhaseScanArgs) -> Result<Report> {
    let ps = linspace(a.p_min, a.p_max, a.p_points)?;
    let xs = linspace(-1.0, 1.0, a.x_points)?;
    let cells = phase::scan(a.k, &ps, &xs)?;
    let mut t = Table::new(&["p", "x", "region", "is_p_star", "is_p_c", "is_p_double_star"]);
    let mut plateau = 0usize;
    for c in &cells {
        if c.region == phase::Region::ZeroEntropyPlateau {
            plateau += 1;
        }
        t.push(vec![
            c.p.into(),
            c.x.into(),
            c.region.name().into(),
            c.is_p_star.into(),
            c.is_p_c.into(),
            c.is_p_double_star.into(),
        ]);
    }
    let crit = critical_params::<f64>(a.k)?;
    Ok(Report {
        summary: json!({ "plateau_cells": plateau, "critical": { "p_c": crit.p_c, "p_star": crit.p_star, "p_double_star": crit.p_double_star } }),
        table: t,
        plot: Some(PlotSpec {
            x: "p",
            y: vec!["x"],
            title: format!("phase diagram, k = {}", a.k),
            scatter: true,
        }),
    })
}

fn decay(a: &DecayArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let fit = exact::decay_exponent(&s, init(&a.init)?, a.y1, a.y2, &a.n)?;
    let mut t = Table::new(&["N", "log_mass"]);
    for (&n, &m) in fit.n_steps.iter().zip(&fit.log_masses) {
        t.push(vec![n.into(), m.into()]);
    }
    Ok(Report {
        summary: json!({ "exponent": fit.exponent, "warning": fit.warning }),
        table: t,
        plot: line("N", &["log_mass"], format!("interval mass ({}, {})", a.y1, a.y2)),
    })
}

fn parse_pairs(raw: &[String]) -> Result<Vec<(usize, f64)>> {
    raw.iter()
        .map(|p| {
            let Some((n, tau)) = p.split_once(':') else {
                usage!("pair {p:?} is not of the form N:tau");
            };
            match (n.trim().parse::<usize>(), tau.trim().parse::<f64>()) {
                (Ok(n), Ok(t)) => Ok((n, t)),
                _ => usage!("pair {p:?} is not of the form N:tau"),
            }
        })
        .collect()
}

fn current_check(a: &CurrentCheckArgs) -> Result<Report> {
    let s = spec(&a.urn)?;
    let pairs = parse_pairs(&a.pairs)?;
    let r = trajectories::current_conservation_check(&s, a.y1, a.y2, &pairs)?;
    let mut t = Table::new(&[
        "N",
        "tau",
        "early_steps",
        "psi1",
        "psi2",
        "log_mass_final",
        "log_mass_early",
        "delta",
    ]);
    for e in &r.entries {
        t.push(vec![
            e.n_steps.into(),
            e.tau.into(),
            e.early_steps.into(),
            e.psi1.into(),
            e.psi2.into(),
            e.log_mass_final.into(),
            e.log_mass_early.into(),
            e.delta.into(),
        ]);
    }
    let max = r.applicable.then_some(r.max_abs_delta);
    Ok(Report {
        summary: json!({ "applicable": r.applicable, "note": r.note, "max_abs_delta": max }),
        table: t,
        plot: None,
    })
}
