//! Path-space large deviations of the share process.
//!
//! A path is described by `φ(τ)`, the scaled number of positive steps
//! after a fraction `τ` of the walk, or equivalently by the scaled share
//! `ψ(τ) = φ(τ)/τ`. Admissible paths have `φ(0) = 0` and `0 ≤ φ' ≤ 1`.
//!
//! Sign convention: the implemented rate is `J[φ] = ∫₀¹ -L(φ', π(φ/τ)) dτ`,
//! which is nonnegative, and the entropy density is `φ(y) = -inf J`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{evolve_snapshots, WalkInit};
use crate::ode::{self, Tolerance};
use crate::scalar::{from_usize, lit, Real};
use crate::urn::{Crossing, UrnFunctionSpec};

/// Maximum number of lattice states in the variational program.
pub const MAX_VARIATIONAL_STATES: usize = 50_000_000;
/// Maximum slope resolution `S / T` of the variational program.
pub const MAX_SLOPE_RESOLUTION: usize = 4096;
/// Slack on the Lipschitz cone when validating sampled paths.
const SLOPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub tau: Vec<T>,
    pub psi: Vec<T>,
    pub rate: T,
}

impl<T: Real> Trajectory<T> {
    pub fn phi(&self) -> Vec<T> {
        self.tau.iter().zip(&self.psi).map(|(&t, &p)| t * p).collect()
    }

    /// Pointwise integrand `-L(φ', π(ψ))`, using the slope of the cell
    /// ending at each grid point (the first cell starts at the origin).
    pub fn local_cost(&self, spec: &UrnFunctionSpec<T>) -> Vec<T> {
        let phi = self.phi();
        (0..self.tau.len())
            .map(|j| {
                let (t0, f0) = if j == 0 {
                    (T::zero(), T::zero())
                } else {
                    (self.tau[j - 1], phi[j - 1])
                };
                let slope = ((phi[j] - f0) / (self.tau[j] - t0)).max(T::zero()).min(T::one());
                -auxiliary_l_unchecked(slope, spec.value_unchecked(self.psi[j]))
            })
            .collect()
    }
}

fn x_log_ratio<T: Real>(a: T, b: T) -> T {
    // a·log(b/a) with the a = 0 limit
    if a == T::zero() {
        T::zero()
    } else if b == T::zero() {
        T::neg_infinity()
    } else {
        a * (b / a).ln()
    }
}

fn auxiliary_l_unchecked<T: Real>(alpha: T, beta: T) -> T {
    x_log_ratio(alpha, beta) + x_log_ratio(T::one() - alpha, T::one() - beta)
}

/// `L(α, β) = α log(β/α) + (1-α) log((1-β)/(1-α))`, the negative relative
/// entropy of Bernoulli(α) with respect to Bernoulli(β).
///
/// Returns `-inf` when `β ∈ {0, 1}` and `α` puts mass where `β` has none.
pub fn auxiliary_l<T: Real>(alpha: T, beta: T) -> Result<T> {
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidArgument(format!("α must lie in [0, 1], got {alpha}")));
    }
    if !(beta >= T::zero() && beta <= T::one()) {
        return Err(Error::InvalidArgument(format!("β must lie in [0, 1], got {beta}")));
    }
    Ok(auxiliary_l_unchecked(alpha, beta).min(T::zero()))
}

fn require_continuous<T: Real>(spec: &UrnFunctionSpec<T>) -> Result<()> {
    spec.validate()?;
    if matches!(spec, UrnFunctionSpec::StepLimit { .. }) {
        return Err(Error::Unsupported(
            "path functionals need a continuous urn function".into(),
        ));
    }
    Ok(())
}

/// Rate `J = ∫₀¹ -L(φ', π(φ/τ)) dτ` of the piecewise-linear path through
/// `(τ_j, τ_j ψ_j)`, joined to the origin by a straight segment.
///
/// Each cell is integrated with Simpson's rule at its endpoints and midpoint.
pub fn rate_functional<T: Real>(spec: &UrnFunctionSpec<T>, tau: &[T], psi: &[T]) -> Result<T> {
    require_continuous(spec)?;
    if tau.is_empty() || tau.len() != psi.len() {
        return Err(Error::InvalidPath(
            "τ and ψ grids must be non-empty and of equal length".into(),
        ));
    }
    if !(tau[0] > T::zero()) || tau.windows(2).any(|w| !(w[0] < w[1])) || *tau.last().unwrap() > T::one() {
        return Err(Error::InvalidPath(
            "τ grid must be strictly increasing in (0, 1]".into(),
        ));
    }
    let slack = lit::<T>(SLOPE_TOL);
    if let Some(bad) = psi.iter().find(|&&p| !(p >= -slack && p <= T::one() + slack)) {
        return Err(Error::InvalidPath(format!("ψ = {bad} outside [0, 1]")));
    }
    let six = lit::<T>(6.0);
    let four = lit::<T>(4.0);
    let two = lit::<T>(2.0);
    let clamp = |v: T| v.max(T::zero()).min(T::one());
    let integrand = |alpha: T, share: T| -auxiliary_l_unchecked(alpha, spec.value_unchecked(clamp(share)));

    // initial straight segment: ψ is constant on it
    let psi0 = clamp(psi[0]);
    let mut total = tau[0] * integrand(psi0, psi0);
    for j in 1..tau.len() {
        let (t0, t1) = (tau[j - 1], tau[j]);
        let (f0, f1) = (t0 * psi[j - 1], t1 * psi[j]);
        let h = t1 - t0;
        let slope = (f1 - f0) / h;
        if slope < -slack || slope > T::one() + slack {
            return Err(Error::InvalidPath(format!(
                "slope {slope} on [{t0}, {t1}] leaves the Lipschitz cone [0, 1]"
            )));
        }
        let alpha = clamp(slope);
        let tm = (t0 + t1) / two;
        let fm = (f0 + f1) / two;
        total = total
            + h / six * (integrand(alpha, f0 / t0) + four * integrand(alpha, fm / tm) + integrand(alpha, f1 / t1));
    }
    Ok(total.max(T::zero()))
}

/// Lattice for the variational program: `time_steps` cells in `τ` and
/// `phi_levels` cells in `φ`. Slopes are resolved in steps of
/// `time_steps / phi_levels`, so `phi_levels` must be a multiple of
/// `time_steps`; with equal sizes only the slopes 0 and 1 exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariationalGrid {
    pub time_steps: usize,
    pub phi_levels: usize,
}

impl Default for VariationalGrid {
    fn default() -> Self {
        Self {
            time_steps: 200,
            phi_levels: 12_800,
        }
    }
}

impl VariationalGrid {
    pub fn new(time_steps: usize, phi_levels: usize) -> Result<Self> {
        let g = Self { time_steps, phi_levels };
        g.check()?;
        Ok(g)
    }

    pub fn slope_resolution(&self) -> usize {
        self.phi_levels / self.time_steps
    }

    fn check(&self) -> Result<()> {
        if self.time_steps == 0 || self.phi_levels == 0 {
            return Err(Error::InvalidArgument("grid sizes must be positive".into()));
        }
        if !self.phi_levels.is_multiple_of(self.time_steps) {
            return Err(Error::InvalidArgument(format!(
                "φ-levels ({}) must be a multiple of time steps ({})",
                self.phi_levels, self.time_steps
            )));
        }
        if self.slope_resolution() > MAX_SLOPE_RESOLUTION {
            return Err(Error::ResourceLimit(format!(
                "slope resolution {} exceeds {MAX_SLOPE_RESOLUTION}",
                self.slope_resolution()
            )));
        }
        let states = (self.time_steps + 1).saturating_mul(self.phi_levels + 1);
        if states > MAX_VARIATIONAL_STATES {
            return Err(Error::ResourceLimit(format!(
                "{states} lattice states exceed {MAX_VARIATIONAL_STATES}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalPath<T> {
    pub grid: VariationalGrid,
    pub trajectory: Trajectory<T>,
}

impl<T: Real> OptimalPath<T> {
    pub fn rate(&self) -> T {
        self.trajectory.rate
    }
}

/// Minimises the discretised rate over lattice paths ending at `y_final`.
///
/// States are `φ ∈ {0, 1/S, …, 1}` at `τ ∈ {0, 1/T, …, 1}`; a cell moves up
/// by `d ∈ {0, …, S/T}` levels, i.e. slope `d·T/S`. The cell cost is the
/// trapezoid of `-L(slope, π(ψ))` at its two ends (at `τ = 0` the share is
/// taken equal to the slope). On equal cost the predecessor with the lowest
/// `φ` wins.
pub fn optimal_path<T: Real>(spec: &UrnFunctionSpec<T>, y_final: T, grid: VariationalGrid) -> Result<OptimalPath<T>> {
    require_continuous(spec)?;
    grid.check()?;
    if !(y_final >= T::zero() && y_final <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "final share must lie in [0, 1], got {y_final}"
        )));
    }
    let (tt, ss, r) = (grid.time_steps, grid.phi_levels, grid.slope_resolution());
    let target = (y_final * from_usize::<T>(ss)).round().to_usize().unwrap_or(0).min(ss);
    let rr = from_usize::<T>(r);
    let dt = T::one() / from_usize::<T>(tt);
    let half = lit::<T>(0.5);

    // per-slope constants: α log α + (1-α) log(1-α)
    let alphas: Vec<T> = (0..=r).map(|d| from_usize::<T>(d) / rr).collect();
    let neg_ent: Vec<T> = alphas
        .iter()
        .map(|&a| -(x_log_ratio(a, T::one()) + x_log_ratio(T::one() - a, T::one())))
        .collect();
    // -L(α, β) given log β and log(1 - β)
    let cost = |d: usize, lb: T, l1b: T| -> T {
        let a = alphas[d];
        let mut c = neg_ent[d];
        if d > 0 {
            c = c - a * lb;
        }
        if d < r {
            c = c - (T::one() - a) * l1b;
        }
        c
    };
    let logs = |beta: T, cbeta: T| (beta.ln(), cbeta.ln());

    // Admissible window at time t: reachable from 0 and able to reach target.
    let window = |t: usize| -> (usize, usize) {
        let hi = (r * t).min(target);
        let lo = target.saturating_sub(r * (tt - t));
        (lo, hi)
    };
    if window(0).0 > 0 {
        return Err(Error::InvalidArgument("final share unreachable on this grid".into()));
    }

    let mut prev_cost = vec![T::zero()];
    let mut prev_lo = 0usize;
    let mut prev_logs: Vec<(T, T)> = Vec::new();
    let mut parents: Vec<(usize, Vec<u16>)> = Vec::with_capacity(tt);
    for t in 1..=tt {
        let (lo, hi) = window(t);
        let tf = from_usize::<T>(t);
        let logs_t: Vec<(T, T)> = (lo..=hi)
            .map(|i| {
                let share = (from_usize::<T>(i) / (rr * tf)).min(T::one());
                logs(spec.value_unchecked(share), spec.complement_unchecked(share))
            })
            .collect();
        let (plo, phi_) = (prev_lo, prev_lo + prev_cost.len() - 1);
        let row: Vec<(T, u16)> = (lo..=hi)
            .into_par_iter()
            .map(|i| {
                let (lb_e, l1b_e) = logs_t[i - lo];
                let mut best = T::infinity();
                let mut arg = 0u16;
                for d in (0..=r.min(i)).rev() {
                    let j = i - d;
                    if j < plo || j > phi_ {
                        continue;
                    }
                    let start = if t == 1 {
                        let a = alphas[d];
                        let (lb, l1b) = logs(spec.value_unchecked(a), spec.complement_unchecked(a));
                        cost(d, lb, l1b)
                    } else {
                        let (lb, l1b) = prev_logs[j - plo];
                        cost(d, lb, l1b)
                    };
                    let c = prev_cost[j - plo] + dt * half * (start + cost(d, lb_e, l1b_e));
                    if c < best {
                        best = c;
                        arg = d as u16;
                    }
                }
                (best, arg)
            })
            .collect();
        let (costs, args): (Vec<T>, Vec<u16>) = row.into_iter().unzip();
        parents.push((lo, args));
        prev_cost = costs;
        prev_lo = lo;
        prev_logs = logs_t;
    }
    let rate = prev_cost[target - prev_lo];
    if !rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "no finite-cost path reaches share {y_final}"
        )));
    }
    let mut levels = vec![0usize; tt + 1];
    levels[tt] = target;
    for t in (1..=tt).rev() {
        let (lo, args) = &parents[t - 1];
        levels[t - 1] = levels[t] - args[levels[t] - lo] as usize;
    }
    let tau: Vec<T> = (1..=tt).map(|t| from_usize::<T>(t) * dt).collect();
    let psi: Vec<T> = (1..=tt)
        .map(|t| from_usize::<T>(levels[t]) / (rr * from_usize::<T>(t)))
        .collect();
    Ok(OptimalPath {
        grid,
        trajectory: Trajectory {
            tau,
            psi,
            rate: rate.max(T::zero()),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement<T> {
    pub paths: Vec<OptimalPath<T>>,
    /// Whether each refinement decreased the rate or left it within `tolerance`.
    pub monotone: bool,
    pub tolerance: T,
}

/// Runs the variational program on successively finer grids.
pub fn optimal_path_refinement<T: Real>(
    spec: &UrnFunctionSpec<T>,
    y_final: T,
    grids: &[VariationalGrid],
    tolerance: T,
) -> Result<Refinement<T>> {
    let paths = grids
        .iter()
        .map(|&g| optimal_path(spec, y_final, g))
        .collect::<Result<Vec<_>>>()?;
    let monotone = paths.windows(2).all(|w| w[1].rate() <= w[0].rate() + tolerance);
    Ok(Refinement {
        paths,
        monotone,
        tolerance,
    })
}

/// `points` values of `τ` spaced evenly in `log τ` from `eps` to 1.
pub fn log_tau_grid<T: Real>(eps: T, points: usize) -> Result<Vec<T>> {
    if !(eps > T::zero() && eps < T::one()) || points < 2 {
        return Err(Error::InvalidArgument("need 0 < ε < 1 and at least two points".into()));
    }
    let l = eps.ln();
    let m = from_usize::<T>(points - 1);
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                T::one()
            } else {
                (l * (T::one() - from_usize::<T>(i) / m)).exp()
            }
        })
        .collect())
}

/// Default grid for zero-cost paths: 10 001 log-spaced points from 1e-8.
pub fn default_zero_cost_grid<T: Real>() -> Vec<T> {
    log_tau_grid(lit(1e-8), 10_001).expect("valid constants")
}

/// Solves `τ ∂τψ = π(ψ) - ψ` backward from `ψ(1) = y_final` on `tau`.
///
/// In `s = log τ` the equation is autonomous, `∂sψ = π(ψ) - ψ`, and is
/// integrated with adaptive Dormand–Prince steps at tolerance 1e-10. The
/// returned trajectory carries its rate under [`rate_functional`].
pub fn zero_cost_path<T: Real>(spec: &UrnFunctionSpec<T>, y_final: T, tau: &[T]) -> Result<Trajectory<T>> {
    require_continuous(spec)?;
    if !(y_final > T::zero() && y_final < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "final share must lie in (0, 1), got {y_final}"
        )));
    }
    if tau.is_empty()
        || !(tau[0] > T::zero())
        || tau.windows(2).any(|w| !(w[0] < w[1]))
        || *tau.last().unwrap() > T::one()
    {
        return Err(Error::InvalidArgument(
            "τ grid must be strictly increasing in (0, 1]".into(),
        ));
    }
    let targets: Vec<T> = tau.iter().rev().map(|t| t.ln()).collect();
    let tol = Tolerance {
        rel: 1e-10,
        abs: 1e-12,
        max_steps: 1_000_000,
    };
    let clamp = |v: T| v.max(T::zero()).min(T::one());
    let mut psi = ode::integrate(
        |_s: T, p: T| Ok(spec.value_unchecked(clamp(p)) - p),
        T::zero(),
        y_final,
        &targets,
        tol,
    )?;
    psi.reverse();
    let psi: Vec<T> = psi.into_iter().map(clamp).collect();
    let rate = rate_functional(spec, tau, &psi)?;
    Ok(Trajectory {
        tau: tau.to_vec(),
        psi,
        rate,
    })
}

/// The band `(y₋, y₊)` between the outermost stable fixed points, when an
/// unstable fixed point lies between them; inside it the entropy density
/// vanishes.
pub fn zero_entropy_band<T: Real>(spec: &UrnFunctionSpec<T>) -> Option<(T, T)> {
    let fps = spec.fixed_points();
    let stable: Vec<T> = fps
        .iter()
        .filter(|f| f.crossing == Crossing::DownCrossing)
        .map(|f| f.location)
        .collect();
    let (lo, hi) = (stable.first().copied()?, stable.last().copied()?);
    fps.iter()
        .any(|f| f.crossing == Crossing::UpCrossing && f.location > lo && f.location < hi)
        .then_some((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationEntry<T> {
    pub n_steps: usize,
    pub tau: T,
    pub early_steps: usize,
    pub psi1: T,
    pub psi2: T,
    pub log_mass_final: T,
    pub log_mass_early: T,
    pub delta: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport<T> {
    /// False when `(y1, y2)` does not lie inside a zero-entropy band; no
    /// comparison is made in that case.
    pub applicable: bool,
    pub note: String,
    pub entries: Vec<ConservationEntry<T>>,
    pub max_abs_delta: T,
}

/// Compares `P(y1 < y_N < y2)` with `P(ψ₁(τ) < y_{τN} < ψ₂(τ))`, where `ψᵢ`
/// are the zero-cost paths ending at `yᵢ`, using exact distributions from
/// the default initial condition.
pub fn current_conservation_check<T: Real>(
    spec: &UrnFunctionSpec<T>,
    y1: T,
    y2: T,
    pairs: &[(usize, T)],
) -> Result<ConservationReport<T>> {
    spec.validate()?;
    if !(y1 < y2) {
        return Err(Error::InvalidArgument(format!("need y1 < y2, got ({y1}, {y2})")));
    }
    let band = if matches!(spec, UrnFunctionSpec::StepLimit { .. }) {
        None
    } else {
        zero_entropy_band(spec)
    };
    let Some((lo, hi)) = band.filter(|&(lo, hi)| y1 > lo && y2 < hi) else {
        return Ok(ConservationReport {
            applicable: false,
            note: "interval is not inside a zero-entropy band; conservation claim not applicable".into(),
            entries: Vec::new(),
            max_abs_delta: T::nan(),
        });
    };
    let init = WalkInit::default();
    let mut entries = Vec::with_capacity(pairs.len());
    for &(n, tau) in pairs {
        if !(tau > T::zero() && tau <= T::one()) {
            return Err(Error::InvalidArgument(format!("τ must lie in (0, 1], got {tau}")));
        }
        let m_real = tau * from_usize::<T>(n);
        let m = m_real.round();
        if (m_real - m).abs() > lit(1e-6) {
            return Err(Error::InvalidArgument(format!("τN = {m_real} is not an integer")));
        }
        let m = m.to_usize().unwrap_or(0);
        if m < init.steps {
            return Err(Error::InvalidArgument(format!(
                "τN = {m} is shorter than the initial condition"
            )));
        }
        let grid = [tau];
        let psi1 = zero_cost_path(spec, y1, &grid)?.psi[0];
        let psi2 = zero_cost_path(spec, y2, &grid)?.psi[0];
        let tables = evolve_snapshots(spec, init, &[m, n])?;
        let log_mass_early = tables[0].interval_log_mass(psi1, psi2)?;
        let log_mass_final = tables[1].interval_log_mass(y1, y2)?;
        entries.push(ConservationEntry {
            n_steps: n,
            tau,
            early_steps: m,
            psi1,
            psi2,
            log_mass_final,
            log_mass_early,
            delta: log_mass_final - log_mass_early,
        });
    }
    let max_abs_delta = entries.iter().map(|e| e.delta.abs()).fold(T::zero(), |a, b| a.max(b));
    Ok(ConservationReport {
        applicable: true,
        note: format!("zero-entropy band ({lo}, {hi})"),
        entries,
        max_abs_delta,
    })
}
