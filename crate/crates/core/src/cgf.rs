//! Cumulant generating function of the share of positive steps.
//!
//! Two sign conventions are supported, tagged on every curve:
//!
//! * [`CgfConvention::Increasing`]: `ζ(λ) = lim (1/N) log E[e^{+λ n_N}]`.
//!   This is the convention of the nonlinear ODE
//!   `ζ' = π⁻¹((e^ζ - 1) / (e^λ - 1))` and of the closed form for `k = 1`;
//!   it is the shipped default, selected by agreement with the exact
//!   finite-`N` transform.
//! * [`CgfConvention::Decreasing`]: `ζ(λ) = lim (1/N) log E[e^{-λ n_N}]`.
//!   Its ODE is `ζ' = -π⁻¹((e^ζ - 1) / (e^{-λ} - 1))`. For symmetric urns
//!   with a symmetric start the two differ by exactly `λ`.
//!
//! Both are normalised by `1/N`, so `ζ(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{DistributionTable, EntropyCurve, EntropyMethod};
use crate::ode::{self, Tolerance};
use crate::quad;
use crate::scalar::{from_usize, lit, log_sum_exp, Real};
use crate::urn::{Monotonicity, UrnFunctionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CgfConvention {
    #[default]
    Increasing,
    Decreasing,
}

impl CgfConvention {
    fn sign<T: Real>(self) -> T {
        match self {
            CgfConvention::Increasing => T::one(),
            CgfConvention::Decreasing => -T::one(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CgfConvention::Increasing => "increasing",
            CgfConvention::Decreasing => "decreasing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CgfProvenance {
    FiniteN(usize),
    Ode,
    ClosedFormK1,
}

impl CgfProvenance {
    pub fn label(&self) -> String {
        match self {
            CgfProvenance::FiniteN(n) => format!("finite_n_{n}"),
            CgfProvenance::Ode => "ode".into(),
            CgfProvenance::ClosedFormK1 => "closed_form_k1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgfCurve<T> {
    pub lambda: Vec<T>,
    pub zeta: Vec<T>,
    pub provenance: CgfProvenance,
    pub convention: CgfConvention,
}

/// Geometric grid of `points` values from `lo` to `hi`.
pub fn geometric_grid<T: Real>(lo: T, hi: T, points: usize) -> Vec<T> {
    if points == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / from_usize::<T>(points - 1);
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                lo * (ratio * from_usize::<T>(i)).exp()
            }
        })
        .collect()
}

/// Default λ grid: 200 geometric points from 1e-3 to 10.
pub fn default_lambda_grid<T: Real>() -> Vec<T> {
    geometric_grid(lit(1e-3), lit(10.0), 200)
}

/// `ζ_N(λ) = (1/N) log Σ_n e^{±λn} P(n)` from an exact table.
pub fn finite_n_cgf<T: Real>(
    table: &DistributionTable<T>,
    lambda_grid: &[T],
    convention: CgfConvention,
) -> CgfCurve<T> {
    let nn = from_usize::<T>(table.n_steps);
    let s = convention.sign::<T>();
    let zeta = lambda_grid
        .iter()
        .map(|&lam| {
            if lam == T::zero() {
                return T::zero();
            }
            log_sum_exp(
                table
                    .log_prob
                    .iter()
                    .enumerate()
                    .map(|(n, &l)| l + s * lam * from_usize::<T>(n)),
            ) / nn
        })
        .collect();
    CgfCurve {
        lambda: lambda_grid.to_vec(),
        zeta,
        provenance: CgfProvenance::FiniteN(table.n_steps),
        convention,
    }
}

/// Argument of `π⁻¹` in the CGF ODE, evaluated without cancellation.
fn ode_ratio<T: Real>(lambda: T, zeta: T, convention: CgfConvention) -> T {
    match convention {
        // (e^ζ - 1)/(e^λ - 1) = e^{ζ-λ} (1 - e^{-ζ}) / (1 - e^{-λ})
        CgfConvention::Increasing => (zeta - lambda).exp() * (-(-zeta).exp_m1()) / (-(-lambda).exp_m1()),
        CgfConvention::Decreasing => zeta.exp_m1() / (-lambda).exp_m1(),
    }
}

/// Integrates the CGF ODE for a strictly increasing urn function.
///
/// Integration runs backward from `λ_max = max(grid) + 25`, seeded with the
/// large-`λ` asymptote (`λ + log π(1)` for the increasing convention,
/// `log(1 - π(0))` for the decreasing one). Perturbations of the solution
/// grow with `λ`, so the backward direction is the stable one and the seed
/// error is damped by many orders of magnitude before the grid is reached.
pub fn cgf_ode<T: Real>(
    spec: &UrnFunctionSpec<T>,
    lambda_grid: &[T],
    convention: CgfConvention,
) -> Result<CgfCurve<T>> {
    spec.validate()?;
    if spec.monotonicity() != Monotonicity::Increasing {
        return Err(Error::Unsupported(
            "the CGF equation needs a strictly increasing urn function".into(),
        ));
    }
    if lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("empty λ grid".into()));
    }
    if lambda_grid.windows(2).any(|w| w[0] >= w[1]) || lambda_grid[0] <= T::zero() {
        return Err(Error::InvalidArgument(
            "λ grid must be strictly increasing and positive".into(),
        ));
    }
    let lam_max = *lambda_grid.last().unwrap() + lit(25.0);
    let (pi0, pi1) = (spec.value_unchecked(T::zero()), spec.value_unchecked(T::one()));
    let seed = match convention {
        CgfConvention::Increasing => lam_max + pi1.ln(),
        CgfConvention::Decreasing => spec.complement_unchecked(T::zero()).ln(),
    };
    let s = convention.sign::<T>();
    // Trial stages of an adaptive step may overshoot the domain; the clamped
    // field is still Lipschitz, and accepted values are checked below.
    let rhs = |lam: T, zeta: T| -> Result<T> {
        let r = ode_ratio(lam, zeta, convention);
        if r.is_nan() {
            return Err(Error::DomainBreach(format!("ratio undefined at λ = {lam}, ζ = {zeta}")));
        }
        Ok(s * spec.inverse(r.max(pi0).min(pi1))?)
    };
    let targets: Vec<T> = lambda_grid.iter().rev().copied().collect();
    let tol = Tolerance {
        rel: 1e-10,
        abs: 1e-13,
        max_steps: 2_000_000,
    };
    let mut zeta = ode::integrate(rhs, lam_max, seed, &targets, tol)?;
    let slack = lit::<T>(1e-6);
    for (&lam, &z) in targets.iter().zip(&zeta) {
        let r = ode_ratio(lam, z, convention);
        if !(r >= pi0 - slack && r <= pi1 + slack) {
            return Err(Error::DomainBreach(format!(
                "(e^ζ-1)/(e^λ-1) = {r} outside [π(0), π(1)] = [{pi0}, {pi1}] at λ = {lam}, ζ = {z}"
            )));
        }
    }
    zeta.reverse();
    Ok(CgfCurve {
        lambda: lambda_grid.to_vec(),
        zeta,
        provenance: CgfProvenance::Ode,
        convention,
    })
}

/// Outcome of comparing an ODE curve with an exact finite-`N` transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionCheck<T> {
    pub max_gap: T,
    pub tolerance: T,
    pub consistent: bool,
}

/// Compares `curve` against the finite-`N` transform of `table` under the
/// curve's own convention; a large gap signals a convention mismatch.
pub fn convention_check<T: Real>(
    curve: &CgfCurve<T>,
    table: &DistributionTable<T>,
    tolerance: T,
) -> ConventionCheck<T> {
    let exact = finite_n_cgf(table, &curve.lambda, curve.convention);
    let max_gap = curve
        .zeta
        .iter()
        .zip(&exact.zeta)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), |m, g| m.max(g));
    ConventionCheck {
        max_gap,
        tolerance,
        consistent: max_gap <= tolerance,
    }
}

/// Closed-form CGF of the single-draw walk (increasing convention), for
/// `p ∈ (1/2, 1)` and `λ > 0`:
///
/// `1 - e^{-ζ} = c e^{cλ} x^{1/b} ∫_x^1 (1-t)^{c-1} t^{-1/b} dt`, `x = 1 - e^{-λ}`,
///
/// with `b = 2p - 1` and `c = (1 - p)/b`. The integral is split at
/// `t₀ = max(x, 1/2)`: below it `t = x e^s` tames the `t^{-1/b}` growth
/// near small `x`; above it `1 - t = u^{1/c}` removes the endpoint
/// singularity at `t = 1`. Everything is combined in log space.
pub fn cgf_closed_form_k1<T: Real>(p: T, lambda: T) -> Result<T> {
    let half = lit::<T>(0.5);
    if !(p > half && p < T::one()) {
        return Err(Error::OutOfRange {
            value: p.to_f64().unwrap_or(f64::NAN),
            lo: 0.5,
            hi: 1.0,
        });
    }
    if !(lambda > T::zero()) {
        return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    let b = p + p - T::one();
    let c = (T::one() - p) / b;
    let inv_b = T::one() / b;
    let inv_c = T::one() / c;
    let rel = lit::<T>(1e-12).max(T::epsilon() * lit(64.0));
    let tiny = T::min_positive_value();
    let x = -(-lambda).exp_m1();
    let ln_x = x.ln();
    let t0 = x.max(half);

    // upper piece: x^{1/b} (1/c) ∫_0^{(1-t0)^c} (1 - u^{1/c})^{-1/b} du
    let ln_one_minus_t0 = if x >= half { -lambda } else { (T::one() - t0).ln() };
    let u_max = (c * ln_one_minus_t0).exp();
    let upper = quad::integrate(
        |u: T| (T::one() - u.powf(inv_c)).powf(-inv_b),
        T::zero(),
        u_max,
        rel,
        tiny,
        20_000,
    )?;
    let ln_upper = inv_b * ln_x - c.ln() + upper.value.ln();

    // lower piece: x ∫_0^{ln(t0/x)} (1 - x e^s)^{c-1} e^{s(1-1/b)} ds
    let ln_total = if x < half {
        let s_max = (t0 / x).ln();
        let lower = quad::integrate(
            |s: T| (T::one() - x * s.exp()).powf(c - T::one()) * (s * (T::one() - inv_b)).exp(),
            T::zero(),
            s_max,
            rel,
            tiny,
            20_000,
        )?;
        let ln_lower = ln_x + lower.value.ln();
        let m = ln_upper.max(ln_lower);
        m + ((ln_upper - m).exp() + (ln_lower - m).exp()).ln()
    } else {
        ln_upper
    };
    let rhs = (c.ln() + c * lambda + ln_total).exp();
    if !(rhs < T::one()) {
        return Err(Error::NonConvergence(format!(
            "closed form right-hand side {rhs} ≥ 1 at λ = {lambda}"
        )));
    }
    Ok(-(-rhs).ln_1p())
}

/// The closed form sampled on a grid.
pub fn closed_form_curve<T: Real>(p: T, lambda_grid: &[T]) -> Result<CgfCurve<T>> {
    let zeta = lambda_grid
        .iter()
        .map(|&l| cgf_closed_form_k1(p, l))
        .collect::<Result<Vec<T>>>()?;
    Ok(CgfCurve {
        lambda: lambda_grid.to_vec(),
        zeta,
        provenance: CgfProvenance::ClosedFormK1,
        convention: CgfConvention::Increasing,
    })
}

/// Whether the sampled curve has non-decreasing secant slopes.
pub fn is_convex<T: Real>(lambda: &[T], zeta: &[T], slack: T) -> bool {
    let slopes: Vec<T> = lambda
        .windows(2)
        .zip(zeta.windows(2))
        .map(|(l, z)| (z[1] - z[0]) / (l[1] - l[0]))
        .collect();
    slopes.windows(2).all(|s| s[1] >= s[0] - slack)
}

/// Minimum of `g` sampled on `xs`, refined by the vertex of the parabola
/// through the discrete minimiser and its neighbours.
fn refined_min<T: Real>(xs: &[T], g: &[T]) -> T {
    let (i, &gi) = g
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty");
    if i == 0 || i + 1 == g.len() {
        return gi;
    }
    let (x0, x1, x2) = (xs[i - 1], xs[i], xs[i + 1]);
    let (g0, g1, g2) = (g[i - 1], gi, g[i + 1]);
    let d01 = (g1 - g0) / (x1 - x0);
    let d12 = (g2 - g1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if curv <= T::zero() {
        return gi;
    }
    let two = lit::<T>(2.0);
    // Newton form: g(x) = g0 + d01 (x - x0) + curv (x - x0)(x - x1)
    let xv = (x0 + x1) / two - d01 / (two * curv);
    if xv < x0 || xv > x2 {
        return gi;
    }
    let gv = g0 + d01 * (xv - x0) + curv * (xv - x0) * (xv - x1);
    gv.min(gi)
}

/// Entropy density from a CGF curve by Legendre transform over `λ ≥ 0`.
///
/// For the increasing convention `φ(y) = inf_λ {ζ(λ) - λy}`, which is the
/// right branch (shares above the typical value). For the decreasing
/// convention `φ(y) = inf_λ {ζ(λ) + λy}` gives the left branch; shares
/// above one half are mapped through `y → 1 - y`, which assumes a
/// symmetric urn and start. `λ = 0` with `ζ(0) = 0` is always a candidate.
pub fn legendre_entropy<T: Real>(curve: &CgfCurve<T>, y_grid: &[T]) -> Result<EntropyCurve<T>> {
    if curve.lambda.len() != curve.zeta.len() || curve.lambda.is_empty() {
        return Err(Error::InvalidInput("malformed CGF curve".into()));
    }
    let mut lambda = vec![T::zero()];
    let mut zeta = vec![T::zero()];
    for (&l, &z) in curve.lambda.iter().zip(&curve.zeta) {
        if l > T::zero() {
            lambda.push(l);
            zeta.push(z);
        }
    }
    if !is_convex(&lambda, &zeta, lit(1e-8)) {
        return Err(Error::InvalidInput("CGF curve is not convex on its grid".into()));
    }
    let half = lit::<T>(0.5);
    let phi = y_grid
        .iter()
        .map(|&y| {
            let g: Vec<T> = match curve.convention {
                CgfConvention::Increasing => lambda.iter().zip(&zeta).map(|(&l, &z)| z - l * y).collect(),
                CgfConvention::Decreasing => {
                    let yy = if y > half { T::one() - y } else { y };
                    lambda.iter().zip(&zeta).map(|(&l, &z)| z + l * yy).collect()
                }
            };
            refined_min(&lambda, &g).min(T::zero())
        })
        .collect();
    Ok(EntropyCurve {
        y: y_grid.to_vec(),
        phi,
        method: EntropyMethod::Legendre,
    })
}

/// Order of the first singular derivative of the `k = 1` CGF at `λ = 0`,
/// `⌈1/(2p-1)⌉`, and whether `1/(2p-1)` is an integer (logarithmic case).
pub fn singular_order<T: Real>(p: T) -> Result<(u32, bool)> {
    let half = lit::<T>(0.5);
    if !(p > half && p < T::one()) {
        return Err(Error::OutOfRange {
            value: p.to_f64().unwrap_or(f64::NAN),
            lo: 0.5,
            hi: 1.0,
        });
    }
    let r = (T::one() / (p + p - T::one())).to_f64().unwrap_or(f64::INFINITY);
    if !r.is_finite() || r > u32::MAX as f64 {
        return Err(Error::OutOfRange {
            value: p.to_f64().unwrap_or(f64::NAN),
            lo: 0.5,
            hi: 1.0,
        });
    }
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * r.max(1.0) {
        Ok((nearest as u32, true))
    } else {
        Ok((r.ceil() as u32, false))
    }
}
