//! Urn functions of the k-draw elephant random walk and their fixed-point
//! structure.
//!
//! A walk step is positive with probability `π(y)`, where `y` is the
//! current fraction of positive steps. For the majority-memory walk the
//! map is `π_k(y) = (1 - p) + (2p - 1) P_k(y)` with `P_k` the probability
//! that `k` independent draws (with replacement) contain a positive
//! majority.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{bisect, brent};
use crate::scalar::{lit, Real};

/// Tolerance on `|π'(y) - 1|` below which a fixed point is reported as
/// [`Crossing::Tangent`].
pub const CROSSING_TOL: f64 = 1e-9;

/// Largest supported draw count for the majority-memory urn.
pub const MAX_DRAWS: u32 = 999;

/// Which urn function governs the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UrnFunctionSpec<T> {
    /// `k` draws with replacement, follow the majority with probability `p`.
    MajorityMemory { k: u32, p: T },
    /// `π(y) = a + b y`.
    Linear { a: T, b: T },
    /// `π(y) = (1 + tanh(J (2y - 1))) / 2`.
    Kgw { j: T },
    /// Large-`k` limit: `1 - p` below one half, `p` above, `1/2` at the jump.
    StepLimit { p: T },
}

/// Stability type of a solution of `π(y) = y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Crossing {
    DownCrossing,
    UpCrossing,
    Tangent,
}

impl Crossing {
    fn classify<T: Real>(derivative: T) -> Self {
        let tol = lit::<T>(CROSSING_TOL);
        if derivative < T::one() - tol {
            Crossing::DownCrossing
        } else if derivative > T::one() + tol {
            Crossing::UpCrossing
        } else {
            Crossing::Tangent
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Crossing::DownCrossing => "down",
            Crossing::UpCrossing => "up",
            Crossing::Tangent => "tangent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint<T> {
    pub location: T,
    /// `π'` at the location; `±inf` at the jump of [`UrnFunctionSpec::StepLimit`].
    pub derivative: T,
    pub crossing: Crossing,
}

impl<T: Real> FixedPoint<T> {
    fn new(location: T, derivative: T) -> Self {
        Self {
            location,
            derivative,
            crossing: Crossing::classify(derivative),
        }
    }
}

/// Memory-parameter thresholds of the majority-memory urn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalParams<T> {
    /// `π'(1/2) = 1`: the symmetric fixed point loses stability.
    pub p_c: Option<T>,
    /// `π'(1/2) = 1/2`.
    pub p_star: T,
    /// `π'(y₊(p)) = 1/2` on `p > p_c`.
    pub p_double_star: Option<T>,
}

/// Monotonicity of an urn function on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
    NotStrict,
}

fn check_unit<T: Real>(y: T) -> Result<()> {
    if y >= T::zero() && y <= T::one() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            value: y.to_f64().unwrap_or(f64::NAN),
            lo: 0.0,
            hi: 1.0,
        })
    }
}

fn check_draws(k: u32) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        Err(Error::InvalidArgument(format!(
            "draw count k must be a positive odd integer, got {k}"
        )))
    } else if k > MAX_DRAWS {
        Err(Error::InvalidArgument(format!(
            "draw count k = {k} exceeds the supported maximum {MAX_DRAWS}"
        )))
    } else {
        Ok(())
    }
}

fn binomial<T: Real>(n: u32, r: u32) -> T {
    let r = r.min(n - r);
    let mut c = T::one();
    for i in 0..r {
        c = c * lit::<T>((n - i) as f64) / lit::<T>((i + 1) as f64);
    }
    c
}

/// `Σ_{h > k/2} C(k,h) y^h (1-y)^(k-h)` for `y ≤ 1/2`.
fn majority_tail<T: Real>(k: u32, y: T) -> T {
    if y == T::zero() {
        return T::zero();
    }
    let h0 = k.div_ceil(2);
    let q = T::one() - y;
    let ratio = y / q;
    let mut term = binomial::<T>(k, h0) * y.powi(h0 as i32) * q.powi((k - h0) as i32);
    let mut sum = T::zero();
    for h in h0..=k {
        sum = sum + term;
        term = term * lit::<T>((k - h) as f64) / lit::<T>((h + 1) as f64) * ratio;
    }
    sum
}

/// Returns `(P_k(y), 1 - P_k(y))`, each computed without cancellation.
fn majority_pair<T: Real>(k: u32, y: T) -> (T, T) {
    let half = lit::<T>(0.5);
    if y == half {
        (half, half)
    } else if y < half {
        let t = majority_tail(k, y);
        (t, T::one() - t)
    } else {
        let t = majority_tail(k, T::one() - y);
        (T::one() - t, t)
    }
}

/// Probability that `k` independent draws, each positive with probability
/// `y`, contain a positive majority.
pub fn majority_prob<T: Real>(k: u32, y: T) -> Result<T> {
    check_draws(k)?;
    check_unit(y)?;
    Ok(majority_pair(k, y).0)
}

/// `P_k'(y) = k C(k-1, (k-1)/2) (y(1-y))^((k-1)/2)`.
fn majority_density<T: Real>(k: u32, y: T) -> T {
    let h = (k - 1) / 2;
    lit::<T>(k as f64) * binomial::<T>(k - 1, h) * (y * (T::one() - y)).powi(h as i32)
}

/// `(P_k(1/2 + u) - 1/2) / u`, stable as `u → 0`.
fn majority_secant<T: Real>(k: u32, u: T) -> T {
    let h = (k - 1) / 2;
    let lead = lit::<T>(k as f64) * binomial::<T>(k - 1, h);
    if u > lit::<T>(1e-3) {
        let half = lit::<T>(0.5);
        return (majority_pair(k, half + u).0 - half) / u;
    }
    // Term-wise integral of (1/4 - v²)^h over [0, u], divided by u.
    let quarter = lit::<T>(0.25);
    let u2 = u * u;
    let mut sum = T::zero();
    let mut pow_u = T::one();
    for j in 0..=h {
        let sign = if j % 2 == 0 { T::one() } else { -T::one() };
        let c = binomial::<T>(h, j) * quarter.powi((h - j) as i32);
        sum = sum + sign * c * pow_u / lit::<T>((2 * j + 1) as f64);
        pow_u = pow_u * u2;
    }
    lead * sum
}

impl<T: Real> UrnFunctionSpec<T> {
    pub fn majority(k: u32, p: T) -> Result<Self> {
        let s = Self::MajorityMemory { k, p };
        s.validate()?;
        Ok(s)
    }

    pub fn linear(a: T, b: T) -> Result<Self> {
        let s = Self::Linear { a, b };
        s.validate()?;
        Ok(s)
    }

    pub fn kgw(j: T) -> Result<Self> {
        let s = Self::Kgw { j };
        s.validate()?;
        Ok(s)
    }

    pub fn step_limit(p: T) -> Result<Self> {
        let s = Self::StepLimit { p };
        s.validate()?;
        Ok(s)
    }

    /// Memoryless walk, `π ≡ 1/2`.
    pub fn fair_coin() -> Self {
        Self::Linear {
            a: lit(0.5),
            b: T::zero(),
        }
    }

    /// Checks the parameter constraints of the variant.
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: T, what: &str| -> Result<()> {
            if v.is_finite() && v >= T::zero() && v <= T::one() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{what} = {v} must lie in [0, 1]")))
            }
        };
        match *self {
            Self::MajorityMemory { k, p } => {
                check_draws(k)?;
                in_unit(p, "p")
            }
            Self::Linear { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::InvalidArgument("linear coefficients must be finite".into()));
                }
                in_unit(a, "π(0) = a")?;
                in_unit(a + b, "π(1) = a + b")
            }
            Self::Kgw { j } => {
                if j.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument("J must be finite".into()))
                }
            }
            Self::StepLimit { p } => in_unit(p, "p"),
        }
    }

    /// `π(y)` without range checks.
    #[inline]
    pub fn value_unchecked(&self, y: T) -> T {
        match *self {
            Self::MajorityMemory { k, p } => {
                let (up, _) = majority_pair(k, y);
                (T::one() - p) + (p + p - T::one()) * up
            }
            Self::Linear { a, b } => a + b * y,
            Self::Kgw { j } => {
                let half = lit::<T>(0.5);
                half * (T::one() + (j * (y + y - T::one())).tanh())
            }
            Self::StepLimit { p } => step_value(p, y),
        }
    }

    /// `1 - π(y)`, computed directly so that it stays accurate when `π(y)`
    /// is close to one.
    #[inline]
    pub fn complement_unchecked(&self, y: T) -> T {
        match *self {
            Self::MajorityMemory { k, p } => {
                let (_, down) = majority_pair(k, y);
                (T::one() - p) + (p + p - T::one()) * down
            }
            Self::Linear { a, b } => T::one() - a - b * y,
            Self::Kgw { j } => {
                let half = lit::<T>(0.5);
                half * (T::one() + (j * (T::one() - y - y)).tanh())
            }
            Self::StepLimit { p } => step_value(p, T::one() - y),
        }
    }

    pub fn value(&self, y: T) -> Result<T> {
        check_unit(y)?;
        Ok(self.value_unchecked(y))
    }

    /// Exact analytic derivative `π'(y)`.
    pub fn derivative(&self, y: T) -> Result<T> {
        check_unit(y)?;
        match *self {
            Self::StepLimit { p } if y == lit(0.5) && p != lit(0.5) => Err(Error::NotDifferentiable(0.5)),
            _ => Ok(self.derivative_unchecked(y)),
        }
    }

    fn derivative_unchecked(&self, y: T) -> T {
        match *self {
            Self::MajorityMemory { k, p } => (p + p - T::one()) * majority_density(k, y),
            Self::Linear { b, .. } => b,
            Self::Kgw { j } => {
                let t = (j * (y + y - T::one())).tanh();
                j * (T::one() - t * t)
            }
            Self::StepLimit { .. } => T::zero(),
        }
    }

    /// Whether `π(1 - y) = 1 - π(y)` holds identically.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            Self::MajorityMemory { .. } | Self::Kgw { .. } | Self::StepLimit { .. } => true,
            Self::Linear { a, b } => a + a + b == T::one(),
        }
    }

    pub fn monotonicity(&self) -> Monotonicity {
        let half = lit::<T>(0.5);
        let from_sign = |s: T| {
            if s > T::zero() {
                Monotonicity::Increasing
            } else if s < T::zero() {
                Monotonicity::Decreasing
            } else {
                Monotonicity::Constant
            }
        };
        match *self {
            Self::MajorityMemory { p, .. } => from_sign(p - half),
            Self::Linear { b, .. } => from_sign(b),
            Self::Kgw { j } => from_sign(j),
            Self::StepLimit { p } => {
                if p == half {
                    Monotonicity::Constant
                } else {
                    Monotonicity::NotStrict
                }
            }
        }
    }

    /// Inverse urn function: the unique `y` with `π(y) = q`.
    pub fn inverse(&self, q: T) -> Result<T> {
        let increasing = match self.monotonicity() {
            Monotonicity::Increasing => true,
            Monotonicity::Decreasing => false,
            _ => {
                return Err(Error::Unsupported(format!(
                    "urn function {self:?} is not strictly monotone"
                )))
            }
        };
        let (lo_v, hi_v) = {
            let (a, b) = (self.value_unchecked(T::zero()), self.value_unchecked(T::one()));
            if increasing {
                (a, b)
            } else {
                (b, a)
            }
        };
        if !(q >= lo_v && q <= hi_v) {
            return Err(Error::OutOfRange {
                value: q.to_f64().unwrap_or(f64::NAN),
                lo: lo_v.to_f64().unwrap_or(f64::NAN),
                hi: hi_v.to_f64().unwrap_or(f64::NAN),
            });
        }
        if let Self::Linear { a, b } = *self {
            let y = (q - a) / b;
            return Ok(y.max(T::zero()).min(T::one()));
        }
        Ok(self.inverse_bracketed(q, increasing))
    }

    /// Safeguarded Newton iteration on `[0, 1]`.
    fn inverse_bracketed(&self, q: T, increasing: bool) -> T {
        let ftol = if T::epsilon() < lit(1e-10) {
            lit::<T>(1e-13)
        } else {
            lit::<T>(1e-6)
        };
        let signed = |y: T| {
            let d = self.value_unchecked(y) - q;
            if increasing {
                d
            } else {
                -d
            }
        };
        let (mut lo, mut hi) = (T::zero(), T::one());
        if signed(lo) >= T::zero() {
            return lo;
        }
        if signed(hi) <= T::zero() {
            return hi;
        }
        let half = lit::<T>(0.5);
        let mut y = half;
        for _ in 0..200 {
            let f = signed(y);
            if f.abs() <= ftol {
                return y;
            }
            if f < T::zero() {
                lo = y;
            } else {
                hi = y;
            }
            let d = self.derivative_unchecked(y);
            let d = if increasing { d } else { -d };
            let newton = if d > T::zero() { y - f / d } else { T::nan() };
            y = if newton > lo && newton < hi {
                newton
            } else {
                half * (lo + hi)
            };
            if hi - lo <= T::epsilon() {
                return y;
            }
        }
        y
    }

    /// `π'(1/2)` for the symmetric variants.
    fn center_slope(&self) -> T {
        self.derivative_unchecked(lit(0.5))
    }

    /// `G(u) = (π(1/2 + u) - 1/2) / u - 1`, decreasing in `u` for the
    /// symmetric smooth variants; its zero is the outer fixed point.
    fn outer_gap(&self, u: T) -> T {
        let half = lit::<T>(0.5);
        match *self {
            Self::MajorityMemory { k, p } => (p + p - T::one()) * majority_secant(k, u) - T::one(),
            Self::Kgw { j } => {
                let x = (j + j) * u;
                let ratio = if x.abs() < lit(1e-4) {
                    T::one() - x * x / lit(3.0)
                } else {
                    x.tanh() / x
                };
                j * ratio - T::one()
            }
            _ => (self.value_unchecked(half + u) - half) / u - T::one(),
        }
    }

    /// All solutions of `π(y) = y` in `[0, 1]`, ascending, classified.
    ///
    /// Returns an empty list for the identity map, where every point is
    /// fixed.
    pub fn fixed_points(&self) -> Vec<FixedPoint<T>> {
        let half = lit::<T>(0.5);
        match *self {
            Self::Linear { a, b } => {
                if b == T::one() {
                    return Vec::new();
                }
                let y = a / (T::one() - b);
                vec![FixedPoint::new(y, b)]
            }
            Self::StepLimit { p } => {
                if p > half {
                    vec![
                        FixedPoint::new(T::one() - p, T::zero()),
                        FixedPoint::new(half, T::infinity()),
                        FixedPoint::new(p, T::zero()),
                    ]
                } else if p < half {
                    vec![FixedPoint::new(half, T::neg_infinity())]
                } else {
                    vec![FixedPoint::new(half, T::zero())]
                }
            }
            Self::MajorityMemory { k: 1, p } if p == T::one() => Vec::new(),
            Self::MajorityMemory { .. } | Self::Kgw { .. } => {
                let slope = self.center_slope();
                let center = FixedPoint::new(half, slope);
                if center.crossing != Crossing::UpCrossing {
                    return vec![center];
                }
                let u = self.outer_offset();
                let (lo, hi) = (half - u, half + u);
                let d_lo = self.derivative_unchecked(lo);
                let d_hi = self.derivative_unchecked(hi);
                vec![FixedPoint::new(lo, d_lo), center, FixedPoint::new(hi, d_hi)]
            }
        }
    }

    /// Distance of the outer fixed points from one half, for symmetric
    /// smooth urns with an unstable centre.
    fn outer_offset(&self) -> T {
        let half = lit::<T>(0.5);
        if let Self::MajorityMemory { k: 3, p } = *self {
            // (y - 1/2) factors out of the cubic; the remaining quadratic is
            // (2p-1) y² - (2p-1) y + (1-p) = 0.
            let b = p + p - T::one();
            let disc = (lit::<T>(6.0) * p - lit(5.0)) / b;
            let u = half * disc.max(T::zero()).sqrt();
            debug_assert!({
                let check = self.outer_offset_search(true);
                (check - u).abs() <= lit::<T>(1e-9).max(T::epsilon().sqrt())
            });
            return u.min(half);
        }
        self.outer_offset_search(false)
    }

    fn outer_offset_search(&self, use_bisection: bool) -> T {
        let half = lit::<T>(0.5);
        let g = |u: T| {
            if u == T::zero() {
                self.center_slope() - T::one()
            } else {
                self.outer_gap(u)
            }
        };
        if g(half) >= T::zero() {
            return half;
        }
        let tol = T::root_tol();
        let found = if use_bisection {
            bisect(g, T::zero(), half, tol)
        } else {
            brent(g, T::zero(), half, tol)
        };
        found.unwrap_or(half)
    }
}

fn step_value<T: Real>(p: T, y: T) -> T {
    let half = lit::<T>(0.5);
    if y > half {
        p
    } else if y < half {
        T::one() - p
    } else {
        half
    }
}

/// Thresholds `p_c`, `p*`, `p**` for the majority-memory urn with `k` draws.
pub fn critical_params<T: Real>(k: u32) -> Result<CriticalParams<T>> {
    check_draws(k)?;
    let half = lit::<T>(0.5);
    let slope_at_center = majority_density::<T>(k, half);
    let center = |p: T| (p + p - T::one()) * slope_at_center;
    let tol = T::root_tol();
    let p_star = brent(|p| center(p) - half, half, T::one(), tol)?;
    if center(T::one()) <= T::one() + lit(CROSSING_TOL) {
        return Ok(CriticalParams {
            p_c: None,
            p_star,
            p_double_star: None,
        });
    }
    let p_c = brent(|p| center(p) - T::one(), half, T::one(), tol)?;
    let outer_slope = |p: T| {
        let spec = UrnFunctionSpec::MajorityMemory { k, p };
        let u = spec.outer_offset_search(false);
        spec.derivative_unchecked(half + u) - half
    };
    let start = p_c + lit::<T>(1e-9).max(T::epsilon().sqrt());
    let p_double_star = if outer_slope(start) > T::zero() && outer_slope(T::one()) < T::zero() {
        Some(brent(outer_slope, start, T::one(), tol)?)
    } else {
        None
    };
    Ok(CriticalParams {
        p_c: Some(p_c),
        p_star,
        p_double_star,
    })
}

/// Thresholds of the step-function limit `k → ∞`.
///
/// The centre is stable iff `p < 1/2`, so `p_c = 1/2`; the slope at the
/// centre jumps from zero to infinity at the same point, which therefore
/// also serves as `p*`. The outer attractors sit on flat branches and
/// never reach slope one half, so `p**` is absent.
pub fn step_limit_critical_params<T: Real>() -> CriticalParams<T> {
    CriticalParams {
        p_c: Some(lit(0.5)),
        p_star: lit(0.5),
        p_double_star: None,
    }
}

/// Mean step `x = 2y - 1` from the share of positive steps.
pub fn x_from_y<T: Real>(y: T) -> Result<T> {
    check_unit(y)?;
    Ok(y + y - T::one())
}

/// Share of positive steps `y = (1 + x) / 2` from the mean step.
pub fn y_from_x<T: Real>(x: T) -> Result<T> {
    if !(x >= -T::one() && x <= T::one()) {
        return Err(Error::OutOfRange {
            value: x.to_f64().unwrap_or(f64::NAN),
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok((T::one() + x) * lit(0.5))
}
