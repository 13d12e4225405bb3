//! Region classification of the `(p, x)` plane for majority-memory urns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::urn::{critical_params, x_from_y, Crossing, FixedPoint, UrnFunctionSpec};

/// Maximum number of points along either axis of a scan.
pub const MAX_SCAN_AXIS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Exponentially unlikely mean step: `φ < 0`.
    NegativeEntropy,
    /// Between the two outer attractors above `p_c`, where `φ = 0`.
    ZeroEntropyPlateau,
    /// Stable fixed point at `x = 0`.
    CriticalLine,
    /// Stable fixed point away from `x = 0`.
    Attractor,
    /// Unstable fixed point.
    UnstableLine,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::NegativeEntropy => "negative_entropy",
            Region::ZeroEntropyPlateau => "zero_entropy_plateau",
            Region::CriticalLine => "critical_line",
            Region::Attractor => "attractor",
            Region::UnstableLine => "unstable_line",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell<T> {
    pub p: T,
    pub x: T,
    pub region: Region,
    pub is_p_star: bool,
    pub is_p_c: bool,
    pub is_p_double_star: bool,
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::OutOfRange {
            value: p.to_f64().unwrap_or(f64::NAN),
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Fixed points in the `x` coordinate with `x ≥ 0` (the map is symmetric).
fn half_line_fixed_points<T: Real>(k: u32, p: T) -> Result<Vec<(T, Crossing)>> {
    check_p(p)?;
    let spec = UrnFunctionSpec::majority(k, p)?;
    spec.fixed_points()
        .into_iter()
        .map(|FixedPoint { location, crossing, .. }| Ok((x_from_y(location)?, crossing)))
        .filter(|r| r.as_ref().map_or(true, |(x, _)| *x >= -lit::<T>(1e-12)))
        .map(|r| r.map(|(x, c)| (x.max(T::zero()), c)))
        .collect()
}

/// `x`-coordinates of the stable fixed points of `π_k`, ascending.
pub fn attractors<T: Real>(k: u32, p: T) -> Result<Vec<T>> {
    check_p(p)?;
    let spec = UrnFunctionSpec::majority(k, p)?;
    spec.fixed_points()
        .into_iter()
        .filter(|f| f.crossing == Crossing::DownCrossing)
        .map(|f| x_from_y(f.location))
        .collect()
}

fn classify_with<T: Real>(fps: &[(T, Crossing)], x: T, tol: T) -> Region {
    let xa = x.abs();
    let stable = |c: Crossing| c != Crossing::UpCrossing;
    if let Some(&(fx, c)) = fps.iter().find(|(fx, _)| (xa - *fx).abs() <= tol) {
        return match (fx == T::zero(), stable(c)) {
            (true, true) => Region::CriticalLine,
            (false, true) => Region::Attractor,
            (_, false) => Region::UnstableLine,
        };
    }
    // plateau: strictly inside the outermost stable point, with an
    // unstable point between it and its mirror image
    let outer = fps
        .iter()
        .filter(|(_, c)| stable(*c))
        .map(|&(fx, _)| fx)
        .fold(T::zero(), T::max);
    let split = fps.iter().any(|&(fx, c)| !stable(c) && fx < outer);
    if split && xa < outer {
        Region::ZeroEntropyPlateau
    } else {
        Region::NegativeEntropy
    }
}

/// Region of `(p, x)`; points within `tol` of a fixed-point curve are
/// assigned to that curve. The result is exactly symmetric under `x → -x`.
pub fn classify<T: Real>(k: u32, p: T, x: T, tol: T) -> Result<PhaseCell<T>> {
    if !(x.abs() <= T::one()) {
        return Err(Error::OutOfRange {
            value: x.to_f64().unwrap_or(f64::NAN),
            lo: -1.0,
            hi: 1.0,
        });
    }
    let fps = half_line_fixed_points(k, p)?;
    let crit = critical_params::<T>(k)?;
    let at = |v: Option<T>| v.is_some_and(|v| (v - p).abs() <= tol);
    Ok(PhaseCell {
        p,
        x,
        region: classify_with(&fps, x, tol),
        is_p_star: at(Some(crit.p_star)),
        is_p_c: at(crit.p_c),
        is_p_double_star: at(crit.p_double_star),
    })
}

/// Half the distance to each neighbour: `(lower, upper)` extents of the
/// cell around `grid[i]`.
fn cell_extent<T: Real>(grid: &[T], i: usize) -> (T, T) {
    let half = lit::<T>(0.5);
    let lo = if i > 0 {
        (grid[i] - grid[i - 1]) * half
    } else {
        T::zero()
    };
    let hi = if i + 1 < grid.len() {
        (grid[i + 1] - grid[i]) * half
    } else {
        T::zero()
    };
    (lo, hi)
}

/// Classifies every `(p, x)` pair, row-major in `p`.
///
/// A fixed-point curve claims the grid point nearest to it (tolerance half
/// an `x` step). Marker flags are set on the row whose cell contains the
/// corresponding critical value.
pub fn scan<T: Real>(k: u32, p_grid: &[T], x_grid: &[T]) -> Result<Vec<PhaseCell<T>>> {
    if p_grid.len() > MAX_SCAN_AXIS || x_grid.len() > MAX_SCAN_AXIS {
        return Err(Error::ResourceLimit(format!(
            "scan of {} × {} exceeds {MAX_SCAN_AXIS} × {MAX_SCAN_AXIS}",
            p_grid.len(),
            x_grid.len()
        )));
    }
    for g in [p_grid, x_grid] {
        if g.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("scan grids must be strictly increasing".into()));
        }
    }
    if let Some(bad) = x_grid.iter().find(|x| !(x.abs() <= T::one())) {
        return Err(Error::OutOfRange {
            value: bad.to_f64().unwrap_or(f64::NAN),
            lo: -1.0,
            hi: 1.0,
        });
    }
    let crit = critical_params::<T>(k)?;
    let x_step = x_grid.windows(2).map(|w| w[1] - w[0]).fold(T::infinity(), T::min);
    let tol = if x_step.is_finite() {
        x_step * lit(0.5)
    } else {
        lit(1e-9)
    };
    let rows: Vec<Vec<PhaseCell<T>>> = (0..p_grid.len())
        .into_par_iter()
        .map(|i| {
            let p = p_grid[i];
            let fps = half_line_fixed_points(k, p)?;
            let (lo, hi) = cell_extent(p_grid, i);
            let single = p_grid.len() == 1;
            let marks = |v: Option<T>| {
                v.is_some_and(|v| {
                    if single {
                        (v - p).abs() <= lit(1e-9)
                    } else {
                        v >= p - lo && (v < p + hi || (i + 1 == p_grid.len() && v <= p))
                    }
                })
            };
            let (s, c, d) = (marks(Some(crit.p_star)), marks(crit.p_c), marks(crit.p_double_star));
            Ok(x_grid
                .iter()
                .map(|&x| PhaseCell {
                    p,
                    x,
                    region: classify_with(&fps, x, tol),
                    is_p_star: s,
                    is_p_c: c,
                    is_p_double_star: d,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}
