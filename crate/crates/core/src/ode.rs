//! Adaptive Dormand–Prince 5(4) integration of scalar ODEs.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order solution minus embedded fourth-order solution.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dy/dt = f(t, y)` from `(t0, y0)` and returns `y` at each of
/// `targets`, which must be monotone in the direction of integration
/// (either all increasing or all decreasing away from `t0`).
pub fn integrate<T, F>(mut f: F, t0: T, y0: T, targets: &[T], tol: Tolerance) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, T) -> Result<T>,
{
    let Some(&last) = targets.last() else {
        return Ok(Vec::new());
    };
    let dir = if last >= t0 { T::one() } else { -T::one() };
    if targets.windows(2).any(|w| (w[1] - w[0]) * dir < T::zero()) || (targets[0] - t0) * dir < T::zero() {
        return Err(Error::InvalidArgument(
            "ODE targets must be monotone away from the start".into(),
        ));
    }
    let (rtol, atol) = (lit::<T>(tol.rel), lit::<T>(tol.abs));
    let span = (last - t0).abs();
    let mut h = (span * lit(1e-3)).max(lit(1e-8)) * dir;
    let mut t = t0;
    let mut y = y0;
    let mut k = [T::zero(); 7];
    k[0] = f(t, y)?;
    let mut out = Vec::with_capacity(targets.len());
    let mut steps = 0usize;
    for &target in targets {
        while (target - t) * dir > T::zero() {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::NonConvergence(format!("ODE step limit reached at t = {t}")));
            }
            let remaining = target - t;
            let hit = h.abs() >= remaining.abs();
            let step = if hit { remaining } else { h };
            for s in 1..7 {
                let mut acc = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc = acc + step * lit::<T>(A[s][j]) * *kj;
                }
                k[s] = f(t + step * lit::<T>(C[s]), acc)?;
            }
            let y_new = y + step
                * (lit::<T>(A[6][0]) * k[0]
                    + lit::<T>(A[6][2]) * k[2]
                    + lit::<T>(A[6][3]) * k[3]
                    + lit::<T>(A[6][4]) * k[4]
                    + lit::<T>(A[6][5]) * k[5]);
            let err_est: T = step * k.iter().zip(E.iter()).map(|(&kk, &e)| kk * lit::<T>(e)).sum::<T>();
            let scale = atol + rtol * y.abs().max(y_new.abs());
            let err = (err_est / scale).abs();
            if err <= T::one() || step.abs() <= T::epsilon() * t.abs().max(T::one()) * lit(16.0) {
                t = if hit { target } else { t + step };
                y = y_new;
                // First-same-as-last: the seventh stage is f at the new point.
                k[0] = k[6];
            }
            let factor = if err == T::zero() {
                lit::<T>(5.0)
            } else {
                (lit::<T>(0.9) * err.powf(lit(-0.2))).min(lit(5.0)).max(lit(0.2))
            };
            h = step * factor;
            if !y.is_finite() {
                return Err(Error::NonConvergence(format!("ODE solution diverged near t = {t}")));
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_forward() {
        let ts = [0.5, 1.0, 2.0];
        let ys = integrate(|_t, y: f64| Ok(-y), 0.0, 1.0, &ts, Tolerance::default()).unwrap();
        for (t, y) in ts.iter().zip(ys) {
            assert!((y - (-t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn logistic_backward() {
        // y' = y(1-y), y(0) = 0.7, integrate to t = -5.
        let exact = |t: f64| {
            let c = 0.7 / 0.3;
            c * t.exp() / (1.0 + c * t.exp())
        };
        let ts = [-1.0, -3.0, -5.0];
        let ys = integrate(|_t, y: f64| Ok(y * (1.0 - y)), 0.0, 0.7, &ts, Tolerance::default()).unwrap();
        for (t, y) in ts.iter().zip(ys) {
            assert!((y - exact(*t)).abs() < 1e-10);
        }
    }

    #[test]
    fn non_monotone_targets_rejected() {
        let r = integrate(|_t, y: f64| Ok(y), 0.0, 1.0, &[1.0, 0.5], Tolerance::default());
        assert!(r.is_err());
    }

    #[test]
    fn rhs_errors_propagate() {
        let r = integrate(
            |t, _y: f64| {
                if t > 0.5 {
                    Err(Error::DomainBreach("test".into()))
                } else {
                    Ok(1.0)
                }
            },
            0.0,
            0.0,
            &[1.0],
            Tolerance::default(),
        );
        assert!(matches!(r, Err(Error::DomainBreach(_))));
    }
}
