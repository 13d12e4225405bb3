//! Exact law of the positive-step count by forward dynamic programming.
//!
//! The count `n_t` after `t` steps is a Markov chain: it moves up by one
//! with probability `π(n_t / t)` and stays otherwise. Starting from a point
//! mass at `(M, m)` the row for time `t + 1` is obtained from the row for
//! time `t` in `O(t)`, so a table at time `N` costs `O(N²)` time and `O(N)`
//! memory. Everything is kept in natural-log space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, log_add_exp, log_sum_exp, Real};
use crate::urn::{Crossing, UrnFunctionSpec};

/// Largest number of steps [`evolve`] accepts.
pub const MAX_STEPS: usize = 200_000;

/// Rows at least this long are updated in parallel.
const PAR_ROW: usize = 8192;

/// Initial condition: `steps` frozen steps of which `positive` are positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WalkInit {
    pub steps: usize,
    pub positive: usize,
}

impl WalkInit {
    pub fn new(steps: usize, positive: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument(
                "initial condition needs at least one step".into(),
            ));
        }
        if positive > steps {
            return Err(Error::InvalidArgument(format!(
                "initial positive count {positive} exceeds initial steps {steps}"
            )));
        }
        Ok(Self { steps, positive })
    }

    /// Mirror image: positive and negative initial steps swapped.
    pub fn mirrored(self) -> Self {
        Self {
            steps: self.steps,
            positive: self.steps - self.positive,
        }
    }

    /// Counts reachable after `n_steps` total steps.
    pub fn reachable(self, n_steps: usize) -> std::ops::RangeInclusive<usize> {
        self.positive..=self.positive + n_steps.saturating_sub(self.steps)
    }
}

impl Default for WalkInit {
    /// Two steps, one of each sign.
    fn default() -> Self {
        Self { steps: 2, positive: 1 }
    }
}

/// Exact log-probabilities of the positive-step count at a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable<T> {
    pub n_steps: usize,
    pub init: WalkInit,
    pub spec: UrnFunctionSpec<T>,
    /// `log_prob[n]` for `n = 0..=n_steps`; `-inf` where unreachable.
    pub log_prob: Vec<T>,
}

/// Which route produced an entropy curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyMethod {
    /// `(1/N) log P(n)` at a single `N`.
    FiniteN(usize),
    /// Several finite-`N` profiles extrapolated to `N → ∞`.
    Extrapolated,
    /// Legendre transform of a cumulant generating function.
    Legendre,
    /// Minimal cost of the discrete path-space variational problem.
    Variational,
}

impl EntropyMethod {
    pub fn label(&self) -> String {
        match self {
            EntropyMethod::FiniteN(n) => format!("finite_n_{n}"),
            EntropyMethod::Extrapolated => "extrapolated".into(),
            EntropyMethod::Legendre => "legendre".into(),
            EntropyMethod::Variational => "variational".into(),
        }
    }
}

/// Sampled entropy density `φ(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve<T> {
    pub y: Vec<T>,
    pub phi: Vec<T>,
    pub method: EntropyMethod,
}

fn check_steps(init: WalkInit, n_steps: usize) -> Result<()> {
    if n_steps < init.steps {
        return Err(Error::InvalidArgument(format!(
            "target time {n_steps} precedes the initial condition at time {}",
            init.steps
        )));
    }
    if n_steps > MAX_STEPS {
        return Err(Error::ResourceLimit(format!(
            "{n_steps} steps exceeds the exact-distribution cap of {MAX_STEPS}"
        )));
    }
    Ok(())
}

/// Advances `row` (the law at time `t`) to time `t + 1`.
fn step_row<T: Real>(spec: &UrnFunctionSpec<T>, t: usize, lo: usize, hi: usize, row: &[T], next: &mut [T]) {
    let tt = from_usize::<T>(t);
    let ninf = T::neg_infinity();
    let up = |n: usize| -> T {
        let p = spec.value_unchecked(from_usize::<T>(n) / tt);
        p.ln()
    };
    let stay = |n: usize| -> T {
        let q = spec.complement_unchecked(from_usize::<T>(n) / tt);
        q.ln()
    };
    // Entries lo..=hi+1 of `next` are rewritten; everything else stays -inf.
    let cell = |n: usize| -> T {
        let from_same = if n <= hi { row[n] + stay(n) } else { ninf };
        let from_below = if n > lo { row[n - 1] + up(n - 1) } else { ninf };
        let from_same = if from_same.is_nan() { ninf } else { from_same };
        let from_below = if from_below.is_nan() { ninf } else { from_below };
        log_add_exp(from_same, from_below)
    };
    let target = &mut next[lo..=hi + 1];
    if target.len() >= PAR_ROW {
        target.par_chunks_mut(PAR_ROW / 4).enumerate().for_each(|(c, chunk)| {
            let base = lo + c * (PAR_ROW / 4);
            for (i, v) in chunk.iter_mut().enumerate() {
                *v = cell(base + i);
            }
        });
    } else {
        for (i, v) in target.iter_mut().enumerate() {
            *v = cell(lo + i);
        }
    }
}

fn normalization_tol<T: Real>(t: usize) -> T {
    lit::<T>(1e-10).max(from_usize::<T>(t) * lit::<T>(16.0) * T::epsilon())
}

/// Exact law of the positive-step count after `n_steps` steps.
pub fn evolve<T: Real>(spec: &UrnFunctionSpec<T>, init: WalkInit, n_steps: usize) -> Result<DistributionTable<T>> {
    let mut tables = evolve_snapshots(spec, init, &[n_steps])?;
    Ok(tables.pop().expect("one snapshot requested"))
}

/// Exact laws at each of the requested times, from a single forward pass.
///
/// `times` must be non-decreasing; the result is in the same order.
pub fn evolve_snapshots<T: Real>(
    spec: &UrnFunctionSpec<T>,
    init: WalkInit,
    times: &[usize],
) -> Result<Vec<DistributionTable<T>>> {
    spec.validate()?;
    WalkInit::new(init.steps, init.positive)?;
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("snapshot times must be non-decreasing".into()));
    }
    let Some(&last) = times.last() else {
        return Ok(Vec::new());
    };
    for &t in times {
        check_steps(init, t)?;
    }
    let mut row = vec![T::neg_infinity(); last + 1];
    let mut next = vec![T::neg_infinity(); last + 1];
    row[init.positive] = T::zero();
    let mut out = Vec::with_capacity(times.len());
    let mut wanted = times.iter().peekable();
    let mut t = init.steps;
    loop {
        while wanted.peek().is_some_and(|&&w| w == t) {
            wanted.next();
            let mut log_prob = row.clone();
            log_prob.truncate(t + 1);
            out.push(DistributionTable {
                n_steps: t,
                init,
                spec: *spec,
                log_prob,
            });
        }
        if t == last {
            break;
        }
        let lo = init.positive;
        let hi = init.positive + (t - init.steps);
        step_row(spec, t, lo, hi, &row, &mut next);
        std::mem::swap(&mut row, &mut next);
        t += 1;
        if cfg!(debug_assertions) {
            let total = log_sum_exp(row[lo..=hi + 1].iter().copied());
            debug_assert!(
                total.abs() <= normalization_tol::<T>(t),
                "normalization drift {total} at t = {t}"
            );
        }
    }
    Ok(out)
}

impl<T: Real> DistributionTable<T> {
    pub fn reachable(&self) -> std::ops::RangeInclusive<usize> {
        self.init.reachable(self.n_steps)
    }

    /// `log Σ P(n)`; zero up to rounding.
    pub fn log_total(&self) -> T {
        log_sum_exp(self.log_prob.iter().copied())
    }

    pub fn prob(&self, n: usize) -> T {
        self.log_prob.get(n).map_or(T::zero(), |l| l.exp())
    }

    /// Share `n / N` of count `n`.
    pub fn share(&self, n: usize) -> T {
        from_usize::<T>(n) / from_usize::<T>(self.n_steps)
    }

    /// Reachable count closest to `y·N`.
    pub fn nearest_count(&self, y: T) -> usize {
        let r = self.reachable();
        let target = (y * from_usize::<T>(self.n_steps)).round();
        let target = target.to_usize().unwrap_or(0);
        target.clamp(*r.start(), *r.end())
    }

    /// `log P(y₁ < n/N < y₂)`; `-inf` when no lattice point lies inside.
    pub fn interval_log_mass(&self, y1: T, y2: T) -> Result<T> {
        if !(y1 < y2) {
            return Err(Error::InvalidArgument(format!(
                "interval bounds must satisfy y1 < y2, got ({y1}, {y2})"
            )));
        }
        let nn = from_usize::<T>(self.n_steps);
        Ok(log_sum_exp(
            self.log_prob
                .iter()
                .enumerate()
                .filter(|&(n, _)| {
                    let y = from_usize::<T>(n) / nn;
                    y > y1 && y < y2
                })
                .map(|(_, &l)| l),
        ))
    }

    /// Finite-`N` entropy density `(n/N, log P(n) / N)` over reachable counts.
    pub fn entropy_profile(&self) -> EntropyCurve<T> {
        let nn = from_usize::<T>(self.n_steps);
        let (y, phi) = self
            .reachable()
            .map(|n| (from_usize::<T>(n) / nn, self.log_prob[n] / nn))
            .unzip();
        EntropyCurve {
            y,
            phi,
            method: EntropyMethod::FiniteN(self.n_steps),
        }
    }

    /// Local maxima of the probability mass function, by count.
    pub fn modes(&self) -> Vec<usize> {
        let r = self.reachable();
        let (lo, hi) = (*r.start(), *r.end());
        (lo..=hi)
            .filter(|&n| {
                let v = self.log_prob[n];
                let left = if n > lo {
                    self.log_prob[n - 1]
                } else {
                    T::neg_infinity()
                };
                let right = if n < hi {
                    self.log_prob[n + 1]
                } else {
                    T::neg_infinity()
                };
                v > left && v >= right
            })
            .collect()
    }
}

/// Least-squares fit of the polynomial decay of an interval mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit<T> {
    /// Negated slope of `log mass` against `log N`; estimates `χ - 1`.
    pub exponent: T,
    pub n_steps: Vec<usize>,
    pub log_masses: Vec<T>,
    /// Set when the interval does not straddle an unstable fixed point.
    pub warning: Option<String>,
}

fn least_squares_slope<T: Real>(x: &[T], y: &[T]) -> T {
    let n = from_usize::<T>(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fits `P(y₁ < y_N < y₂) ∝ N^(-exponent)` over the times in `n_list`.
pub fn decay_exponent<T: Real>(
    spec: &UrnFunctionSpec<T>,
    init: WalkInit,
    y1: T,
    y2: T,
    n_list: &[usize],
) -> Result<DecayFit<T>> {
    if n_list.len() < 3 {
        return Err(Error::InvalidArgument("decay fit needs at least three sizes".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("sizes must be strictly increasing".into()));
    }
    if n_list[n_list.len() - 1] < 10 * n_list[0] {
        return Err(Error::InvalidArgument("sizes must span at least one decade".into()));
    }
    let straddles = spec
        .fixed_points()
        .iter()
        .any(|f| f.crossing == Crossing::UpCrossing && f.location > y1 && f.location < y2);
    let warning = (!straddles).then(|| {
        format!("interval ({y1}, {y2}) contains no up-crossing fixed point; the power-law fit is not expected to apply")
    });
    let tables = evolve_snapshots(spec, init, n_list)?;
    let log_masses = tables
        .iter()
        .map(|t| t.interval_log_mass(y1, y2))
        .collect::<Result<Vec<T>>>()?;
    let log_n: Vec<T> = n_list.iter().map(|&n| from_usize::<T>(n).ln()).collect();
    let exponent = -least_squares_slope(&log_n, &log_masses);
    Ok(DecayFit {
        exponent,
        n_steps: n_list.to_vec(),
        log_masses,
        warning,
    })
}

/// Solves the 3x3 normal equations of `v ≈ c₀ + c₁ ln N / N + c₂ / N`.
fn fit_finite_size<T: Real>(ns: &[usize], values: &[T]) -> T {
    let rows: Vec<[T; 3]> = ns
        .iter()
        .map(|&n| {
            let nn = from_usize::<T>(n);
            [T::one(), nn.ln() / nn, T::one() / nn]
        })
        .collect();
    let mut a = [[T::zero(); 3]; 3];
    let mut b = [T::zero(); 3];
    for (r, &v) in rows.iter().zip(values) {
        for i in 0..3 {
            b[i] = b[i] + r[i] * v;
            for j in 0..3 {
                a[i][j] = a[i][j] + r[i] * r[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (dst, src) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst = *dst - f * *src;
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [T::zero(); 3];
    for i in (0..3).rev() {
        let mut s = b[i];
        for j in i + 1..3 {
            s = s - a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    x[0]
}

/// Extrapolates finite-`N` entropy densities to `N → ∞` at each `y`.
///
/// At each size the atom nearest to `y·N` among reachable counts is used,
/// and `φ_N(y) = φ(y) + c₁ ln N / N + c₂ / N` is fitted by least squares.
/// Needs at least three tables of distinct sizes.
pub fn extrapolate_entropy<T: Real>(tables: &[DistributionTable<T>], ys: &[T]) -> Result<EntropyCurve<T>> {
    if tables.len() < 3 {
        return Err(Error::InvalidArgument(
            "extrapolation needs at least three sizes".into(),
        ));
    }
    let ns: Vec<usize> = tables.iter().map(|t| t.n_steps).collect();
    let phi = ys
        .iter()
        .map(|&y| {
            let vals: Vec<T> = tables
                .iter()
                .map(|t| t.log_prob[t.nearest_count(y)] / from_usize::<T>(t.n_steps))
                .collect();
            fit_finite_size(&ns, &vals)
        })
        .collect();
    Ok(EntropyCurve {
        y: ys.to_vec(),
        phi,
        method: EntropyMethod::Extrapolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn maj(k: u32, p: f64) -> UrnFunctionSpec<f64> {
        UrnFunctionSpec::majority(k, p).unwrap()
    }

    #[test]
    fn memoryless_is_shifted_binomial() {
        let t = evolve(&maj(3, 0.5), WalkInit::new(1, 1).unwrap(), 5).unwrap();
        assert_abs_diff_eq!(t.log_prob[3], (6.0_f64 / 16.0).ln(), epsilon = 1e-14);
        assert_eq!(t.log_prob[0], f64::NEG_INFINITY);
        assert_abs_diff_eq!(t.log_prob[5], (1.0_f64 / 16.0).ln(), epsilon = 1e-14);
    }

    #[test]
    fn unreachable_counts_are_exactly_neg_infinity() {
        let init = WalkInit::new(4, 3).unwrap();
        let t = evolve(&maj(3, 0.7), init, 10).unwrap();
        for n in 0..3 {
            assert_eq!(t.log_prob[n], f64::NEG_INFINITY);
        }
        assert_eq!(t.log_prob[10], f64::NEG_INFINITY);
        assert!(t.log_prob[9].is_finite());
        assert_abs_diff_eq!(t.log_total(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_times() {
        let init = WalkInit::new(5, 2).unwrap();
        assert!(matches!(evolve(&maj(1, 0.7), init, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            evolve(&maj(1, 0.7), init, MAX_STEPS + 1),
            Err(Error::ResourceLimit(_))
        ));
        assert!(WalkInit::new(0, 0).is_err());
        assert!(WalkInit::new(2, 3).is_err());
    }

    #[test]
    fn snapshot_at_initial_time_is_point_mass() {
        let init = WalkInit::default();
        let t = evolve(&maj(3, 0.9), init, 2).unwrap();
        assert_eq!(t.log_prob, vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY]);
    }

    #[test]
    fn bimodal_above_bifurcation() {
        let t = evolve(&maj(3, 0.9), WalkInit::default(), 2000).unwrap();
        let modes = t.modes();
        assert_eq!(modes.len(), 2, "modes {modes:?}");
        let u = 0.5 * (0.4_f64 / 0.8).sqrt();
        assert!((t.share(modes[0]) - (0.5 - u)).abs() < 0.02);
        assert!((t.share(modes[1]) - (0.5 + u)).abs() < 0.02);
    }

    #[test]
    fn symmetric_init_gives_symmetric_law() {
        for spec in [maj(3, 0.9), maj(1, 0.6), maj(5, 0.8)] {
            let t = evolve(&spec, WalkInit::default(), 300).unwrap();
            let (lo, hi) = (1, 299);
            for n in lo..=hi {
                assert_abs_diff_eq!(t.log_prob[n], t.log_prob[lo + hi - n], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn interval_mass_examples() {
        let n = 60;
        let t = evolve(&maj(3, 0.5), WalkInit::new(1, 1).unwrap(), n).unwrap();
        // Reachable shares are 1/N..1; the open unit interval excludes only n = N.
        let inner = t.interval_log_mass(0.0, 1.0).unwrap();
        let direct = (1.0 - 0.5_f64.powi(n as i32 - 1)).ln();
        assert_abs_diff_eq!(inner, direct, epsilon = 1e-14);

        let t = evolve(&maj(3, 0.9), WalkInit::default(), 100).unwrap();
        assert_eq!(t.interval_log_mass(0.5, 0.5005).unwrap(), f64::NEG_INFINITY);
        assert!(t.interval_log_mass(0.6, 0.6).is_err());
    }

    #[test]
    fn entropy_profile_of_fair_coin_tracks_stirling() {
        let n = 4000;
        let t = evolve(&maj(3, 0.5), WalkInit::default(), n).unwrap();
        let curve = t.entropy_profile();
        let bound = 5.0 * (n as f64).ln() / n as f64;
        for (&y, &phi) in curve.y.iter().zip(&curve.phi) {
            if y <= 0.0 || y >= 1.0 {
                continue;
            }
            let l = y * (0.5 / y).ln() + (1.0 - y) * (0.5 / (1.0 - y)).ln();
            assert!((phi - l).abs() <= bound, "y={y} phi={phi} L={l}");
        }
    }

    #[test]
    fn entropy_profile_peaks_at_centre_below_p_star() {
        let n = 4000;
        let t = evolve(&maj(1, 0.6), WalkInit::default(), n).unwrap();
        let c = t.entropy_profile();
        let (imax, _) = c
            .phi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((c.y[imax] - 0.5).abs() <= 1.0 / n as f64);
        for (&y, &phi) in c.y.iter().zip(&c.phi) {
            if (y - 0.5).abs() > 0.1 {
                assert!(phi < -1e-3);
            }
        }
    }

    #[test]
    fn decay_fit_warns_without_up_crossing() {
        let fit = decay_exponent(&maj(1, 0.75), WalkInit::default(), 0.4, 0.6, &[100, 300, 1000]).unwrap();
        assert!(fit.warning.is_some());
        assert!(decay_exponent(&maj(1, 0.75), WalkInit::default(), 0.4, 0.6, &[100, 300]).is_err());
        assert!(decay_exponent(&maj(1, 0.75), WalkInit::default(), 0.4, 0.6, &[100, 300, 500]).is_err());
    }

    #[test]
    fn finite_size_fit_recovers_constant() {
        let ns = [1000, 2000, 4000, 8000];
        let vals: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let n = n as f64;
                -0.3 + 0.7 * n.ln() / n - 2.0 / n
            })
            .collect();
        assert_abs_diff_eq!(fit_finite_size(&ns, &vals), -0.3, epsilon = 1e-10);
    }
}
