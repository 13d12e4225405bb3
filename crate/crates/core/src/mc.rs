//! Seeded Monte Carlo ensembles of walks.
//!
//! Every sample draws from its own ChaCha8 stream selected by
//! `(master_seed, sample_index)`, so an ensemble is bit-identical whatever
//! the number of worker threads.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::WalkInit;
use crate::scalar::{from_usize, lit, Real};
use crate::urn::UrnFunctionSpec;

/// Upper bound on the number of stored trace points per walk.
pub const TRACE_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    /// Literal memory extraction: `k` uniform draws from past steps.
    Direct,
    /// One Bernoulli(π(n/t)) step per time.
    Collapsed,
}

impl Mechanism {
    pub fn label(self) -> &'static str {
        match self {
            Mechanism::Direct => "direct",
            Mechanism::Collapsed => "collapsed",
        }
    }
}

/// Random stream for one sample.
pub fn stream_rng(master_seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(sample_index);
    rng
}

/// Per-walk observations beyond the final count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkRecord {
    pub final_count: usize,
    /// Sign changes of `y_t - level`, when a level was given.
    pub crossings: u64,
    pub last_crossing: Option<usize>,
    /// Thinned `(t, n_t)` pairs, when requested.
    pub trace: Option<Vec<(usize, usize)>>,
}

struct Observer<T> {
    level: Option<T>,
    sign: i8,
    crossings: u64,
    last_crossing: Option<usize>,
    stride: usize,
    trace: Option<Vec<(usize, usize)>>,
}

impl<T: Real> Observer<T> {
    fn new(init: WalkInit, n_steps: usize, level: Option<T>, trace: bool) -> Self {
        let span = n_steps - init.steps;
        let stride = span.div_ceil(TRACE_POINTS).max(1);
        let mut obs = Self {
            level,
            sign: 0,
            crossings: 0,
            last_crossing: None,
            stride,
            trace: trace.then(Vec::new),
        };
        obs.see(init.steps, init.positive, init.steps);
        obs
    }

    fn see(&mut self, t: usize, n: usize, start: usize) {
        if let Some(level) = self.level {
            let d = from_usize::<T>(n) - level * from_usize::<T>(t);
            let s = if d > T::zero() {
                1
            } else if d < T::zero() {
                -1
            } else {
                0
            };
            if s != 0 {
                if self.sign != 0 && s != self.sign {
                    self.crossings += 1;
                    self.last_crossing = Some(t);
                }
                self.sign = s;
            }
        }
        if let Some(tr) = &mut self.trace {
            if (t - start).is_multiple_of(self.stride) {
                tr.push((t, n));
            }
        }
    }

    fn finish(mut self, t: usize, n: usize) -> WalkRecord {
        if let Some(tr) = &mut self.trace {
            if tr.last().map(|&(lt, _)| lt) != Some(t) {
                tr.push((t, n));
            }
        }
        WalkRecord {
            final_count: n,
            crossings: self.crossings,
            last_crossing: self.last_crossing,
            trace: self.trace,
        }
    }
}

fn check_walk(init: WalkInit, n_steps: usize) -> Result<()> {
    WalkInit::new(init.steps, init.positive)?;
    if n_steps < init.steps {
        return Err(Error::InvalidArgument(format!(
            "N = {n_steps} is shorter than the initial condition ({} steps)",
            init.steps
        )));
    }
    Ok(())
}

fn collapsed<T: Real, R: Rng>(
    spec: &UrnFunctionSpec<T>,
    init: WalkInit,
    n_steps: usize,
    rng: &mut R,
    mut obs: Observer<T>,
) -> WalkRecord {
    let mut n = init.positive;
    for t in init.steps..n_steps {
        let y = from_usize::<T>(n) / from_usize::<T>(t);
        let u: T = lit(rng.gen::<f64>());
        if u < spec.value_unchecked(y) {
            n += 1;
        }
        obs.see(t + 1, n, init.steps);
    }
    obs.finish(n_steps, n)
}

fn direct<T: Real, R: Rng>(
    k: u32,
    p: T,
    init: WalkInit,
    n_steps: usize,
    rng: &mut R,
    mut obs: Observer<T>,
) -> WalkRecord {
    // full step history: initial positives first, then initial negatives
    let mut history: Vec<bool> = Vec::with_capacity(n_steps);
    history.extend(std::iter::repeat_n(true, init.positive));
    history.extend(std::iter::repeat_n(false, init.steps - init.positive));
    let mut n = init.positive;
    for t in init.steps..n_steps {
        let positives = (0..k).filter(|_| history[rng.gen_range(0..t)]).count() as u32;
        let majority = 2 * positives > k;
        let u: T = lit(rng.gen::<f64>());
        let step = if u < p { majority } else { !majority };
        history.push(step);
        if step {
            n += 1;
        }
        obs.see(t + 1, n, init.steps);
    }
    obs.finish(n_steps, n)
}

/// One walk of the collapsed chain: from `t` steps with `n` positive, the
/// next step is positive with probability `π(n/t)`.
pub fn sample_walk<T: Real, R: Rng>(
    spec: &UrnFunctionSpec<T>,
    init: WalkInit,
    n_steps: usize,
    rng: &mut R,
) -> Result<usize> {
    Ok(sample_walk_record(spec, init, n_steps, Mechanism::Collapsed, None, false, rng)?.final_count)
}

/// One walk of the literal mechanism: `k` past steps are drawn uniformly
/// with replacement, and their majority sign is followed with probability
/// `p` (reversed otherwise).
pub fn sample_walk_direct<T: Real, R: Rng>(k: u32, p: T, init: WalkInit, n_steps: usize, rng: &mut R) -> Result<usize> {
    let spec = UrnFunctionSpec::majority(k, p)?;
    Ok(sample_walk_record(&spec, init, n_steps, Mechanism::Direct, None, false, rng)?.final_count)
}

/// One walk with optional level-crossing count and thinned trace (at most
/// about [`TRACE_POINTS`] points, every `⌈(N - M)/1000⌉` steps).
pub fn sample_walk_record<T: Real, R: Rng>(
    spec: &UrnFunctionSpec<T>,
    init: WalkInit,
    n_steps: usize,
    mechanism: Mechanism,
    level: Option<T>,
    trace: bool,
    rng: &mut R,
) -> Result<WalkRecord> {
    spec.validate()?;
    check_walk(init, n_steps)?;
    if let Some(l) = level {
        if !(l > T::zero() && l < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "crossing level must lie in (0, 1), got {l}"
            )));
        }
    }
    let obs = Observer::new(init, n_steps, level, trace);
    match mechanism {
        Mechanism::Collapsed => Ok(collapsed(spec, init, n_steps, rng, obs)),
        Mechanism::Direct => match *spec {
            UrnFunctionSpec::MajorityMemory { k, p } => Ok(direct(k, p, init, n_steps, rng, obs)),
            _ => Err(Error::Unsupported(
                "the direct mechanism exists only for majority-memory urns".into(),
            )),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingSummary {
    pub level: f64,
    pub mean: f64,
    pub median: f64,
    pub max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: u64,
    pub final_count: usize,
    pub crossings: u64,
    pub last_crossing: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult<T> {
    pub spec: UrnFunctionSpec<T>,
    pub init: WalkInit,
    pub samples: u64,
    pub n_steps: usize,
    pub seed: u64,
    pub mechanism: Mechanism,
    /// Final positive count → occurrences.
    pub histogram: BTreeMap<usize, u64>,
    pub crossings: Option<CrossingSummary>,
    /// Per-sample results in sample-index order.
    pub outcomes: Vec<SampleOutcome>,
}

impl<T: Real> EnsembleResult<T> {
    /// Empirical probabilities indexed by count `0..=N`.
    pub fn empirical(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_steps + 1];
        for (&n, &c) in &self.histogram {
            out[n] = c as f64 / self.samples as f64;
        }
        out
    }

    /// Fraction of samples whose last level crossing happened at or before
    /// `t0` (including samples that never crossed).
    pub fn fraction_settled_after(&self, t0: usize) -> f64 {
        let settled = self
            .outcomes
            .iter()
            .filter(|o| o.last_crossing.is_none_or(|t| t <= t0))
            .count();
        settled as f64 / self.samples.max(1) as f64
    }

    /// Mean of `|x_N| = |2 n/N - 1|` over samples.
    pub fn mean_abs_x(&self) -> f64 {
        let nn = self.n_steps as f64;
        self.histogram
            .iter()
            .map(|(&n, &c)| (2.0 * n as f64 / nn - 1.0).abs() * c as f64)
            .sum::<f64>()
            / self.samples as f64
    }

    /// Fraction of samples with `x_N > 0`.
    pub fn fraction_positive(&self) -> f64 {
        let half = self.n_steps as f64 / 2.0;
        self.histogram
            .iter()
            .filter(|(&n, _)| n as f64 > half)
            .map(|(_, &c)| c)
            .sum::<u64>() as f64
            / self.samples as f64
    }
}

/// Parallel ensemble of `samples` walks; sample `i` uses
/// [`stream_rng`]`(master_seed, i)`.
pub fn run_ensemble<T: Real>(
    spec: &UrnFunctionSpec<T>,
    init: WalkInit,
    n_steps: usize,
    samples: u64,
    master_seed: u64,
    mechanism: Mechanism,
    level: Option<T>,
) -> Result<EnsembleResult<T>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    // validate once up front so workers cannot disagree on errors
    sample_walk_record(
        spec,
        init,
        init.steps,
        mechanism,
        level,
        false,
        &mut stream_rng(master_seed, 0),
    )?;
    let outcomes: Vec<SampleOutcome> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(master_seed, i);
            let r = sample_walk_record(spec, init, n_steps, mechanism, level, false, &mut rng)?;
            Ok(SampleOutcome {
                index: i,
                final_count: r.final_count,
                crossings: r.crossings,
                last_crossing: r.last_crossing,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut histogram = BTreeMap::new();
    for o in &outcomes {
        *histogram.entry(o.final_count).or_insert(0) += 1;
    }
    let crossings = level.map(|l| {
        let mut c: Vec<u64> = outcomes.iter().map(|o| o.crossings).collect();
        c.sort_unstable();
        let m = c.len();
        let median = if m % 2 == 1 {
            c[m / 2] as f64
        } else {
            (c[m / 2 - 1] + c[m / 2]) as f64 / 2.0
        };
        CrossingSummary {
            level: l.to_f64().unwrap_or(f64::NAN),
            mean: c.iter().sum::<u64>() as f64 / m as f64,
            median,
            max: *c.last().unwrap_or(&0),
        }
    });
    Ok(EnsembleResult {
        spec: *spec,
        init,
        samples,
        n_steps,
        seed: master_seed,
        mechanism,
        histogram,
        crossings,
        outcomes,
    })
}

/// Collapsed ensemble recording crossings of `y_t = level` for `t ≥ M`.
pub fn crossing_stats<T: Real>(
    spec: &UrnFunctionSpec<T>,
    init: WalkInit,
    n_steps: usize,
    samples: u64,
    level: T,
    master_seed: u64,
) -> Result<EnsembleResult<T>> {
    run_ensemble(
        spec,
        init,
        n_steps,
        samples,
        master_seed,
        Mechanism::Collapsed,
        Some(level),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(7, 3).gen()).collect();
        let mut r = stream_rng(7, 3);
        let b: Vec<u64> = (0..4).map(|_| r.gen()).collect();
        assert_eq!(a[0], b[0]);
        let mut r1 = stream_rng(7, 3);
        let mut r2 = stream_rng(7, 4);
        assert_ne!(r1.gen::<u64>(), r2.gen::<u64>());
    }

    #[test]
    fn deterministic_copy() {
        let init = WalkInit::new(1, 1).unwrap();
        let mut rng = stream_rng(1, 0);
        assert_eq!(sample_walk_direct(1, 1.0, init, 500, &mut rng).unwrap(), 500);
        let spec = UrnFunctionSpec::majority(1, 1.0).unwrap();
        assert_eq!(sample_walk(&spec, init, 500, &mut rng).unwrap(), 500);
    }

    #[test]
    fn argument_checks() {
        let mut rng = stream_rng(0, 0);
        assert!(sample_walk_direct(2, 0.7, WalkInit::default(), 10, &mut rng).is_err());
        let spec = UrnFunctionSpec::majority(3, 0.7).unwrap();
        assert!(sample_walk(&spec, WalkInit::default(), 1, &mut rng).is_err());
        let kgw = UrnFunctionSpec::kgw(1.0).unwrap();
        assert!(matches!(
            run_ensemble(&kgw, WalkInit::default(), 10, 5, 0, Mechanism::Direct, None),
            Err(Error::Unsupported(_))
        ));
        assert!(crossing_stats(&spec, WalkInit::default(), 10, 5, 1.0, 0).is_err());
    }

    #[test]
    fn trace_is_thinned() {
        let spec = UrnFunctionSpec::majority(3, 0.7).unwrap();
        let init = WalkInit::default();
        let r = sample_walk_record(
            &spec,
            init,
            10_002,
            Mechanism::Collapsed,
            None,
            true,
            &mut stream_rng(0, 0),
        )
        .unwrap();
        let tr = r.trace.unwrap();
        assert!(tr.len() <= TRACE_POINTS + 2);
        assert_eq!(tr[0], (2, 1));
        assert_eq!(tr.last().unwrap(), &(10_002, r.final_count));
        assert!(tr.windows(2).all(|w| w[1].0 - w[0].0 <= 10));
    }

    #[test]
    fn ensemble_invariants() {
        let spec = UrnFunctionSpec::majority(3, 0.8).unwrap();
        let init = WalkInit::default();
        let e = run_ensemble(&spec, init, 200, 500, 11, Mechanism::Direct, Some(0.5)).unwrap();
        assert_eq!(e.histogram.values().sum::<u64>(), 500);
        assert!(e.histogram.keys().all(|n| init.reachable(200).contains(n)));
        let c = e.crossings.unwrap();
        assert!(c.mean >= 0.0 && c.max as f64 >= c.median);
        assert_eq!(
            e,
            run_ensemble(&spec, init, 200, 500, 11, Mechanism::Direct, Some(0.5)).unwrap()
        );
    }

    #[test]
    fn crossing_counter_counts_sign_changes() {
        let init = WalkInit::default();
        let mut obs = Observer::<f64>::new(init, 10, Some(0.5), false);
        // y: 1/2 (tie), 2/3, 2/4 (tie), 2/5, 3/6 (tie), 4/7
        for (t, n) in [(3, 2), (4, 2), (5, 2), (6, 3), (7, 4)] {
            obs.see(t, n, 2);
        }
        let r = obs.finish(7, 4);
        assert_eq!(r.crossings, 2);
        assert_eq!(r.last_crossing, Some(7));
    }
}
