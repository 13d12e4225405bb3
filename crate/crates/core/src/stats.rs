//! Distribution comparisons for Monte Carlo histograms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
}

fn p_value(statistic: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(dist.sf(statistic))
}

/// Groups consecutive cells (in key order) until each group's weight
/// reaches `min_weight`; a light remainder joins the last group.
fn pool<W: Copy + PartialOrd + std::ops::Add<Output = W> + Default>(
    weights: &[W],
    min_weight: W,
) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    let mut acc = W::default();
    for (i, &w) in weights.iter().enumerate() {
        acc = acc + w;
        if acc >= min_weight {
            groups.push(start..i + 1);
            start = i + 1;
            acc = W::default();
        }
    }
    if start < weights.len() {
        match groups.last_mut() {
            Some(last) => last.end = weights.len(),
            None => groups.push(0..weights.len()),
        }
    }
    groups
}

/// Two-sample chi-square homogeneity test between histograms, pooling
/// adjacent counts until every bin holds at least `min_count` combined
/// observations.
pub fn chi_square_two_sample(
    a: &BTreeMap<usize, u64>,
    b: &BTreeMap<usize, u64>,
    min_count: u64,
) -> Result<ChiSquareTest> {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    if na == 0 || nb == 0 {
        return Err(Error::InvalidArgument("empty histogram".into()));
    }
    let keys: Vec<usize> = a
        .keys()
        .chain(b.keys())
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let oa: Vec<u64> = keys.iter().map(|k| a.get(k).copied().unwrap_or(0)).collect();
    let ob: Vec<u64> = keys.iter().map(|k| b.get(k).copied().unwrap_or(0)).collect();
    let combined: Vec<u64> = oa.iter().zip(&ob).map(|(x, y)| x + y).collect();
    let groups = pool(&combined, min_count.max(1));
    let (ka, kb) = ((nb as f64 / na as f64).sqrt(), (na as f64 / nb as f64).sqrt());
    let statistic: f64 = groups
        .iter()
        .map(|g| {
            let x: u64 = oa[g.clone()].iter().sum();
            let y: u64 = ob[g.clone()].iter().sum();
            let d = ka * x as f64 - kb * y as f64;
            d * d / (x + y) as f64
        })
        .sum();
    let dof = groups.len().saturating_sub(1);
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: p_value(statistic, dof)?,
        bins: groups.len(),
    })
}

/// Goodness-of-fit of a histogram against probabilities `probs[n]`,
/// pooling adjacent cells until each expected count is at least
/// `min_expected`.
pub fn chi_square_goodness_of_fit(
    hist: &BTreeMap<usize, u64>,
    probs: &[f64],
    min_expected: f64,
) -> Result<ChiSquareTest> {
    let total: u64 = hist.values().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("empty histogram".into()));
    }
    if let Some((&k, _)) = hist
        .iter()
        .find(|(&k, &c)| c > 0 && probs.get(k).is_none_or(|&p| p <= 0.0))
    {
        return Err(Error::InvalidInput(format!(
            "observation at count {k} has zero model probability"
        )));
    }
    let expected: Vec<f64> = probs.iter().map(|p| p * total as f64).collect();
    let groups = pool(&expected, min_expected);
    let statistic: f64 = groups
        .iter()
        .map(|g| {
            let e: f64 = expected[g.clone()].iter().sum();
            let o: u64 = g.clone().map(|k| hist.get(&k).copied().unwrap_or(0)).sum();
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = groups.len().saturating_sub(1);
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: p_value(statistic, dof)?,
        bins: groups.len(),
    })
}

/// Total-variation distance `½ Σ |p - q|` between two mass functions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Kolmogorov–Smirnov distance `max |F_p - F_q|` between two mass
/// functions on the same ordered support.
pub fn ks_distance(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let (mut fp, mut fq, mut d) = (0.0, 0.0, 0.0f64);
    for i in 0..n {
        fp += p.get(i).copied().unwrap_or(0.0);
        fq += q.get(i).copied().unwrap_or(0.0);
        d = d.max((fp - fq).abs());
    }
    d
}

/// The 95% two-sided KS acceptance radius `1.36/√n` for one sample of
/// size `n`; `1.63/√n` is the 99% radius.
pub fn ks_band(samples: u64, level: f64) -> f64 {
    let c = if level >= 0.99 { 1.63 } else { 1.36 };
    c / (samples as f64).sqrt()
}
