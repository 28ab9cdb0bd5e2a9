//! Downstream uses of learned ratios.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::data::Point;
use crate::error::{DreError, Result};
use crate::models::RatioModel;
use crate::rng::{self, streams};

/// Anything that yields canonical ratios `(r_1, ..., r_{k-1})` at a point.
pub trait RatioSource {
    /// Number of distributions.
    fn k(&self) -> usize;
    fn ratios_at(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl RatioSource for RatioModel {
    fn k(&self) -> usize {
        self.output_dim() + 1
    }

    fn ratios_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(x)?.into_inner())
    }
}

/// Wrap a closure returning true ratios.
pub struct OracleRatios<F> {
    k: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> OracleRatios<F> {
    pub fn new(k: usize, f: F) -> Self {
        Self { k, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> RatioSource for OracleRatios<F> {
    fn k(&self) -> usize {
        self.k
    }

    fn ratios_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = (self.f)(x);
        if r.len() + 1 != self.k {
            return Err(DreError::DimensionMismatch { expected: self.k - 1, got: r.len() });
        }
        Ok(r)
    }
}

/// Zero-based pair `(i, j)`, `i ≠ j`, asking for `p_i / p_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRatioQuery {
    i: usize,
    j: usize,
}

impl PairRatioQuery {
    pub fn new(i: usize, j: usize, k: usize) -> Result<Self> {
        if i == j {
            return Err(DreError::InvalidParameter(format!("pair ({i}, {j}) must name two different distributions")));
        }
        if i >= k || j >= k {
            return Err(DreError::InvalidParameter(format!("pair ({i}, {j}) out of range for k = {k}")));
        }
        Ok(Self { i, j })
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }
}

fn full(r: &[f64], i: usize) -> f64 {
    if i == r.len() {
        1.0
    } else {
        r[i]
    }
}

/// `r̂_i(x) / r̂_j(x)` with `r̂_k ≡ 1`.
pub fn pairwise_ratio(source: &impl RatioSource, x: &[f64], q: PairRatioQuery) -> Result<f64> {
    PairRatioQuery::new(q.i, q.j, source.k())?;
    let r = source.ratios_at(x)?;
    Ok(full(&r, q.i) / full(&r, q.j))
}

/// Largest ratio kept by the clipped MAE diagnostic.
pub const MAE_CLIP: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    /// Headline: unclipped pairwise MAE.
    pub mae: f64,
    /// Same, with both ratios clipped at [`MAE_CLIP`].
    pub clipped_mae: f64,
    /// Same, on `|log truth - log estimate|`.
    pub log_mae: f64,
    pub n_points: usize,
}

/// `2/(k(k-1)) · mean_x Σ_{i<j} |truth(i, j, x) - r̂_i(x)/r̂_j(x)|`, plus
/// clipped and log-space diagnostics.
pub fn mae_report(
    source: &impl RatioSource,
    truth: impl Fn(usize, usize, &[f64]) -> f64,
    eval_points: &[Point],
) -> Result<MaeReport> {
    if eval_points.is_empty() {
        return Err(DreError::EmptySamples("no evaluation points for MAE".into()));
    }
    let k = source.k();
    let pairs = (k * (k - 1) / 2) as f64;
    let (mut abs, mut clip, mut log) = (0.0, 0.0, 0.0);
    for x in eval_points {
        let r = source.ratios_at(x)?;
        for i in 0..k {
            for j in i + 1..k {
                let t = truth(i, j, x);
                let e = full(&r, i) / full(&r, j);
                abs += (t - e).abs();
                clip += (t.min(MAE_CLIP) - e.min(MAE_CLIP)).abs();
                log += (t.ln() - e.ln()).abs();
            }
        }
    }
    let n = eval_points.len() as f64;
    Ok(MaeReport { mae: abs / pairs / n, clipped_mae: clip / pairs / n, log_mae: log / pairs / n, n_points: eval_points.len() })
}

/// Headline pairwise MAE.
pub fn mae(source: &impl RatioSource, truth: impl Fn(usize, usize, &[f64]) -> f64, eval_points: &[Point]) -> Result<f64> {
    Ok(mae_report(source, truth, eval_points)?.mae)
}

/// Mixture weights over proposals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisWeights(Vec<f64>);

impl MisWeights {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() || omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DreError::InvalidParameter("MIS weights must be nonempty and nonnegative".into()));
        }
        let s: f64 = omega.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(DreError::InvalidParameter(format!("MIS weights sum to {s}, not 1")));
        }
        Ok(Self(omega))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Plain importance sampling: `mean_x w(x) φ(x)` over proposal samples.
pub fn importance_estimate(ratio: impl Fn(&Point) -> f64, phi: impl Fn(&Point) -> f64, samples: &[Point]) -> Result<f64> {
    if samples.is_empty() {
        return Err(DreError::EmptySamples("proposal has no samples".into()));
    }
    Ok(samples.iter().map(|x| ratio(x) * phi(x)).sum::<f64>() / samples.len() as f64)
}

/// Multiple importance sampling `Σ_i ω_i · mean_{x ~ p_i} (q/p_i)(x) φ(x)`.
/// Proposals with zero weight are skipped, so a point mass reproduces
/// [`importance_estimate`] exactly.
pub fn mis_estimate<R: Fn(&Point) -> f64>(
    ratio_fns: &[R],
    weights: &MisWeights,
    phi: impl Fn(&Point) -> f64,
    proposal_samples: &[Vec<Point>],
) -> Result<f64> {
    let n = weights.values().len();
    if ratio_fns.len() != n || proposal_samples.len() != n {
        return Err(DreError::DimensionMismatch { expected: n, got: ratio_fns.len().min(proposal_samples.len()) });
    }
    if let Some(i) = proposal_samples.iter().position(Vec::is_empty) {
        return Err(DreError::EmptySamples(format!("proposal {} has no samples", i + 1)));
    }
    let mut total = 0.0;
    for ((w, f), xs) in weights.values().iter().zip(ratio_fns).zip(proposal_samples) {
        if *w > 0.0 {
            total += w * importance_estimate(f, &phi, xs)?;
        }
    }
    Ok(total)
}

/// Standard error of [`mis_estimate`] from the per-proposal sample variances.
pub fn mis_standard_error<R: Fn(&Point) -> f64>(
    ratio_fns: &[R],
    weights: &MisWeights,
    phi: impl Fn(&Point) -> f64,
    proposal_samples: &[Vec<Point>],
) -> Result<f64> {
    let mut var = 0.0;
    for ((w, f), xs) in weights.values().iter().zip(ratio_fns).zip(proposal_samples) {
        if *w > 0.0 {
            let vals: Vec<f64> = xs.iter().map(|x| f(x) * phi(x)).collect();
            let (_, se) = crate::theory::mean_and_se(&vals);
            var += w * w * se * se;
        }
    }
    Ok(var.sqrt())
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(DreError::EmptySamples("no resampling weights".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(DreError::InvalidParameter("resampling weights must be finite and nonnegative".into()));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(DreError::InvalidParameter("all resampling weights are zero".into()));
    }
    Ok(())
}

/// Draw `m` indices with replacement, proportional to `weights`.
pub fn sir_resample(weights: &[f64], m: usize, seed: u64) -> Result<Vec<usize>> {
    check_weights(weights)?;
    let dist = WeightedIndex::new(weights).map_err(|e| DreError::InvalidParameter(e.to_string()))?;
    let mut rng = rng::stream(seed, streams::RESAMPLE);
    Ok((0..m).map(|_| dist.sample(&mut rng)).collect())
}

/// `Σ w / max w`.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    check_weights(weights)?;
    let max = weights.iter().cloned().fold(0.0, f64::max);
    Ok(weights.iter().sum::<f64>() / max)
}

/// Area under the ROC curve via the Mann–Whitney statistic with average
/// ranks for ties; `labels[i] = true` marks a positive.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(DreError::DimensionMismatch { expected: scores.len(), got: labels.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(DreError::InvalidParameter("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(DreError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) share their average.
        let avg = (start + 1 + end) as f64 / 2.0;
        rank_sum_pos += avg * order[start..end].iter().filter(|&&i| labels[i]).count() as f64;
        start = end;
    }
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// AUROC from weighted, pre-binned scores: `cells[c] = (score, positive
/// mass, negative mass)`. Used for exact oracle values on a grid.
pub fn weighted_auroc(cells: &[(f64, f64, f64)]) -> f64 {
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| cells[a].0.total_cmp(&cells[b].0));
    let total_pos: f64 = cells.iter().map(|c| c.1).sum();
    let total_neg: f64 = cells.iter().map(|c| c.2).sum();
    let mut neg_below = 0.0;
    let mut acc = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && cells[order[end]].0 == cells[order[start]].0 {
            end += 1;
        }
        let pos: f64 = order[start..end].iter().map(|&c| cells[c].1).sum();
        let neg: f64 = order[start..end].iter().map(|&c| cells[c].2).sum();
        acc += pos * (neg_below + 0.5 * neg);
        neg_below += neg;
        start = end;
    }
    acc / (total_pos * total_neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_model, FeatureMap, ModelSpec};

    #[test]
    fn pairwise_basics() {
        let unit = init_model(&ModelSpec::log_linear(FeatureMap::Identity { dim: 1 }, 2), 0).unwrap();
        let q = PairRatioQuery::new(0, 2, 3).unwrap();
        assert_eq!(pairwise_ratio(&unit, &[0.3], q).unwrap(), 1.0);
        assert!(PairRatioQuery::new(1, 1, 3).is_err());
        let oracle = OracleRatios::new(3, |x: &[f64]| vec![2.0 + x[0], 0.5]);
        let q = PairRatioQuery::new(0, 2, 3).unwrap();
        assert_eq!(pairwise_ratio(&oracle, &[1.0], q).unwrap(), 3.0);
        let ij = pairwise_ratio(&oracle, &[1.0], PairRatioQuery::new(0, 1, 3).unwrap()).unwrap();
        let jl = pairwise_ratio(&oracle, &[1.0], PairRatioQuery::new(1, 2, 3).unwrap()).unwrap();
        assert_eq!(ij * jl, 3.0);
    }

    #[test]
    fn mae_examples() {
        let unit = init_model(&ModelSpec::log_linear(FeatureMap::Identity { dim: 1 }, 1), 0).unwrap();
        let pts: Vec<Point> = (0..5).map(|i| vec![i as f64]).collect();
        assert_eq!(mae(&unit, |_, _, _| 2.0, &pts).unwrap(), 1.0);
        assert_eq!(mae(&unit, |_, _, _| 1.0, &pts).unwrap(), 0.0);
        let rep = mae_report(&unit, |_, _, _| 100.0, &pts).unwrap();
        assert_eq!(rep.mae, 99.0);
        assert_eq!(rep.clipped_mae, 49.0);
        assert!((rep.log_mae - 100f64.ln()).abs() < 1e-14);
        assert!(mae(&unit, |_, _, _| 1.0, &[]).is_err());
    }

    #[test]
    fn mis_reductions() {
        let xs: Vec<Point> = (0..10).map(|i| vec![i as f64]).collect();
        let ones = [|_: &Point| 1.0, |_: &Point| 1.0];
        let est = mis_estimate(&ones, &MisWeights::uniform(2), |_| 3.5, &[xs.clone(), xs.clone()]).unwrap();
        assert!((est - 3.5).abs() < 1e-15);
        let fns = [|x: &Point| 1.0 + x[0], |x: &Point| 2.0 * x[0]];
        let single = importance_estimate(fns[1], |x| x[0], &xs).unwrap();
        let mass = MisWeights::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(mis_estimate(&fns, &mass, |x| x[0], &[xs.clone(), xs.clone()]).unwrap(), single);
        assert!(mis_estimate(&fns, &mass, |x| x[0], &[xs, vec![]]).is_err());
        assert!(MisWeights::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn sir_examples() {
        let idx = sir_resample(&[0.0, 2.5, 0.0], 100, 1).unwrap();
        assert!(idx.iter().all(|&i| i == 1));
        assert!(sir_resample(&[0.0, 0.0], 5, 1).is_err());
        assert!(sir_resample(&[], 5, 1).is_err());
        let idx = sir_resample(&[1.0, 3.0], 10_000, 2).unwrap();
        let f = idx.iter().filter(|&&i| i == 1).count() as f64 / 1e4;
        assert!((f - 0.75).abs() <= 3.0 * (0.75f64 * 0.25 / 1e4).sqrt());
        assert_eq!(sir_resample(&[1.0, 3.0], 50, 9).unwrap(), sir_resample(&[1.0, 3.0], 50, 9).unwrap());
        assert_eq!(effective_sample_size(&[1.0, 3.0]).unwrap(), 4.0 / 3.0);
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert!(matches!(auroc(&[0.1, 0.2], &[true, true]), Err(DreError::SingleClass)));
        let cells = [(0.1, 0.0, 1.0), (0.4, 0.0, 1.0), (0.35, 1.0, 0.0), (0.8, 1.0, 0.0)];
        assert_eq!(weighted_auroc(&cells), 0.75);
    }
}
