//! BIC-weighted model averaging of tail dependence.
//!
//! Method 1 blends the analytic coefficients of the candidate models.
//! Method 2 simulates a pooled sample with `N·W_k` points from model `k`,
//! re-estimates the coefficients empirically, and repeats.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaSpec, TdcPair};
use crate::empirical::{estimate_all, pseudo_observations, PseudoSample, Tail};
use crate::fitting::FitRecord;
use crate::mixture::{MixtureDesign, MixtureModel};
use crate::sampling::{largest_remainder_counts, sample_copula_with, stream_rng};
use crate::{Error, Result};

/// A candidate model as seen by the averaging step.
pub trait Candidate {
    fn bic(&self) -> f64;
    fn tdc(&self) -> TdcPair;
    fn n_obs(&self) -> usize;
}

impl Candidate for FitRecord {
    fn bic(&self) -> f64 {
        self.bic
    }
    fn tdc(&self) -> TdcPair {
        self.tdc
    }
    fn n_obs(&self) -> usize {
        self.n_obs
    }
}

impl Candidate for MixtureModel {
    fn bic(&self) -> f64 {
        self.bic
    }
    fn tdc(&self) -> TdcPair {
        self.tdc()
    }
    fn n_obs(&self) -> usize {
        self.n_obs
    }
}

/// Weights reported below this are shown as zero.
pub const REPORT_WEIGHT_FLOOR: f64 = 1e-6;

/// Posterior model probabilities under a uniform prior,
/// `W_k ∝ exp(−(BIC_k − min BIC)/2)`.
pub fn bma_weights(bics: &[f64]) -> Result<Vec<f64>> {
    if bics.is_empty() {
        return Err(Error::Argument("at least one BIC is required".into()));
    }
    if let Some(b) = bics.iter().find(|b| !b.is_finite()) {
        return Err(Error::Argument(format!("BIC values must be finite, got {b}")));
    }
    let min = bics.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = bics.iter().map(|b| (-(b - min) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

fn check_same_n<C: Candidate>(fits: &[C]) -> Result<usize> {
    let n = fits
        .first()
        .ok_or_else(|| Error::Argument("no candidate models".into()))?
        .n_obs();
    if fits.iter().any(|f| f.n_obs() != n) {
        return Err(Error::Argument("candidate models were fitted to different sample sizes".into()));
    }
    Ok(n)
}

/// Weighted average of the candidates' coefficients, both tails.
pub fn blend_tdc(tdcs: &[TdcPair], weights: &[f64]) -> TdcPair {
    let mut out = TdcPair::new(0.0, 0.0);
    for (t, w) in tdcs.iter().zip(weights) {
        out.lower += w * t.lower;
        out.upper += w * t.upper;
    }
    // Keep the blend inside the hull of its inputs despite rounding.
    let hull = |f: fn(&TdcPair) -> f64, x: f64| {
        let lo = tdcs.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = tdcs.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        x.clamp(lo, hi)
    };
    TdcPair::new(hull(|t| t.lower, out.lower), hull(|t| t.upper, out.upper))
}

/// Method 1: `λ̂ = Σ W_k λ̂_k` with BIC weights.
pub fn tdc_method1<C: Candidate>(fits: &[C]) -> Result<TdcPair> {
    Ok(BmaEnsemble::new(fits)?.blended)
}

/// Candidates, their weights and the Method 1 blend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmaEnsemble {
    pub bics: Vec<f64>,
    pub tdcs: Vec<TdcPair>,
    pub weights: Vec<f64>,
    pub blended: TdcPair,
    pub n_obs: usize,
}

impl BmaEnsemble {
    pub fn new<C: Candidate>(fits: &[C]) -> Result<Self> {
        let n_obs = check_same_n(fits)?;
        let bics: Vec<f64> = fits.iter().map(Candidate::bic).collect();
        let tdcs: Vec<TdcPair> = fits.iter().map(Candidate::tdc).collect();
        let weights = bma_weights(&bics)?;
        let blended = blend_tdc(&tdcs, &weights);
        Ok(Self {
            bics,
            tdcs,
            weights,
            blended,
            n_obs,
        })
    }

    /// Index of the largest weight (lowest BIC), first on ties.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (k, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = k;
            }
        }
        best
    }
}

/// A fitted model that can generate new samples.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Copula(CopulaSpec),
    /// Mixtures draw on the data scale, resampling covariate rows.
    Mixture(Box<MixtureModel>, Arc<MixtureDesign>),
}

impl FittedModel {
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
        match self {
            Self::Copula(spec) => sample_copula_with(spec, n, rng),
            Self::Mixture(model, design) => model.simulate_with(design, n, rng),
        }
    }
}

impl From<CopulaSpec> for FittedModel {
    fn from(spec: CopulaSpec) -> Self {
        Self::Copula(spec)
    }
}

/// One pooled sample of size `n`: `n_k` points from model `k` by
/// largest-remainder rounding of `n·W_k`, in model order.
///
/// Model `k` draws from sub-stream `k` of a seed taken from `rng`, so blends
/// of the same model list under different weights share random numbers: a
/// one-hot weight vector reproduces that model's share of any blend.
pub fn blend_sample<R: Rng + ?Sized>(models: &[FittedModel], weights: &[f64], n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let counts = largest_remainder_counts(weights, n);
    let base: u64 = rng.random();
    let mut out = Vec::with_capacity(n);
    for (k, (m, &c)) in models.iter().zip(&counts).enumerate() {
        if c > 0 {
            out.extend(m.simulate(c, &mut stream_rng(base, k as u64)));
        }
    }
    out
}

/// Mean and standard deviation of one estimator on one tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: u8,
    pub tail: Tail,
    pub mean: f64,
    pub sd: f64,
}

/// Distances between a simulated sample and the source data, both on
/// pseudo-observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub wasserstein: f64,
    pub l2_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method2Result {
    pub reps: usize,
    pub n: usize,
    pub counts: Vec<usize>,
    /// Ordered by estimator, then lower before upper.
    pub estimates: Vec<EstimatorSummary>,
    /// First replicate against the source.
    pub distances: Option<Distances>,
    /// Mean over the first [`DISTANCE_REPS`] replicates.
    pub mean_distances: Option<Distances>,
}

impl Method2Result {
    pub fn mean(&self, estimator: u8, tail: Tail) -> Option<f64> {
        self.summary(estimator, tail).map(|s| s.mean)
    }

    pub fn summary(&self, estimator: u8, tail: Tail) -> Option<EstimatorSummary> {
        self.estimates
            .iter()
            .copied()
            .find(|s| s.estimator == estimator && s.tail == tail)
    }
}

/// Replicates whose distances enter [`Method2Result::mean_distances`].
pub const DISTANCE_REPS: usize = 10;

/// Method 2. Repetition `r` draws from stream `r` of `seed`.
pub fn tdc_method2(
    models: &[FittedModel],
    weights: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
    source: Option<&PseudoSample>,
) -> Result<Method2Result> {
    if reps == 0 {
        return Err(Error::Argument("reps must be at least 1".into()));
    }
    if models.len() != weights.len() || models.is_empty() {
        return Err(Error::Argument("one weight per model required".into()));
    }
    if let Some(ps) = source {
        if ps.n != n {
            return Err(Error::Argument(format!("source has {} points, blend has {n}", ps.n)));
        }
    }
    let per_rep: Vec<Result<(Vec<f64>, Option<Distances>)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let sample = blend_sample(models, weights, n, &mut rng);
            let ps = pseudo_observations(&sample)?;
            let est: Vec<f64> = estimate_all(&ps)?.iter().map(|e| e.value).collect();
            let dist = match source {
                Some(src) if r < DISTANCE_REPS => Some(distances(&ps, src)?),
                _ => None,
            };
            Ok((est, dist))
        })
        .collect();
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;

    let n_stats = per_rep[0].0.len();
    let mut estimates = Vec::with_capacity(n_stats);
    for s in 0..n_stats {
        let xs: Vec<f64> = per_rep.iter().map(|(e, _)| e[s]).collect();
        let (mean, sd) = mean_sd(&xs);
        estimates.push(EstimatorSummary {
            estimator: (s / 2 + 1) as u8,
            tail: if s % 2 == 0 { Tail::Lower } else { Tail::Upper },
            mean,
            sd,
        });
    }
    let ds: Vec<Distances> = per_rep.iter().filter_map(|(_, d)| *d).collect();
    let mean_distances = (!ds.is_empty()).then(|| Distances {
        wasserstein: ds.iter().map(|d| d.wasserstein).sum::<f64>() / ds.len() as f64,
        l2_star: ds.iter().map(|d| d.l2_star).sum::<f64>() / ds.len() as f64,
    });
    Ok(Method2Result {
        reps,
        n,
        counts: largest_remainder_counts(weights, n),
        estimates,
        distances: ds.first().copied(),
        mean_distances,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Both distances between two pseudo-samples of equal size.
pub fn distances(a: &PseudoSample, b: &PseudoSample) -> Result<Distances> {
    Ok(Distances {
        wasserstein: wasserstein_distance(&a.pseudo, &b.pseudo)?,
        l2_star: l2_star_distance(a, b)?,
    })
}

/// Largest point set solved exactly; bigger sets use the sliced distance.
pub const EXACT_WASSERSTEIN_MAX: usize = 4096;
const SLICES: usize = 128;

/// Order-1 Wasserstein distance between two equal-size point clouds with
/// Euclidean ground cost: the mean matched distance of an optimal
/// assignment.
pub fn wasserstein_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!("point sets differ in size: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n == 0 {
        return Ok(0.0);
    }
    if n > EXACT_WASSERSTEIN_MAX {
        return Ok(sliced_wasserstein(a, b));
    }
    let mut cost = vec![0.0; n * n];
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let (dx, dy) = (p.0 - q.0, p.1 - q.1);
            cost[i * n + j] = (dx * dx + dy * dy).sqrt();
        }
    }
    let assign = lapjv(n, &cost);
    Ok(assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>() / n as f64)
}

/// Average over fixed directions of the one-dimensional distance between
/// the projected samples.
pub fn sliced_wasserstein(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    const GOLDEN: f64 = 0.618_033_988_749_894_8;
    let n = a.len();
    let mut pa = vec![0.0; n];
    let mut pb = vec![0.0; n];
    let mut total = 0.0;
    for s in 0..SLICES {
        let angle = std::f64::consts::PI * ((s as f64 + 0.5) * GOLDEN).fract();
        let (sn, cs) = angle.sin_cos();
        for (dst, p) in pa.iter_mut().zip(a) {
            *dst = p.0 * cs + p.1 * sn;
        }
        for (dst, p) in pb.iter_mut().zip(b) {
            *dst = p.0 * cs + p.1 * sn;
        }
        pa.sort_by(f64::total_cmp);
        pb.sort_by(f64::total_cmp);
        total += pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
    }
    total / SLICES as f64
}

/// Dense linear assignment by the Jonker–Volgenant method: column
/// reduction with reduction transfer, then shortest augmenting paths.
/// Returns the column assigned to each row.
///
/// The augmenting row reduction phase is left out: on Euclidean costs of
/// point clouds it dominates the run time without shortening the search.
pub fn lapjv(n: usize, cost: &[f64]) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    let c = |i: usize, j: usize| cost[i * n + j];
    let mut x = vec![NONE; n];
    let mut y = vec![NONE; n];
    let mut v = vec![f64::INFINITY; n];

    // Column reduction.
    for i in 0..n {
        for j in 0..n {
            if c(i, j) < v[j] {
                v[j] = c(i, j);
                y[j] = i;
            }
        }
    }
    let mut unique = vec![true; n];
    for j in (0..n).rev() {
        let i = y[j];
        if x[i] == NONE {
            x[i] = j;
        } else {
            unique[i] = false;
            y[j] = NONE;
        }
    }
    let mut free: Vec<usize> = Vec::new();
    for i in 0..n {
        if x[i] == NONE {
            free.push(i);
        } else if unique[i] {
            let j = x[i];
            let min = v
                .iter()
                .enumerate()
                .filter(|&(j2, _)| j2 != j)
                .map(|(j2, &vj)| c(i, j2) - vj)
                .fold(f64::INFINITY, f64::min);
            if min.is_finite() {
                v[j] -= min;
            }
        }
    }

    // Shortest augmenting paths for the rows still free.
    let mut d = vec![0.0; n];
    let mut pred = vec![0usize; n];
    let mut cols: Vec<usize> = (0..n).collect();
    for &start in &free {
        for (k, col) in cols.iter_mut().enumerate() {
            *col = k;
        }
        for j in 0..n {
            d[j] = c(start, j) - v[j];
            pred[j] = start;
        }
        let (mut lo, mut hi) = (0, 0);
        let mut n_ready = 0;
        let mut cur_min = 0.0;
        let mut end = NONE;
        while end == NONE {
            if lo == hi {
                n_ready = lo;
                // Move every column at the current minimum to cols[lo..hi].
                hi = lo + 1;
                let mut mind = d[cols[lo]];
                let scan_from = hi;
                for k in scan_from..n {
                    let j = cols[k];
                    if d[j] <= mind {
                        if d[j] < mind {
                            hi = lo;
                            mind = d[j];
                        }
                        cols[k] = cols[hi];
                        cols[hi] = j;
                        hi += 1;
                    }
                }
                cur_min = mind;
                for &j in &cols[lo..hi] {
                    if y[j] == NONE {
                        end = j;
                    }
                }
            }
            if end == NONE {
                // Scan the ready columns.
                while lo != hi && end == NONE {
                    let j = cols[lo];
                    lo += 1;
                    let i = y[j];
                    let mind = d[j];
                    let h = c(i, j) - v[j] - mind;
                    let mut k = hi;
                    while k < n {
                        let j = cols[k];
                        let red = c(i, j) - v[j] - h;
                        if red < d[j] {
                            d[j] = red;
                            pred[j] = i;
                            if red == mind {
                                if y[j] == NONE {
                                    end = j;
                                    break;
                                }
                                cols[k] = cols[hi];
                                cols[hi] = j;
                                hi += 1;
                            }
                        }
                        k += 1;
                    }
                }
            }
        }
        for &j in &cols[..n_ready] {
            v[j] += d[j] - cur_min;
        }
        let mut j = end;
        loop {
            let i = pred[j];
            y[j] = i;
            std::mem::swap(&mut x[i], &mut j);
            if i == start {
                break;
            }
        }
    }
    x
}

/// `(Σ_{t=0}^{N} (Ĉ₁(t/N, t/N) − Ĉ₂(t/N, t/N))²)^{1/2}` on the diagonal of
/// the two empirical copulas.
pub fn l2_star_distance(a: &PseudoSample, b: &PseudoSample) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::Argument(format!("pseudo-samples differ in size: {} vs {}", a.n, b.n)));
    }
    let n = a.n;
    let diag = |ps: &PseudoSample| {
        let mut m: Vec<f64> = ps.ranks.iter().map(|&(r, s)| r.max(s)).collect();
        m.sort_by(f64::total_cmp);
        m
    };
    let (ma, mb) = (diag(a), diag(b));
    let count = |m: &[f64], t: f64| m.partition_point(|&x| x <= t * (1.0 + 4.0 * f64::EPSILON)) as f64;
    let mut total = 0.0;
    for t in 0..=n {
        let tf = t as f64;
        let diff = (count(&ma, tf) - count(&mb, tf)) / n as f64;
        total += diff * diff;
    }
    Ok(total.sqrt())
}
