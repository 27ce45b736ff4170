//! Copula and marginal estimation: maximum pseudo-likelihood, inference
//! functions for margins with gamma GLM marginals, and information criteria.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::copula::{CopulaFamily, CopulaParams, CopulaSpec, FamilyTag, TdcPair};
use crate::copula::elliptical::{gaussian_ln_pdf_q, t_ln_norm2, t_ln_pdf_q};
use crate::empirical::PseudoSample;
use crate::optim::{minimize_bounded, minimize_scan, solve_increasing};
use crate::special::{gamma_cdf, gamma_ln_pdf, normal_quantile, t_ln_norm, t_quantile};
use crate::{Error, Result};

/// Smallest sample accepted by the copula estimators.
pub const MIN_FIT_N: usize = 16;

/// Pseudo-observations are clamped to `[CLAMP, 1 − CLAMP]` before any
/// density evaluation.
pub const CLAMP: f64 = 1e-12;

/// One fitted copula, or a whole fitted model, with its information criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub spec: CopulaSpec,
    pub loglik: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub aic: f64,
    pub bic: f64,
    pub tdc: TdcPair,
    pub converged: bool,
    /// The estimate sits on the edge of the search range.
    pub at_boundary: bool,
}

impl FitRecord {
    /// Record for a copula-only fit; the parameter count is the family's.
    pub fn copula(spec: CopulaSpec, loglik: f64, n_obs: usize, converged: bool, at_boundary: bool) -> Self {
        let p = spec.n_params();
        assert!(p == 1 || (p == 2 && spec.family.tag == FamilyTag::StudentT));
        Self::with_params(spec, loglik, p, n_obs, converged, at_boundary)
    }

    /// Record whose likelihood also covers `n_params − copula params` other
    /// parameters (marginals, mixing weights).
    pub fn with_params(
        spec: CopulaSpec,
        loglik: f64,
        n_params: usize,
        n_obs: usize,
        converged: bool,
        at_boundary: bool,
    ) -> Self {
        let (aic, bic) = information_criteria(loglik, n_params, n_obs);
        Self {
            spec,
            loglik,
            n_params,
            n_obs,
            aic,
            bic,
            tdc: spec.tdc_unchecked(),
            converged,
            at_boundary,
        }
    }
}

/// `(AIC, BIC) = (−2ℓ + 2p, −2ℓ + p ln N)`.
pub fn information_criteria(loglik: f64, n_params: usize, n_obs: usize) -> (f64, f64) {
    let p = n_params as f64;
    (-2.0 * loglik + 2.0 * p, -2.0 * loglik + p * (n_obs as f64).ln())
}

// ------------------------------------------------------------- gamma GLM

/// Gamma regression with log link: `μᵢ = exp(xᵢᵀβ)`, shape `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaGlmFit {
    pub coefficients: Vec<f64>,
    pub shape: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GammaGlmFit {
    pub fn mean(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(b, x)| b * x).sum::<f64>().exp()
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len() + 1
    }

    /// `(shape, rate)` at design row `x`.
    pub fn shape_rate(&self, x: &[f64]) -> (f64, f64) {
        (self.shape, self.shape / self.mean(x))
    }

    pub fn cdf(&self, y: f64, x: &[f64]) -> f64 {
        let (a, r) = self.shape_rate(x);
        gamma_cdf(y, a, r)
    }

    pub fn ln_pdf(&self, y: f64, x: &[f64]) -> f64 {
        let (a, r) = self.shape_rate(x);
        gamma_ln_pdf(y, a, r)
    }
}

fn check_design(y: &[f64], x: &[Vec<f64>]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Design(format!("{} design rows for {} responses", x.len(), y.len())));
    }
    let p = x.first().map_or(0, Vec::len);
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::Design("design rows must share a positive width".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Design("non-finite design entry".into()));
    }
    if let Some(bad) = y.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("gamma responses must be positive, found {bad}")));
    }
    Ok(p)
}

/// Unweighted gamma GLM fit.
pub fn fit_gamma_glm(y: &[f64], x: &[Vec<f64>]) -> Result<GammaGlmFit> {
    fit_gamma_glm_weighted(y, x, None, None)
}

/// Weighted gamma GLM by iteratively reweighted least squares for `β`
/// (whose estimate does not depend on the shape), then the shape from its
/// score equation `ln γ − ψ(γ) = Σwᵢ(yᵢ/μᵢ − ln(yᵢ/μᵢ) − 1) / Σwᵢ`.
pub fn fit_gamma_glm_weighted(
    y: &[f64],
    x: &[Vec<f64>],
    weights: Option<&[f64]>,
    start: Option<&[f64]>,
) -> Result<GammaGlmFit> {
    let p = check_design(y, x)?;
    let n = y.len();
    let ones;
    let w = match weights {
        Some(w) => {
            if w.len() != n || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Argument("weights must be finite, non-negative and one per row".into()));
            }
            w
        }
        None => {
            ones = vec![1.0; n];
            &ones
        }
    };
    let wsum: f64 = w.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::Argument("all weights are zero".into()));
    }

    let xm = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    check_rank(&xm, w)?;

    let mut beta = match start {
        Some(b) if b.len() == p && b.iter().all(|v| v.is_finite()) => DVector::from_column_slice(b),
        _ => {
            let mut b = DVector::zeros(p);
            b[0] = (y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / wsum).ln();
            b
        }
    };
    let deviance = |beta: &DVector<f64>| -> f64 {
        let eta = &xm * beta;
        (0..n)
            .map(|i| {
                let r = y[i] / eta[i].exp();
                w[i] * (r - r.ln() - 1.0)
            })
            .sum()
    };

    let mut dev = deviance(&beta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 100 {
        iterations += 1;
        let eta = &xm * &beta;
        // Working response for the log link with gamma variance μ².
        let z = DVector::from_fn(n, |i, _| eta[i] + y[i] / eta[i].exp() - 1.0);
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtwz = DVector::<f64>::zeros(p);
        for i in 0..n {
            if w[i] == 0.0 {
                continue;
            }
            for a in 0..p {
                let wa = w[i] * x[i][a];
                xtwz[a] += wa * z[i];
                for b in 0..=a {
                    xtwx[(a, b)] += wa * x[i][b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[(b, a)] = xtwx[(a, b)];
            }
        }
        let chol = xtwx
            .cholesky()
            .ok_or_else(|| Error::Design("weighted normal equations are singular".into()))?;
        let target = chol.solve(&xtwz);
        let step = &target - &beta;
        // Step halving keeps the deviance non-increasing.
        let mut scale = 1.0;
        let mut next = &beta + &step * scale;
        let mut next_dev = deviance(&next);
        while !(next_dev <= dev * (1.0 + 1e-15)) && scale > 1e-6 {
            scale *= 0.5;
            next = &beta + &step * scale;
            next_dev = deviance(&next);
        }
        if !(next_dev <= dev * (1.0 + 1e-15)) {
            converged = true;
            break;
        }
        let change = (dev - next_dev).abs() / (next_dev.abs() + 0.1 * wsum);
        beta = next;
        dev = next_dev;
        if change < 1e-13 || step.amax() * scale < 1e-12 {
            converged = true;
            break;
        }
    }

    let mean_dev = dev / wsum;
    let shape = solve_shape(mean_dev);
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let mut fit = GammaGlmFit {
        coefficients,
        shape,
        loglik: 0.0,
        iterations,
        converged,
    };
    fit.loglik = (0..n).map(|i| w[i] * fit.ln_pdf(y[i], &x[i])).sum();
    Ok(fit)
}

fn check_rank(x: &DMatrix<f64>, w: &[f64]) -> Result<()> {
    let mut xw = x.clone();
    for (i, wi) in w.iter().enumerate() {
        let s = wi.sqrt();
        for v in xw.row_mut(i).iter_mut() {
            *v *= s;
        }
    }
    let sv = xw.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= 1e-10 * max || x.ncols() > w.iter().filter(|&&v| v > 0.0).count() {
        return Err(Error::Design("design matrix is rank deficient".into()));
    }
    Ok(())
}

/// Solves `ln γ − ψ(γ) = d` for the gamma shape.
fn solve_shape(d: f64) -> f64 {
    const MAX_SHAPE: f64 = 1e8;
    if !(d > 0.0) {
        return MAX_SHAPE;
    }
    // g(s) = d − (ln γ − ψ(γ)) with γ = eˢ is increasing in s.
    let g = |s: f64| {
        let k = s.exp();
        d - (s - digamma(k))
    };
    let (lo, hi) = (-30.0, MAX_SHAPE.ln());
    if g(hi) < 0.0 {
        return MAX_SHAPE;
    }
    let guess = ((3.0 - d + ((d - 3.0).powi(2) + 24.0 * d).sqrt()) / (12.0 * d)).ln();
    solve_increasing(|s| (g(s), 0.0), lo, hi, guess, 1e-13, 400).exp()
}

// --------------------------------------------------------- copula fitting

/// Outcome of maximising a (weighted) copula log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaMle {
    pub spec: CopulaSpec,
    pub loglik: f64,
    pub converged: bool,
    pub at_boundary: bool,
}

/// Search range of a one-parameter family on its optimisation scale.
struct Scale {
    lo: f64,
    hi: f64,
    to_theta: fn(f64) -> f64,
    from_theta: fn(f64) -> f64,
}

fn scale_for(tag: FamilyTag) -> Scale {
    match tag {
        FamilyTag::Joe | FamilyTag::Gumbel => Scale {
            lo: (1e-6f64).ln(),
            hi: 49f64.ln(),
            to_theta: |s| 1.0 + s.exp(),
            from_theta: |t| (t - 1.0).max(1e-300).ln(),
        },
        FamilyTag::Clayton => Scale {
            lo: (1e-4f64).ln(),
            hi: 50f64.ln(),
            to_theta: f64::exp,
            from_theta: |t| t.max(1e-300).ln(),
        },
        FamilyTag::Frank => Scale {
            lo: -35.0,
            hi: 35.0,
            to_theta: |s| s,
            from_theta: |t| t,
        },
        FamilyTag::Gaussian | FamilyTag::StudentT => Scale {
            lo: -(0.999f64.atanh()),
            hi: 0.999f64.atanh(),
            to_theta: f64::tanh,
            from_theta: |t| t.clamp(-0.999, 0.999).atanh(),
        },
    }
}

#[inline]
fn clamp_unit(x: f64) -> f64 {
    x.clamp(CLAMP, 1.0 - CLAMP)
}

/// Maximises `Σ wᵢ ln c(uᵢ, vᵢ)` over the family's parameters. `warm`
/// narrows the first search to a neighbourhood of a previous estimate.
pub fn fit_copula_weighted(
    family: CopulaFamily,
    uv: &[(f64, f64)],
    weights: Option<&[f64]>,
    warm: Option<CopulaParams>,
) -> Result<CopulaMle> {
    if let Some(w) = weights {
        if w.len() != uv.len() {
            return Err(Error::Argument("one weight per observation required".into()));
        }
    }
    let uv: Vec<(f64, f64)> = uv.iter().map(|&(u, v)| (clamp_unit(u), clamp_unit(v))).collect();
    match family.tag {
        FamilyTag::StudentT => Ok(fit_t(family, &uv, weights, warm)),
        FamilyTag::Gaussian => Ok(fit_one_param(family, &uv, weights, warm, true)),
        _ => Ok(fit_one_param(family, &uv, weights, warm, false)),
    }
}

fn weighted_sum(weights: Option<&[f64]>, n: usize, f: impl Fn(usize) -> f64) -> f64 {
    match weights {
        Some(w) => (0..n).filter(|&i| w[i] != 0.0).map(|i| w[i] * f(i)).sum(),
        None => (0..n).map(f).sum(),
    }
}

fn fit_one_param(
    family: CopulaFamily,
    uv: &[(f64, f64)],
    weights: Option<&[f64]>,
    warm: Option<CopulaParams>,
    gaussian: bool,
) -> CopulaMle {
    let sc = scale_for(family.tag);
    let n = uv.len();
    // Normal scores are fixed across θ for the Gaussian copula.
    let scores: Vec<(f64, f64)> = if gaussian {
        uv.iter().map(|&(u, v)| (normal_quantile(u), normal_quantile(v))).collect()
    } else {
        Vec::new()
    };
    let negll = |s: f64| -> f64 {
        let theta = (sc.to_theta)(s);
        let spec = CopulaSpec {
            family,
            params: CopulaParams { theta, df: None },
        };
        let ll = if gaussian {
            weighted_sum(weights, n, |i| gaussian_ln_pdf_q(theta, scores[i].0, scores[i].1))
        } else {
            weighted_sum(weights, n, |i| spec.log_density_unchecked(uv[i].0, uv[i].1))
        };
        if ll.is_nan() {
            f64::INFINITY
        } else {
            -ll
        }
    };
    let tol = 1e-7;
    let mut best = match warm {
        Some(p) if p.theta.is_finite() => {
            let s0 = (sc.from_theta)(p.theta).clamp(sc.lo, sc.hi);
            let (a, b) = ((s0 - 0.5).max(sc.lo), (s0 + 0.5).min(sc.hi));
            let m = minimize_bounded(&negll, a, b, tol, 200);
            let interior = (m.x - a).abs() > 1e-4 || a == sc.lo;
            let interior = interior && ((b - m.x).abs() > 1e-4 || b == sc.hi);
            if interior {
                Some(m)
            } else {
                None
            }
        }
        _ => None,
    };
    if best.is_none() {
        best = Some(minimize_scan(&negll, sc.lo, sc.hi, 41, tol, 200));
    }
    let m = best.expect("search result");
    let theta = (sc.to_theta)(m.x);
    let at_boundary = (m.x - sc.lo).abs() < 1e-3 || (sc.hi - m.x).abs() < 1e-3;
    CopulaMle {
        spec: CopulaSpec {
            family,
            params: CopulaParams { theta, df: None },
        },
        loglik: -m.fx,
        converged: m.converged,
        at_boundary,
    }
}

/// Degrees-of-freedom grid for the t profile likelihood.
pub fn t_df_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (4..=60).map(|i| i as f64 * 0.5).collect();
    g.extend([40.0, 60.0, 120.0]);
    g
}

/// Quantile cache: the distinct pseudo-values of both margins.
struct QuantileTable {
    values: Vec<f64>,
    idx: Vec<(usize, usize)>,
}

impl QuantileTable {
    fn new(uv: &[(f64, f64)]) -> Self {
        let mut values: Vec<f64> = uv.iter().flat_map(|&(u, v)| [u, v]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let pos = |x: f64| values.partition_point(|&y| y < x);
        let idx = uv.iter().map(|&(u, v)| (pos(u), pos(v))).collect();
        Self { values, idx }
    }

    fn t_scores(&self, df: f64) -> Vec<(f64, f64)> {
        let q: Vec<f64> = self.values.iter().map(|&u| t_quantile(u, df)).collect();
        self.idx.iter().map(|&(a, b)| (q[a], q[b])).collect()
    }
}

fn fit_t(family: CopulaFamily, uv: &[(f64, f64)], weights: Option<&[f64]>, warm: Option<CopulaParams>) -> CopulaMle {
    let sc = scale_for(FamilyTag::StudentT);
    let table = QuantileTable::new(uv);
    let n = uv.len();

    // Best ρ (on the atanh scale) and log-likelihood at fixed df.
    let profile = |df: f64, s_hint: Option<f64>| -> (f64, f64, bool) {
        let scores = table.t_scores(df);
        let norm1 = t_ln_norm(df);
        let negll = |s: f64| {
            let rho = s.tanh();
            let norm2 = t_ln_norm2(rho, df);
            let ll = weighted_sum(weights, n, |i| t_ln_pdf_q(rho, df, norm2, norm1, scores[i].0, scores[i].1));
            if ll.is_nan() {
                f64::INFINITY
            } else {
                -ll
            }
        };
        let m = match s_hint {
            Some(s0) => {
                let (a, b) = ((s0 - 0.4).max(sc.lo), (s0 + 0.4).min(sc.hi));
                let m = minimize_bounded(&negll, a, b, 1e-7, 200);
                if (m.x - a).abs() < 1e-4 || (b - m.x).abs() < 1e-4 {
                    minimize_bounded(&negll, sc.lo, sc.hi, 1e-7, 200)
                } else {
                    m
                }
            }
            None => minimize_bounded(&negll, sc.lo, sc.hi, 1e-7, 200),
        };
        (m.x, -m.fx, m.converged)
    };

    let grid = t_df_grid();
    let candidates: Vec<usize> = match warm.and_then(|p| p.df) {
        // Warm start: the grid neighbourhood of the previous df.
        Some(df0) => {
            let c = grid.partition_point(|&g| g < df0);
            (c.saturating_sub(3)..(c + 3).min(grid.len())).collect()
        }
        None => (0..grid.len()).collect(),
    };
    let mut hint = warm.map(|p| (sc.from_theta)(p.theta));
    let mut evals: Vec<(usize, f64, f64, bool)> = Vec::with_capacity(candidates.len());
    for &g in &candidates {
        let (s, ll, conv) = profile(grid[g], hint);
        hint = Some(s);
        evals.push((g, s, ll, conv));
    }
    let best = evals
        .iter()
        .copied()
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .expect("non-empty df grid");
    let (mut best_df, mut best_s, mut best_ll, mut converged) = (grid[best.0], best.1, best.2, best.3);

    // Local refinement of df between the neighbouring grid points.
    let lo = grid[best.0.saturating_sub(1)];
    let hi = grid[(best.0 + 1).min(grid.len() - 1)];
    if hi > lo {
        let mut seen: Vec<(f64, f64, f64, bool)> = Vec::new();
        let m = minimize_bounded(
            |ldf: f64| {
                let df = ldf.exp();
                let (s, ll, conv) = profile(df, Some(best_s));
                seen.push((df, s, ll, conv));
                -ll
            },
            lo.ln(),
            hi.ln(),
            1e-4,
            40,
        );
        if let Some(&(df, s, ll, conv)) = seen.iter().max_by(|a, b| a.2.total_cmp(&b.2)) {
            if ll > best_ll {
                best_df = df;
                best_s = s;
                best_ll = ll;
                converged = conv && m.converged;
            }
        }
    }
    let at_boundary = best_df <= grid[0] * (1.0 + 1e-9)
        || best_df >= grid[grid.len() - 1] * (1.0 - 1e-9)
        || (best_s - sc.lo).abs() < 1e-3
        || (sc.hi - best_s).abs() < 1e-3;
    CopulaMle {
        spec: CopulaSpec {
            family,
            params: CopulaParams {
                theta: best_s.tanh(),
                df: Some(best_df),
            },
        },
        loglik: best_ll,
        converged,
        at_boundary,
    }
}

/// Maximum pseudo-likelihood fit on `rank/(N+1)` pseudo-observations.
pub fn fit_copula_mple(family: CopulaFamily, ps: &PseudoSample) -> Result<FitRecord> {
    if ps.n < MIN_FIT_N {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_N,
            got: ps.n,
        });
    }
    let mle = fit_copula_weighted(family, &ps.pseudo, None, None)?;
    if !mle.loglik.is_finite() {
        return Err(Error::Fit(format!("{family}: non-finite log-likelihood at {}", mle.spec)));
    }
    Ok(FitRecord::copula(mle.spec, mle.loglik, ps.n, mle.converged, mle.at_boundary))
}

/// Fits every family of the pool, in pool order; failures are kept in place.
pub fn fit_pool_mple(pool: &[CopulaFamily], ps: &PseudoSample) -> Vec<Result<FitRecord>> {
    use rayon::prelude::*;
    pool.par_iter().map(|&f| fit_copula_mple(f, ps)).collect()
}

/// Two-stage fit: gamma GLM margins, then the copula at the fitted marginal
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfmFit {
    /// Log-likelihood and criteria cover the copula and both margins.
    pub record: FitRecord,
    pub copula_loglik: f64,
    pub margin1: GammaGlmFit,
    pub margin2: GammaGlmFit,
    /// Marginal probabilities that had to be clamped away from 0 or 1.
    pub clamped: usize,
}

/// Marginal probabilities `(F₁(y₁ᵢ), F₂(y₂ᵢ))`, clamped into the open unit
/// square, and the number of clamped values.
pub fn marginal_probabilities(
    y1: &[f64],
    y2: &[f64],
    x1: &[Vec<f64>],
    x2: &[Vec<f64>],
    m1: &GammaGlmFit,
    m2: &GammaGlmFit,
) -> (Vec<(f64, f64)>, usize) {
    let mut clamped = 0;
    let mut clamp = |p: f64| {
        if !(CLAMP..=1.0 - CLAMP).contains(&p) {
            clamped += 1;
        }
        clamp_unit(p)
    };
    let uv = (0..y1.len())
        .map(|i| (clamp(m1.cdf(y1[i], &x1[i])), clamp(m2.cdf(y2[i], &x2[i]))))
        .collect();
    (uv, clamped)
}

pub fn fit_copula_ifm(
    family: CopulaFamily,
    y1: &[f64],
    y2: &[f64],
    x1: &[Vec<f64>],
    x2: &[Vec<f64>],
) -> Result<IfmFit> {
    if y1.len() != y2.len() {
        return Err(Error::Design("response columns differ in length".into()));
    }
    if y1.len() < MIN_FIT_N {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_N,
            got: y1.len(),
        });
    }
    let margin1 = fit_gamma_glm(y1, x1)?;
    let margin2 = fit_gamma_glm(y2, x2)?;
    let (uv, clamped) = marginal_probabilities(y1, y2, x1, x2, &margin1, &margin2);
    let mle = fit_copula_weighted(family, &uv, None, None)?;
    if !mle.loglik.is_finite() {
        return Err(Error::Fit(format!("{family}: non-finite log-likelihood")));
    }
    let total = mle.loglik + margin1.loglik + margin2.loglik;
    let p = mle.spec.n_params() + margin1.n_params() + margin2.n_params();
    Ok(IfmFit {
        record: FitRecord::with_params(mle.spec, total, p, y1.len(), mle.converged, mle.at_boundary),
        copula_loglik: mle.loglik,
        margin1,
        margin2,
        clamped,
    })
}
