//! Seeded generators for copulas, the additive bivariate gamma and
//! mixtures of copulas with gamma (or gamma-GLM) margins.
//!
//! Every public sampler derives its generator from `(seed, stream)` with
//! [`stream_rng`], so repetition `r` of a study can be regenerated on its own.

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaSpec, FamilyTag};
use crate::data::{Column, Dataset};
use crate::optim::solve_increasing;
use crate::special::{gamma_quantile, normal_cdf, t_cdf};
use crate::{Error, Result};

/// Independent generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` draws from the copula, deterministic in `seed`.
pub fn sample_copula(spec: &CopulaSpec, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let mut rng = stream_rng(seed, 0);
    Ok(sample_copula_with(spec, n, &mut rng))
}

/// As [`sample_copula`] but drawing from a caller-supplied generator.
/// The spec must already be valid.
pub fn sample_copula_with<R: Rng + ?Sized>(spec: &CopulaSpec, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let base = CopulaSpec {
        family: crate::copula::CopulaFamily::new(spec.family.tag, false),
        params: spec.params,
    };
    let rho = spec.theta();
    let mut out = Vec::with_capacity(n);
    match spec.family.tag {
        FamilyTag::Gaussian => {
            let s = (1.0 - rho * rho).max(0.0).sqrt();
            for _ in 0..n {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                out.push((normal_cdf(z1), normal_cdf(rho * z1 + s * z2)));
            }
        }
        FamilyTag::StudentT => {
            let df = spec.df().unwrap_or(f64::INFINITY);
            let chi = ChiSquared::new(df).expect("validated degrees of freedom");
            let s = (1.0 - rho * rho).max(0.0).sqrt();
            for _ in 0..n {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let w = (chi.sample(rng) / df).sqrt();
                out.push((t_cdf(z1 / w, df), t_cdf((rho * z1 + s * z2) / w, df)));
            }
        }
        _ => {
            for _ in 0..n {
                let u: f64 = rng.sample(Open01);
                let p: f64 = rng.sample(Open01);
                out.push((u, invert_h(&base, u, p)));
            }
        }
    }
    if spec.family.rotated180 {
        for pair in &mut out {
            *pair = (1.0 - pair.0, 1.0 - pair.1);
        }
    }
    out
}

/// Solves `h(v | u) = p` for `v`; `h` is increasing in `v` with derivative
/// the copula density.
fn invert_h(spec: &CopulaSpec, u: f64, p: f64) -> f64 {
    solve_increasing(
        |v| {
            let f = spec.h_unchecked(u, v) - p;
            let d = spec.log_density_unchecked(u, v).exp();
            (f, d)
        },
        0.0,
        1.0,
        p,
        1e-12,
        200,
    )
}

/// Shapes and common rate of `(X₁ + X₃, X₂ + X₃)` with `Xᵢ ~ Gamma(αᵢ, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivGammaParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub beta: f64,
}

impl BivGammaParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha1, self.alpha2, self.alpha3, self.beta];
        if all.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(())
        } else {
            Err(Error::ParameterDomain(format!(
                "bivariate gamma shapes and rate must be positive, got {self:?}"
            )))
        }
    }

    /// Pearson correlation `α₃ / √((α₁+α₃)(α₂+α₃))`.
    pub fn correlation(&self) -> f64 {
        self.alpha3 / ((self.alpha1 + self.alpha3) * (self.alpha2 + self.alpha3)).sqrt()
    }
}

pub fn sample_bivariate_gamma(p: &BivGammaParams, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    p.validate()?;
    let scale = 1.0 / p.beta;
    let g1 = Gamma::new(p.alpha1, scale).map_err(|e| Error::ParameterDomain(e.to_string()))?;
    let g2 = Gamma::new(p.alpha2, scale).map_err(|e| Error::ParameterDomain(e.to_string()))?;
    let g3 = Gamma::new(p.alpha3, scale).map_err(|e| Error::ParameterDomain(e.to_string()))?;
    let mut rng = stream_rng(seed, 0);
    Ok((0..n)
        .map(|_| {
            let x1 = g1.sample(&mut rng);
            let x2 = g2.sample(&mut rng);
            let x3 = g3.sample(&mut rng);
            (x1 + x3, x2 + x3)
        })
        .collect())
}

/// A gamma margin, either fixed or with log-linear mean in covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalSpec {
    Gamma { shape: f64, rate: f64 },
    /// `μᵢ = exp(β₀ + β·xᵢ)`, rate `shape / μᵢ`.
    GammaGlm { coefficients: Vec<f64>, shape: f64 },
}

impl MarginalSpec {
    pub fn gamma(shape: f64, rate: f64) -> Self {
        Self::Gamma { shape, rate }
    }

    fn validate(&self, n_covariates: usize) -> Result<()> {
        let ok = match self {
            Self::Gamma { shape, rate } => *shape > 0.0 && *rate > 0.0 && shape.is_finite() && rate.is_finite(),
            Self::GammaGlm { coefficients, shape } => {
                *shape > 0.0 && shape.is_finite() && coefficients.len() == n_covariates + 1
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ParameterDomain(format!(
                "invalid marginal {self:?} for {n_covariates} covariates"
            )))
        }
    }

    /// `(shape, rate)` for a row with covariates `x` (without intercept).
    pub fn shape_rate(&self, x: &[f64]) -> (f64, f64) {
        match self {
            Self::Gamma { shape, rate } => (*shape, *rate),
            Self::GammaGlm { coefficients, shape } => {
                let eta = coefficients[0] + coefficients[1..].iter().zip(x).map(|(b, x)| b * x).sum::<f64>();
                (*shape, shape / eta.exp())
            }
        }
    }

    pub fn quantile(&self, p: f64, x: &[f64]) -> f64 {
        let (shape, rate) = self.shape_rate(x);
        gamma_quantile(p, shape, rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub copula: CopulaSpec,
    pub weight: f64,
    pub margin1: MarginalSpec,
    pub margin2: MarginalSpec,
}

/// A finite mixture of copulas with parametric margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSimSpec {
    pub components: Vec<MixtureComponent>,
    pub n: usize,
    pub seed: u64,
    /// Number of standard normal covariates drawn per row (named `x1`, `x2`, …).
    #[serde(default)]
    pub n_covariates: usize,
}

impl MixtureSimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Argument("mixture needs at least one component".into()));
        }
        if self.n == 0 {
            return Err(Error::Argument("sample size must be at least 1".into()));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 || self.components.iter().any(|c| !(c.weight >= 0.0)) {
            return Err(Error::ParameterDomain(format!(
                "mixing weights must be non-negative and sum to 1, got {total}"
            )));
        }
        for c in &self.components {
            c.copula.validate()?;
            c.margin1.validate(self.n_covariates)?;
            c.margin2.validate(self.n_covariates)?;
        }
        Ok(())
    }
}

/// Splits `n` into counts proportional to `weights`, rounding by largest
/// remainder so the counts sum to `n` exactly.
pub fn largest_remainder_counts(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // Stable sort keeps ties in component order.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra)
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Draws a labelled dataset from a mixture specification.
///
/// Component `k` contributes a contiguous block of rows labelled `k`. Copula
/// draws come from stream 0 of the seed, component by component, so a
/// single-component spec reproduces [`sample_copula`] exactly; covariates
/// come from stream 1.
pub fn compose_dataset(spec: &MixtureSimSpec) -> Result<Dataset> {
    spec.validate()?;
    let weights: Vec<f64> = spec.components.iter().map(|c| c.weight).collect();
    let counts = largest_remainder_counts(&weights, spec.n);

    let mut cov_rng = stream_rng(spec.seed, 1);
    let covariates: Vec<Vec<f64>> = (0..spec.n_covariates)
        .map(|_| (0..spec.n).map(|_| cov_rng.sample(StandardNormal)).collect())
        .collect();

    let mut rng = stream_rng(spec.seed, 0);
    let mut data = Dataset {
        y1: Vec::with_capacity(spec.n),
        y2: Vec::with_capacity(spec.n),
        covariates: Vec::new(),
        labels: Some(Vec::with_capacity(spec.n)),
    };
    let mut row = 0;
    let mut x = vec![0.0; spec.n_covariates];
    for (k, (comp, &count)) in spec.components.iter().zip(&counts).enumerate() {
        let uv = sample_copula_with(&comp.copula, count, &mut rng);
        for (u, v) in uv {
            for (j, col) in covariates.iter().enumerate() {
                x[j] = col[row];
            }
            data.y1.push(comp.margin1.quantile(u, &x));
            data.y2.push(comp.margin2.quantile(v, &x));
            if let Some(l) = data.labels.as_mut() {
                l.push(k);
            }
            row += 1;
        }
    }
    data.covariates = covariates
        .into_iter()
        .enumerate()
        .map(|(j, values)| Column {
            name: format!("x{}", j + 1),
            values,
        })
        .collect();
    Ok(data)
}
