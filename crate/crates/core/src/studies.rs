//! Preset simulation designs.
//!
//! 1. Additive bivariate gamma BG(1.5, 1.5, 0.5, 0.1), n = 1500.
//! 2. Equal mix of Joe(1.7), Gumbel(1.5) and survival Clayton(1.3) with
//!    gamma(2, 1) and gamma(3, 1) margins, n = 1500.
//! 3. t copula with ρ = 0.58 and tail dependence 0.23, same margins, n = 2000.
//! 4. Gumbel(2) + Frank(3) mixture of gamma regressions on two standard
//!    normal covariates, n = 1000.

use crate::copula::{CopulaFamily, CopulaSpec};
use crate::copula::elliptical::t_tail;
use crate::data::Dataset;
use crate::sampling::{
    compose_dataset, sample_bivariate_gamma, BivGammaParams, MarginalSpec, MixtureComponent, MixtureSimSpec,
};
use crate::{Error, Result};

pub const STUDY_IDS: [u8; 4] = [1, 2, 3, 4];

pub const STUDY1_PARAMS: BivGammaParams = BivGammaParams {
    alpha1: 1.5,
    alpha2: 1.5,
    alpha3: 0.5,
    beta: 0.1,
};

pub const STUDY3_RHO: f64 = 0.58;
pub const STUDY3_TDC: f64 = 0.23;

/// Default sample size of a study.
pub fn default_size(study: u8) -> Result<usize> {
    match study {
        1 | 2 => Ok(1500),
        3 => Ok(2000),
        4 => Ok(1000),
        _ => Err(Error::Argument(format!("unknown study {study}; expected 1 to 4"))),
    }
}

/// Degrees of freedom giving a t copula with correlation `rho` the tail
/// dependence `lambda`.
pub fn t_df_for_tail(rho: f64, lambda: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.05f64, 1e4f64);
    if !(t_tail(rho, hi) < lambda && lambda < t_tail(rho, lo)) {
        return Err(Error::ParameterDomain(format!(
            "no degrees of freedom give tail dependence {lambda} at ρ = {rho}"
        )));
    }
    // The coefficient decreases in df; bisect on log df.
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if t_tail(rho, mid) > lambda {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// The copula of study 3.
pub fn study3_copula() -> CopulaSpec {
    let df = t_df_for_tail(STUDY3_RHO, STUDY3_TDC).expect("valid preset");
    CopulaSpec::student_t(STUDY3_RHO, df).expect("valid preset")
}

fn equal_weights(components: Vec<(CopulaSpec, MarginalSpec, MarginalSpec)>) -> Vec<MixtureComponent> {
    let g = components.len();
    let mut out: Vec<MixtureComponent> = components
        .into_iter()
        .map(|(copula, margin1, margin2)| MixtureComponent {
            copula,
            weight: 1.0 / g as f64,
            margin1,
            margin2,
        })
        .collect();
    // Make the weights sum to one exactly.
    let head: f64 = out[..g - 1].iter().map(|c| c.weight).sum();
    out[g - 1].weight = 1.0 - head;
    out
}

/// Mixture specification of studies 2 to 4.
pub fn mixture_spec(study: u8, n: usize, seed: u64) -> Result<MixtureSimSpec> {
    let gamma23 = || (MarginalSpec::gamma(2.0, 1.0), MarginalSpec::gamma(3.0, 1.0));
    let (components, n_covariates) = match study {
        2 => {
            let comps = [
                CopulaSpec::one_param(CopulaFamily::JOE, 1.7)?,
                CopulaSpec::one_param(CopulaFamily::GUMBEL, 1.5)?,
                CopulaSpec::one_param(CopulaFamily::SURVIVAL_CLAYTON, 1.3)?,
            ];
            let list = comps
                .into_iter()
                .map(|c| {
                    let (m1, m2) = gamma23();
                    (c, m1, m2)
                })
                .collect();
            (equal_weights(list), 0)
        }
        3 => {
            let (m1, m2) = gamma23();
            (equal_weights(vec![(study3_copula(), m1, m2)]), 0)
        }
        4 => {
            let glm = |b: [f64; 3], shape: f64| MarginalSpec::GammaGlm {
                coefficients: b.to_vec(),
                shape,
            };
            let list = vec![
                (
                    CopulaSpec::one_param(CopulaFamily::GUMBEL, 2.0)?,
                    glm([1.0, 0.1, 0.1], 6.0),
                    glm([2.0, 0.2, 0.2], 3.0),
                ),
                (
                    CopulaSpec::one_param(CopulaFamily::FRANK, 3.0)?,
                    glm([0.8, 0.2, 0.2], 2.0),
                    glm([0.8, 0.2, 0.2], 2.0),
                ),
            ];
            (equal_weights(list), 2)
        }
        _ => {
            return Err(Error::Argument(format!(
                "study {study} has no mixture specification; expected 2 to 4"
            )))
        }
    };
    Ok(MixtureSimSpec {
        components,
        n,
        seed,
        n_covariates,
    })
}

/// Simulates a study. Study 1 carries no labels or covariates.
pub fn simulate_study(study: u8, n: Option<usize>, seed: u64) -> Result<Dataset> {
    let n = match n {
        Some(n) => n,
        None => default_size(study)?,
    };
    match study {
        1 => Ok(Dataset::from_pairs(&sample_bivariate_gamma(&STUDY1_PARAMS, n, seed)?)),
        _ => compose_dataset(&mixture_spec(study, n, seed)?),
    }
}

/// True upper and lower tail dependence of the study's generating model,
/// where it has one in closed form.
pub fn true_tdc(study: u8) -> Option<crate::copula::TdcPair> {
    match study {
        2..=4 => {
            let spec = mixture_spec(study, 1, 0).ok()?;
            let tdcs: Vec<_> = spec.components.iter().map(|c| c.copula.tdc_unchecked()).collect();
            let w: Vec<f64> = spec.components.iter().map(|c| c.weight).collect();
            Some(crate::bma::blend_tdc(&tdcs, &w))
        }
        _ => None,
    }
}
