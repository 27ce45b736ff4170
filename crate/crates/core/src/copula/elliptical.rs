//! Gaussian and Student t copulas.
//!
//! The `*_q` variants take normal (or t) quantiles of `u, v` directly so
//! callers evaluating many densities at a fixed df can cache them.

use crate::quad;
use crate::special::{normal_cdf, normal_quantile, t_cdf, t_ln_norm, t_quantile};

pub fn gaussian_ln_pdf_q(rho: f64, x: f64, y: f64) -> f64 {
    let one_m = 1.0 - rho * rho;
    -0.5 * one_m.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * one_m)
}

pub fn gaussian_ln_pdf(rho: f64, u: f64, v: f64) -> f64 {
    gaussian_ln_pdf_q(rho, normal_quantile(u), normal_quantile(v))
}

pub fn gaussian_h(rho: f64, u: f64, v: f64) -> f64 {
    if rho.abs() >= 1.0 {
        return comonotone_h(rho, u, v);
    }
    let x = normal_quantile(u);
    let y = normal_quantile(v);
    normal_cdf((y - rho * x) / (1.0 - rho * rho).sqrt())
}

pub fn gaussian_cdf(rho: f64, u: f64, v: f64) -> f64 {
    if rho.abs() >= 1.0 {
        return frechet_bound(rho, u, v);
    }
    let y = normal_quantile(v);
    let s = (1.0 - rho * rho).sqrt();
    integrate_h(|w| normal_cdf((y - rho * normal_quantile(w)) / s), u)
}

/// Log-density constant of the bivariate t with correlation `rho`.
pub fn t_ln_norm2(rho: f64, df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(0.5 * (df + 2.0)) - ln_gamma(0.5 * df) - (df * std::f64::consts::PI).ln() - 0.5 * (1.0 - rho * rho).ln()
}

/// Copula log-density from t quantiles `x, y`; `norm2` is [`t_ln_norm2`],
/// `norm1` is [`t_ln_norm`] at `df`.
pub fn t_ln_pdf_q(rho: f64, df: f64, norm2: f64, norm1: f64, x: f64, y: f64) -> f64 {
    let one_m = 1.0 - rho * rho;
    let q = (x * x + y * y - 2.0 * rho * x * y) / (df * one_m);
    let joint = norm2 - 0.5 * (df + 2.0) * q.ln_1p();
    let mx = norm1 - 0.5 * (df + 1.0) * (x * x / df).ln_1p();
    let my = norm1 - 0.5 * (df + 1.0) * (y * y / df).ln_1p();
    joint - mx - my
}

pub fn t_ln_pdf(rho: f64, df: f64, u: f64, v: f64) -> f64 {
    let x = t_quantile(u, df);
    let y = t_quantile(v, df);
    t_ln_pdf_q(rho, df, t_ln_norm2(rho, df), t_ln_norm(df), x, y)
}

#[inline]
fn t_cond(rho: f64, df: f64, x: f64, y: f64) -> f64 {
    let scale = ((df + x * x) * (1.0 - rho * rho) / (df + 1.0)).sqrt();
    t_cdf((y - rho * x) / scale, df + 1.0)
}

pub fn t_h(rho: f64, df: f64, u: f64, v: f64) -> f64 {
    if rho.abs() >= 1.0 {
        return comonotone_h(rho, u, v);
    }
    t_cond(rho, df, t_quantile(u, df), t_quantile(v, df))
}

pub fn t_cdf2(rho: f64, df: f64, u: f64, v: f64) -> f64 {
    if rho.abs() >= 1.0 {
        return frechet_bound(rho, u, v);
    }
    let y = t_quantile(v, df);
    integrate_h(|w| t_cond(rho, df, t_quantile(w, df), y), u)
}

/// Lower (= upper) tail dependence of the t copula.
pub fn t_tail(rho: f64, df: f64) -> f64 {
    if rho <= -1.0 {
        return 0.0;
    }
    if rho >= 1.0 {
        return 1.0;
    }
    2.0 * t_cdf(-((df + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt(), df + 1.0)
}

pub fn elliptical_tau(rho: f64) -> f64 {
    std::f64::consts::FRAC_2_PI * rho.clamp(-1.0, 1.0).asin()
}

fn integrate_h(h: impl Fn(f64) -> f64, u: f64) -> f64 {
    let h = |w: f64| if w <= 0.0 || w >= 1.0 { 0.5 } else { h(w) };
    quad::integrate(h, 0.0, u, 1e-10).clamp(0.0, u)
}

fn frechet_bound(rho: f64, u: f64, v: f64) -> f64 {
    if rho > 0.0 {
        u.min(v)
    } else {
        (u + v - 1.0).max(0.0)
    }
}

fn comonotone_h(rho: f64, u: f64, v: f64) -> f64 {
    let hit = if rho > 0.0 { v >= u } else { v >= 1.0 - u };
    if hit {
        1.0
    } else {
        0.0
    }
}
