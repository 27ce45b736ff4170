//! Univariate distribution functions and quantiles used by the copula
//! families and the gamma marginals.
//!
//! The incomplete beta/gamma functions come from `statrs` and `erfc` from
//! `libm`; the quantiles are bracketing + Newton on those CDFs.

use statrs::function::beta::beta_reg;
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::optim::solve_increasing;
use crate::quad;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // One Halley step polishes the inverse error function.
    let err = if x < 0.0 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - normal_cdf(-x)
    };
    let r = err / normal_ln_pdf(x).exp();
    if r.is_finite() {
        x - r / (1.0 + 0.5 * x * r)
    } else {
        x
    }
}

/// Student t CDF with `df` degrees of freedom.
pub fn t_cdf(x: f64, df: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + x * x));
    if x <= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// `ln Γ((df+1)/2) − ln Γ(df/2) − ½ ln(df π)`, the constant of the t density.
pub fn t_ln_norm(df: f64) -> f64 {
    ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * std::f64::consts::PI).ln()
}

pub fn t_ln_pdf(x: f64, df: f64) -> f64 {
    t_ln_norm(df) - 0.5 * (df + 1.0) * (x * x / df).ln_1p()
}

/// Student t quantile by safeguarded Newton on [`t_cdf`].
pub fn t_quantile(p: f64, df: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    // Solve in the lower half and reflect.
    let q = p.min(1.0 - p);
    let z = normal_quantile(q);
    let z3 = z * z * z;
    let guess = z + (z3 + z) / (4.0 * df) + (5.0 * z3 * z * z + 16.0 * z3 + 3.0 * z) / (96.0 * df * df);
    let mut lo = guess.min(z) * 2.0 - 1.0;
    while t_cdf(lo, df) > q {
        lo *= 4.0;
        if !lo.is_finite() {
            return if p < 0.5 { f64::NEG_INFINITY } else { f64::INFINITY };
        }
    }
    let norm = t_ln_norm(df);
    let x = solve_increasing(
        |x| {
            let f = t_cdf(x, df) - q;
            let d = (norm - 0.5 * (df + 1.0) * (x * x / df).ln_1p()).exp();
            (f, d)
        },
        lo,
        0.0,
        guess.clamp(lo, 0.0),
        1e-13 * guess.abs().max(1.0),
        200,
    );
    if p < 0.5 {
        x
    } else {
        -x
    }
}

/// Gamma CDF with shape and rate.
pub fn gamma_cdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma_lr(shape, rate * x)
}

pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
}

/// Gamma quantile by bracketing + safeguarded Newton on the regularised
/// incomplete gamma function, relative tolerance 1e-12.
pub fn gamma_quantile(p: f64, shape: f64, rate: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    // Wilson–Hilferty start on the standard (rate 1) scale.
    let z = normal_quantile(p);
    let c = 1.0 / (9.0 * shape);
    let mut guess = shape * (1.0 - c + z * c.sqrt()).powi(3);
    if !(guess > 0.0) || shape < 1.0 {
        let small = (p * (ln_gamma(shape + 1.0)).exp()).powf(1.0 / shape);
        if small.is_finite() && small > 0.0 && (!(guess > 0.0) || small < guess) {
            guess = small;
        }
    }
    if !(guess > 0.0) {
        guess = shape;
    }
    let mut lo = guess * 0.5;
    while gamma_lr(shape, lo) > p && lo > 1e-300 {
        lo *= 0.1;
    }
    let mut hi = guess * 2.0 + 1.0;
    while gamma_lr(shape, hi) < p {
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    let lg = ln_gamma(shape);
    let std_q = solve_increasing(
        |x| {
            let f = gamma_lr(shape, x) - p;
            let d = ((shape - 1.0) * x.ln() - x - lg).exp();
            (f, d)
        },
        lo,
        hi,
        guess.clamp(lo, hi),
        1e-12 * guess,
        300,
    );
    std_q / rate
}

/// Debye function of order one, `D₁(x) = (1/x) ∫₀ˣ t/(eᵗ−1) dt`, with the
/// limiting value 1 at `x = 0`.
pub fn debye1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return 1.0 - x / 4.0;
    }
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    let integral = quad::integrate(integrand, 0.0, x, 1e-14 * x.abs().max(1.0));
    integral / x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantile_round_trip() {
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        for &p in &[1e-10, 1e-4, 0.1, 0.5, 0.77, 0.999] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-14 * p.max(1e-2) * 100.0);
        }
    }

    #[test]
    fn t_quantile_known_values() {
        assert!((t_quantile(0.975, 10.0) - 2.228_138_851_964_938_5).abs() < 1e-10);
        // df = 2 has the closed form (2p − 1)/sqrt(2p(1 − p)).
        for &p in &[0.0005f64, 0.01, 0.3, 0.9, 0.9995] {
            let exact = (2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt();
            let got = t_quantile(p, 2.0);
            assert!((got - exact).abs() < 1e-9 * exact.abs().max(1.0), "p={p} {got} {exact}");
        }
    }

    #[test]
    fn t_cdf_symmetry_and_round_trip() {
        for &df in &[2.0, 4.5, 9.06, 30.0, 120.0] {
            for &x in &[-7.0, -1.3, 0.0, 0.4, 3.3] {
                assert!((t_cdf(x, df) + t_cdf(-x, df) - 1.0).abs() < 1e-14);
                let p = t_cdf(x, df);
                assert!((t_quantile(p, df) - x).abs() < 1e-8, "df={df} x={x}");
            }
        }
    }

    #[test]
    fn t_density_integrates_to_cdf() {
        let df = 5.0;
        let mass = quad::integrate(|x| t_ln_pdf(x, df).exp(), -1.0, 2.0, 1e-13);
        assert!((mass - (t_cdf(2.0, df) - t_cdf(-1.0, df))).abs() < 1e-11);
    }

    #[test]
    fn gamma_quantile_known_values() {
        // median of gamma(2, 1)
        assert!((gamma_quantile(0.5, 2.0, 1.0) - 1.678_346_990_016_660_8).abs() < 1e-10);
        // exponential: −ln(1−p)/rate
        let q = gamma_quantile(0.9, 1.0, 0.1);
        assert!((q - 10.0 * 10f64.ln()).abs() < 1e-9);
        for &(a, r) in &[(0.3, 2.0), (2.0, 1.0), (6.0, 6.0 / 2.7), (150.0, 0.1)] {
            for &p in &[1e-8, 1e-3, 0.2, 0.5, 0.95, 1.0 - 1e-9] {
                let x = gamma_quantile(p, a, r);
                let back = gamma_cdf(x, a, r);
                assert!((back - p).abs() < 1e-10 * p.max(1e-3) * 10.0, "a={a} p={p} back={back}");
            }
        }
    }

    #[test]
    fn debye_limit_and_symmetry() {
        assert_eq!(debye1(0.0), 1.0);
        assert!((debye1(1e-9) - 1.0).abs() < 1e-9);
        // D1(−x) = D1(x) + x/2
        for &x in &[0.3, 2.0, 7.5] {
            assert!((debye1(-x) - debye1(x) - x / 2.0).abs() < 1e-12);
        }
    }
}
