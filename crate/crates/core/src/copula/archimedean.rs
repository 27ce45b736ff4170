//! Joe, Gumbel, Clayton and Frank copulas (unrotated).
//!
//! Every function assumes a valid parameter and, for the densities and
//! conditional distributions, `u, v` strictly inside the unit interval.

use crate::quad;
use crate::special::debye1;

/// `ln(eᵃ + eᵇ)` without overflow.
#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

// ---------------------------------------------------------------- Gumbel

#[inline]
fn gumbel_parts(theta: f64, u: f64, v: f64) -> (f64, f64, f64, f64) {
    let x = -u.ln();
    let y = -v.ln();
    let m = x.max(y);
    let ln_s = if m == 0.0 {
        f64::NEG_INFINITY
    } else {
        theta * m.ln() + ((x / m).powf(theta) + (y / m).powf(theta)).ln()
    };
    let a = (ln_s / theta).exp();
    (x, y, ln_s, a)
}

pub fn gumbel_cdf(theta: f64, u: f64, v: f64) -> f64 {
    let (_, _, _, a) = gumbel_parts(theta, u, v);
    (-a).exp()
}

pub fn gumbel_ln_pdf(theta: f64, u: f64, v: f64) -> f64 {
    let (x, y, ln_s, a) = gumbel_parts(theta, u, v);
    -a + x + y + (theta - 1.0) * (x.ln() + y.ln()) + (1.0 / theta - 2.0) * ln_s + (a + theta - 1.0).ln()
}

/// `∂C/∂u`, the distribution of `V` given `U = u`.
pub fn gumbel_h(theta: f64, u: f64, v: f64) -> f64 {
    let (x, _, ln_s, a) = gumbel_parts(theta, u, v);
    (-a + x + (theta - 1.0) * x.ln() + (1.0 / theta - 1.0) * ln_s).exp()
}

// ------------------------------------------------------------------- Joe

/// Returns `(ln ū, ln v̄, ln S)` with `S = ūᶿ + v̄ᶿ − ūᶿv̄ᶿ`.
#[inline]
fn joe_parts(theta: f64, u: f64, v: f64) -> (f64, f64, f64) {
    let lu = (-u).ln_1p();
    let lv = (-v).ln_1p();
    let la = theta * lu;
    let lb = theta * lv + (-(la.exp())).ln_1p();
    (lu, lv, log_add_exp(la, lb))
}

pub fn joe_cdf(theta: f64, u: f64, v: f64) -> f64 {
    let (_, _, ln_s) = joe_parts(theta, u, v);
    -(ln_s / theta).exp_m1()
}

pub fn joe_ln_pdf(theta: f64, u: f64, v: f64) -> f64 {
    let (lu, lv, ln_s) = joe_parts(theta, u, v);
    (1.0 / theta - 2.0) * ln_s + (theta - 1.0) * (lu + lv) + (theta - 1.0 + ln_s.exp()).ln()
}

pub fn joe_h(theta: f64, u: f64, v: f64) -> f64 {
    let (lu, lv, ln_s) = joe_parts(theta, u, v);
    let one_minus_b = -(theta * lv).exp_m1();
    ((1.0 / theta - 1.0) * ln_s + (theta - 1.0) * lu).exp() * one_minus_b
}

/// Kendall's tau of the Joe copula,
/// `1 + (4/θ²) ∫₀¹ t ln t (1−t)^{2(1−θ)/θ} dt`.
///
/// With `s = 1 − t = r^{θ/2}` the algebraic singularity at `t = 1` cancels
/// and the integral becomes `∫₀¹ (θ/2)(1−s) ln(1−s)/s dr`.
pub fn joe_tau(theta: f64) -> f64 {
    let m = 0.5 * theta;
    let integrand = |r: f64| {
        if r <= 0.0 {
            return -m;
        }
        let s = r.powf(m);
        if s >= 1.0 {
            return 0.0;
        }
        m * (1.0 - s) * (-s).ln_1p() / s
    };
    let integral = quad::integrate_split(integrand, 0.0, 1.0, 1e-12);
    1.0 + 4.0 / (theta * theta) * integral
}

// --------------------------------------------------------------- Clayton

/// `ln(u^{−θ} + v^{−θ} − 1)`.
#[inline]
fn clayton_ln_t(theta: f64, u: f64, v: f64) -> f64 {
    let a = -theta * u.ln();
    let b = -theta * v.ln();
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

pub fn clayton_cdf(theta: f64, u: f64, v: f64) -> f64 {
    (-clayton_ln_t(theta, u, v) / theta).exp()
}

pub fn clayton_ln_pdf(theta: f64, u: f64, v: f64) -> f64 {
    theta.ln_1p() - (1.0 + theta) * (u.ln() + v.ln()) - (2.0 + 1.0 / theta) * clayton_ln_t(theta, u, v)
}

pub fn clayton_h(theta: f64, u: f64, v: f64) -> f64 {
    (-(theta + 1.0) * u.ln() - (1.0 / theta + 1.0) * clayton_ln_t(theta, u, v)).exp()
}

// ----------------------------------------------------------------- Frank

const FRANK_INDEPENDENCE: f64 = 1e-10;

pub fn frank_cdf(theta: f64, u: f64, v: f64) -> f64 {
    if theta.abs() < FRANK_INDEPENDENCE {
        return u * v;
    }
    let a = (-theta * u).exp_m1();
    let b = (-theta * v).exp_m1();
    let c = (-theta).exp_m1();
    -(a * b / c).ln_1p() / theta
}

pub fn frank_ln_pdf(theta: f64, u: f64, v: f64) -> f64 {
    if theta.abs() < FRANK_INDEPENDENCE {
        return 0.0;
    }
    let a = (-theta * u).exp_m1();
    let b = (-theta * v).exp_m1();
    let d = -(-theta).exp_m1() - a * b;
    (theta * -(-theta).exp_m1()).ln() - theta * (u + v) - 2.0 * d.abs().ln()
}

pub fn frank_h(theta: f64, u: f64, v: f64) -> f64 {
    if theta.abs() < FRANK_INDEPENDENCE {
        return v;
    }
    let a = (-theta * u).exp_m1();
    let b = (-theta * v).exp_m1();
    let c = (-theta).exp_m1();
    (-theta * u).exp() * b / (c + a * b)
}

/// Kendall's tau of the Frank copula, `1 − 4/θ + 4 D₁(θ)/θ`.
pub fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < FRANK_INDEPENDENCE {
        return 0.0;
    }
    1.0 - 4.0 / theta + 4.0 * debye1(theta) / theta
}

#[cfg(test)]
mod tests {
    use super::*;

    // Central finite difference of a CDF as an independent density oracle.
    fn fd_density(cdf: impl Fn(f64, f64) -> f64, u: f64, v: f64) -> f64 {
        let h = 1e-4;
        (cdf(u + h, v + h) - cdf(u + h, v - h) - cdf(u - h, v + h) + cdf(u - h, v - h)) / (4.0 * h * h)
    }

    fn fd_h(cdf: impl Fn(f64, f64) -> f64, u: f64, v: f64) -> f64 {
        let h = 1e-6;
        (cdf(u + h, v) - cdf(u - h, v)) / (2.0 * h)
    }

    const POINTS: [(f64, f64); 5] = [(0.5, 0.5), (0.1, 0.8), (0.93, 0.97), (0.05, 0.04), (0.7, 0.2)];

    #[test]
    fn densities_match_finite_differences() {
        type Fam = (&'static str, fn(f64, f64, f64) -> f64, fn(f64, f64, f64) -> f64, f64);
        let fams: [Fam; 5] = [
            ("gumbel", gumbel_cdf, gumbel_ln_pdf, 1.8),
            ("joe", joe_cdf, joe_ln_pdf, 2.3),
            ("clayton", clayton_cdf, clayton_ln_pdf, 1.3),
            ("frank", frank_cdf, frank_ln_pdf, 3.0),
            ("frank-neg", frank_cdf, frank_ln_pdf, -4.0),
        ];
        for (name, cdf, lpdf, theta) in fams {
            for &(u, v) in &POINTS {
                let fd = fd_density(|a, b| cdf(theta, a, b), u, v);
                let an = lpdf(theta, u, v).exp();
                assert!((fd - an).abs() < 1e-5 * an.max(1.0), "{name} ({u},{v}): fd={fd} analytic={an}");
            }
        }
    }

    #[test]
    fn conditionals_match_finite_differences() {
        type Fam = (&'static str, fn(f64, f64, f64) -> f64, fn(f64, f64, f64) -> f64, f64);
        let fams: [Fam; 4] = [
            ("gumbel", gumbel_cdf, gumbel_h, 1.8),
            ("joe", joe_cdf, joe_h, 2.3),
            ("clayton", clayton_cdf, clayton_h, 1.3),
            ("frank", frank_cdf, frank_h, 3.0),
        ];
        for (name, cdf, h, theta) in fams {
            for &(u, v) in &POINTS {
                let fd = fd_h(|a, b| cdf(theta, a, b), u, v);
                let an = h(theta, u, v);
                assert!((fd - an).abs() < 1e-7, "{name} ({u},{v}): fd={fd} analytic={an}");
            }
        }
    }

    #[test]
    fn clayton_closed_form() {
        let c = clayton_cdf(2.0, 0.5, 0.5);
        assert!((c - 7f64.powf(-0.5)).abs() < 1e-14);
    }

    #[test]
    fn independence_limits() {
        for &(u, v) in &POINTS {
            assert!((gumbel_cdf(1.0, u, v) - u * v).abs() < 1e-14);
            assert!((joe_cdf(1.0, u, v) - u * v).abs() < 1e-14);
            assert!(gumbel_ln_pdf(1.0, u, v).abs() < 1e-13);
            assert!(joe_ln_pdf(1.0, u, v).abs() < 1e-13);
            assert!((frank_cdf(1e-12, u, v) - u * v).abs() < 1e-14);
        }
    }

    #[test]
    fn joe_tau_matches_series() {
        // Independent route: τ = 1 − 4 Σ_{k≥1} 1 / (k (θk + 2)(θ(k−1) + 2)).
        for &theta in &[1.0, 1.7, 3.0, 8.0] {
            let mut s = 0.0;
            for k in 1..2_000_000u64 {
                let k = k as f64;
                s += 1.0 / (k * (theta * k + 2.0) * (theta * (k - 1.0) + 2.0));
            }
            let series = 1.0 - 4.0 * s;
            assert!((joe_tau(theta) - series).abs() < 1e-6, "theta={theta}");
        }
    }

    #[test]
    fn extreme_arguments_stay_finite() {
        let u = 1e-12;
        let v = 1.0 - 1e-12;
        for &t in &[1.0001, 20.0, 45.0] {
            assert!(gumbel_ln_pdf(t, u, v).is_finite() || gumbel_ln_pdf(t, u, v) == f64::NEG_INFINITY);
            assert!(!joe_ln_pdf(t, v, v).is_nan());
            assert!(!clayton_ln_pdf(t, u, u).is_nan());
            assert!(!frank_ln_pdf(t, u, v).is_nan());
        }
    }
}
