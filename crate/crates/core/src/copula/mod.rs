//! The nine-copula pool: t, Gaussian, Joe, Gumbel, Clayton and Frank,
//! with 180° rotations ("survival" versions) of Joe, Gumbel and Clayton.
//!
//! [`CopulaSpec`] is the entry point. Its methods validate parameters and
//! arguments; the `*_unchecked` variants skip validation for hot loops that
//! have already checked once.

pub mod archimedean;
pub mod elliptical;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use archimedean as arch;
use elliptical as ell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    Joe,
    Gumbel,
    Clayton,
    Frank,
    Gaussian,
    StudentT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CopulaFamily {
    pub tag: FamilyTag,
    pub rotated180: bool,
}

impl CopulaFamily {
    pub const fn new(tag: FamilyTag, rotated180: bool) -> Self {
        Self { tag, rotated180 }
    }

    pub const STUDENT_T: Self = Self::new(FamilyTag::StudentT, false);
    pub const GAUSSIAN: Self = Self::new(FamilyTag::Gaussian, false);
    pub const JOE: Self = Self::new(FamilyTag::Joe, false);
    pub const SURVIVAL_JOE: Self = Self::new(FamilyTag::Joe, true);
    pub const GUMBEL: Self = Self::new(FamilyTag::Gumbel, false);
    pub const SURVIVAL_GUMBEL: Self = Self::new(FamilyTag::Gumbel, true);
    pub const CLAYTON: Self = Self::new(FamilyTag::Clayton, false);
    pub const SURVIVAL_CLAYTON: Self = Self::new(FamilyTag::Clayton, true);
    pub const FRANK: Self = Self::new(FamilyTag::Frank, false);

    /// The default candidate pool, in reporting order.
    pub const POOL: [Self; 9] = [
        Self::STUDENT_T,
        Self::GAUSSIAN,
        Self::JOE,
        Self::SURVIVAL_JOE,
        Self::GUMBEL,
        Self::SURVIVAL_GUMBEL,
        Self::CLAYTON,
        Self::SURVIVAL_CLAYTON,
        Self::FRANK,
    ];

    /// Number of free copula parameters.
    pub fn n_params(self) -> usize {
        match self.tag {
            FamilyTag::StudentT => 2,
            _ => 1,
        }
    }

    /// Frank and the elliptical families are radially symmetric.
    pub fn is_radially_symmetric(self) -> bool {
        matches!(self.tag, FamilyTag::Frank | FamilyTag::Gaussian | FamilyTag::StudentT)
    }

    pub fn name(self) -> &'static str {
        use FamilyTag::*;
        match (self.tag, self.rotated180) {
            (StudentT, false) => "t",
            (StudentT, true) => "survival-t",
            (Gaussian, false) => "gaussian",
            (Gaussian, true) => "survival-gaussian",
            (Joe, false) => "joe",
            (Joe, true) => "survival-joe",
            (Gumbel, false) => "gumbel",
            (Gumbel, true) => "survival-gumbel",
            (Clayton, false) => "clayton",
            (Clayton, true) => "survival-clayton",
            (Frank, false) => "frank",
            (Frank, true) => "survival-frank",
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace('_', "-");
        let (rotated, base) = match lower.strip_prefix("survival-").or_else(|| lower.strip_prefix("s-")) {
            Some(rest) => (true, rest),
            None => (false, lower.as_str()),
        };
        let tag = match base {
            "t" | "student-t" | "studentt" => FamilyTag::StudentT,
            "gaussian" | "normal" => FamilyTag::Gaussian,
            "joe" => FamilyTag::Joe,
            "gumbel" => FamilyTag::Gumbel,
            "clayton" => FamilyTag::Clayton,
            "frank" => FamilyTag::Frank,
            _ => return Err(Error::Argument(format!("unknown copula family '{s}'"))),
        };
        Ok(Self::new(tag, rotated))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaParams {
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TdcPair {
    pub lower: f64,
    pub upper: f64,
}

impl TdcPair {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn swapped(self) -> Self {
        Self::new(self.upper, self.lower)
    }
}

/// A family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub family: CopulaFamily,
    pub params: CopulaParams,
}

fn check_unit(u: f64, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("({u}, {v}) is outside the unit square")))
    }
}

impl CopulaSpec {
    /// Builds and validates a specification. `df` is required for the t
    /// copula and must be absent otherwise.
    pub fn new(family: CopulaFamily, theta: f64, df: Option<f64>) -> Result<Self> {
        let spec = Self {
            family,
            params: CopulaParams { theta, df },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a one-parameter family without the t copula's `df`.
    pub fn one_param(family: CopulaFamily, theta: f64) -> Result<Self> {
        Self::new(family, theta, None)
    }

    pub fn student_t(rho: f64, df: f64) -> Result<Self> {
        Self::new(CopulaFamily::STUDENT_T, rho, Some(df))
    }

    pub fn theta(&self) -> f64 {
        self.params.theta
    }

    pub fn df(&self) -> Option<f64> {
        self.params.df
    }

    pub fn validate(&self) -> Result<()> {
        let theta = self.params.theta;
        let bad = |why: &str| Err(Error::ParameterDomain(format!("{} θ={theta}: {why}", self.family)));
        if !theta.is_finite() {
            return bad("θ must be finite");
        }
        match self.family.tag {
            FamilyTag::Joe | FamilyTag::Gumbel if theta < 1.0 => return bad("requires θ ≥ 1"),
            FamilyTag::Clayton if theta <= 0.0 => return bad("requires θ > 0"),
            FamilyTag::Frank if theta == 0.0 => return bad("requires θ ≠ 0"),
            FamilyTag::Gaussian | FamilyTag::StudentT if theta.abs() > 1.0 => return bad("requires |θ| ≤ 1"),
            _ => {}
        }
        match (self.family.tag, self.params.df) {
            (FamilyTag::StudentT, Some(df)) if df > 0.0 && df.is_finite() => Ok(()),
            (FamilyTag::StudentT, Some(df)) => bad(&format!("degrees of freedom {df} must be positive and finite")),
            (FamilyTag::StudentT, None) => bad("t copula requires degrees of freedom"),
            (_, Some(_)) => bad("only the t copula takes degrees of freedom"),
            (_, None) => Ok(()),
        }
    }

    /// Toggles the 180° rotation flag.
    pub fn rotate180(self) -> Self {
        Self {
            family: CopulaFamily::new(self.family.tag, !self.family.rotated180),
            ..self
        }
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    /// `C(u, v)`.
    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        self.validate()?;
        check_unit(u, v)?;
        Ok(self.cdf_unchecked(u, v))
    }

    pub fn cdf_unchecked(&self, u: f64, v: f64) -> f64 {
        if self.family.rotated180 {
            (u + v - 1.0 + self.base_cdf(1.0 - u, 1.0 - v)).clamp(0.0, u.min(v))
        } else {
            self.base_cdf(u, v)
        }
    }

    fn base_cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v.min(1.0);
        }
        if v >= 1.0 {
            return u;
        }
        let t = self.params.theta;
        let c = match self.family.tag {
            FamilyTag::Joe => arch::joe_cdf(t, u, v),
            FamilyTag::Gumbel => arch::gumbel_cdf(t, u, v),
            FamilyTag::Clayton => arch::clayton_cdf(t, u, v),
            FamilyTag::Frank => arch::frank_cdf(t, u, v),
            FamilyTag::Gaussian => ell::gaussian_cdf(t, u, v),
            FamilyTag::StudentT => ell::t_cdf2(t, self.params.df.unwrap_or(f64::INFINITY), u, v),
        };
        c.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    /// `ln c(u, v)` on the open unit square.
    pub fn log_density(&self, u: f64, v: f64) -> Result<f64> {
        self.validate()?;
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::Boundary { u, v });
        }
        if matches!(self.family.tag, FamilyTag::Gaussian | FamilyTag::StudentT) && self.params.theta.abs() >= 1.0 {
            return Err(Error::ParameterDomain(format!(
                "{} density is singular at |θ| = 1",
                self.family
            )));
        }
        Ok(self.log_density_unchecked(u, v))
    }

    pub fn log_density_unchecked(&self, u: f64, v: f64) -> f64 {
        let (u, v) = if self.family.rotated180 { (1.0 - u, 1.0 - v) } else { (u, v) };
        let t = self.params.theta;
        match self.family.tag {
            FamilyTag::Joe => arch::joe_ln_pdf(t, u, v),
            FamilyTag::Gumbel => arch::gumbel_ln_pdf(t, u, v),
            FamilyTag::Clayton => arch::clayton_ln_pdf(t, u, v),
            FamilyTag::Frank => arch::frank_ln_pdf(t, u, v),
            FamilyTag::Gaussian => ell::gaussian_ln_pdf(t, u, v),
            FamilyTag::StudentT => ell::t_ln_pdf(t, self.params.df.unwrap_or(f64::INFINITY), u, v),
        }
    }

    /// Conditional distribution `P(V ≤ v | U = u) = ∂C/∂u`.
    pub fn h(&self, u: f64, v: f64) -> Result<f64> {
        self.validate()?;
        check_unit(u, v)?;
        Ok(self.h_unchecked(u, v))
    }

    pub fn h_unchecked(&self, u: f64, v: f64) -> f64 {
        if self.family.rotated180 {
            1.0 - self.base_h(1.0 - u, 1.0 - v)
        } else {
            self.base_h(u, v)
        }
    }

    fn base_h(&self, u: f64, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return 1.0;
        }
        let u = u.clamp(1e-300, 1.0 - f64::EPSILON / 2.0);
        let t = self.params.theta;
        let h = match self.family.tag {
            FamilyTag::Joe => arch::joe_h(t, u, v),
            FamilyTag::Gumbel => arch::gumbel_h(t, u, v),
            FamilyTag::Clayton => arch::clayton_h(t, u, v),
            FamilyTag::Frank => arch::frank_h(t, u, v),
            FamilyTag::Gaussian => ell::gaussian_h(t, u, v),
            FamilyTag::StudentT => ell::t_h(t, self.params.df.unwrap_or(f64::INFINITY), u, v),
        };
        if h.is_nan() {
            0.0
        } else {
            h.clamp(0.0, 1.0)
        }
    }

    /// Analytic lower and upper tail dependence coefficients.
    pub fn tdc(&self) -> Result<TdcPair> {
        self.validate()?;
        Ok(self.tdc_unchecked())
    }

    pub fn tdc_unchecked(&self) -> TdcPair {
        let t = self.params.theta;
        let base = match self.family.tag {
            FamilyTag::Joe | FamilyTag::Gumbel => TdcPair::new(0.0, 2.0 - 2f64.powf(1.0 / t)),
            FamilyTag::Clayton => TdcPair::new(2f64.powf(-1.0 / t), 0.0),
            FamilyTag::Frank => TdcPair::default(),
            FamilyTag::Gaussian => {
                let l = if t >= 1.0 { 1.0 } else { 0.0 };
                TdcPair::new(l, l)
            }
            FamilyTag::StudentT => {
                let l = ell::t_tail(t, self.params.df.unwrap_or(f64::INFINITY));
                TdcPair::new(l, l)
            }
        };
        if self.family.rotated180 {
            base.swapped()
        } else {
            base
        }
    }

    /// Kendall's tau; unchanged by rotation.
    pub fn kendall_tau(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.kendall_tau_unchecked())
    }

    pub fn kendall_tau_unchecked(&self) -> f64 {
        let t = self.params.theta;
        match self.family.tag {
            FamilyTag::Joe => arch::joe_tau(t),
            FamilyTag::Gumbel => 1.0 - 1.0 / t,
            FamilyTag::Clayton => t / (t + 2.0),
            FamilyTag::Frank => arch::frank_tau(t),
            FamilyTag::Gaussian | FamilyTag::StudentT => ell::elliptical_tau(t),
        }
    }
}

impl fmt::Display for CopulaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.params.df {
            Some(df) => write!(f, "{}(θ={}, df={})", self.family, self.params.theta, df),
            None => write!(f, "{}(θ={})", self.family, self.params.theta),
        }
    }
}

pub use crate::special::debye1;

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_pool() -> Vec<CopulaSpec> {
        let mut out = Vec::new();
        for fam in CopulaFamily::POOL {
            let spec = match fam.tag {
                FamilyTag::StudentT => CopulaSpec::student_t(0.5, 4.0),
                FamilyTag::Gaussian => CopulaSpec::one_param(fam, 0.5),
                FamilyTag::Joe => CopulaSpec::one_param(fam, 1.7),
                FamilyTag::Gumbel => CopulaSpec::one_param(fam, 1.5),
                FamilyTag::Clayton => CopulaSpec::one_param(fam, 1.3),
                FamilyTag::Frank => CopulaSpec::one_param(fam, 4.0),
            };
            out.push(spec.unwrap());
        }
        out
    }

    #[test]
    fn boundary_conditions() {
        for s in fixed_pool() {
            for &u in &[0.0, 0.13, 0.5, 0.91, 1.0] {
                assert!((s.cdf(u, 1.0).unwrap() - u).abs() < 1e-12, "{s}");
                assert!((s.cdf(1.0, u).unwrap() - u).abs() < 1e-12, "{s}");
                assert_eq!(s.cdf(u, 0.0).unwrap(), 0.0);
                assert_eq!(s.cdf(0.0, u).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn two_increasing_on_lattice() {
        for s in fixed_pool() {
            let g: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
            for i in 0..20 {
                for j in 0..20 {
                    let m = s.cdf_unchecked(g[i + 1], g[j + 1]) - s.cdf_unchecked(g[i], g[j + 1])
                        - s.cdf_unchecked(g[i + 1], g[j])
                        + s.cdf_unchecked(g[i], g[j]);
                    assert!(m >= -1e-12, "{s} rectangle ({i},{j}) mass {m}");
                }
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let n = 200;
        for s in fixed_pool() {
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let u = (i as f64 + 0.5) / n as f64;
                    let v = (j as f64 + 0.5) / n as f64;
                    total += s.log_density(u, v).unwrap().exp();
                }
            }
            total /= (n * n) as f64;
            assert!((total - 1.0).abs() < 1e-3, "{s}: {total}");
        }
    }

    #[test]
    fn rotated_density_matches_rotated_cdf() {
        let h = 1e-4;
        for s in fixed_pool() {
            for &(u, v) in &[(0.3, 0.6), (0.85, 0.9)] {
                let c = |a, b| s.cdf_unchecked(a, b);
                let fd = (c(u + h, v + h) - c(u + h, v - h) - c(u - h, v + h) + c(u - h, v - h)) / (4.0 * h * h);
                let an = s.log_density(u, v).unwrap().exp();
                assert!((fd - an).abs() < 1e-3 * an.max(1.0), "{s} ({u},{v}) fd={fd} an={an}");
            }
        }
    }

    #[test]
    fn rotated_h_matches_cdf_derivative() {
        let e = 1e-6;
        for s in fixed_pool() {
            for &(u, v) in &[(0.3, 0.6), (0.85, 0.9)] {
                let fd = (s.cdf_unchecked(u + e, v) - s.cdf_unchecked(u - e, v)) / (2.0 * e);
                let an = s.h(u, v).unwrap();
                assert!((fd - an).abs() < 1e-5, "{s}: {fd} {an}");
            }
        }
    }

    #[test]
    fn independence_examples() {
        let g = CopulaSpec::one_param(CopulaFamily::GUMBEL, 1.0).unwrap();
        assert!((g.cdf(0.3, 0.7).unwrap() - 0.21).abs() < 1e-14);
        assert!(g.log_density(0.3, 0.7).unwrap().abs() < 1e-14);
        assert_eq!(g.kendall_tau().unwrap(), 0.0);
        let n = CopulaSpec::one_param(CopulaFamily::GAUSSIAN, 0.0).unwrap();
        assert!(n.log_density(0.2, 0.8).unwrap().abs() < 1e-14);
    }

    #[test]
    fn clayton_value() {
        let c = CopulaSpec::one_param(CopulaFamily::CLAYTON, 2.0).unwrap();
        assert!((c.cdf(0.5, 0.5).unwrap() - 0.377_964_473_009_227_2).abs() < 1e-12);
    }

    #[test]
    fn tdc_values() {
        let joe = CopulaSpec::one_param(CopulaFamily::JOE, 1.7).unwrap().tdc().unwrap();
        let gum = CopulaSpec::one_param(CopulaFamily::GUMBEL, 1.5).unwrap().tdc().unwrap();
        let scl = CopulaSpec::one_param(CopulaFamily::SURVIVAL_CLAYTON, 1.3).unwrap().tdc().unwrap();
        assert_eq!(joe.lower, 0.0);
        assert!((joe.upper - 0.497).abs() < 5e-4);
        assert!((gum.upper - 0.413).abs() < 5e-4);
        assert_eq!(scl.lower, 0.0);
        assert!((scl.upper - 0.587).abs() < 5e-4);
        let fr = CopulaSpec::one_param(CopulaFamily::FRANK, 5.0).unwrap().tdc().unwrap();
        assert_eq!(fr, TdcPair::default());
        // The single t copula with these parameters has λ ≈ 0.062 on each
        // tail; oracle: 2·P(T₁₀.₀₆ ≤ −√(10.06·0.61/1.39)) computed offline.
        let t = CopulaSpec::student_t(0.39, 9.06).unwrap().tdc().unwrap();
        assert_eq!(t.lower, t.upper);
        assert!((t.lower - 0.0619).abs() < 1e-3, "{t:?}");
    }

    #[test]
    fn tau_values() {
        let g = CopulaSpec::one_param(CopulaFamily::GUMBEL, 2.0).unwrap();
        assert!((g.kendall_tau().unwrap() - 0.5).abs() < 1e-15);
        let n = CopulaSpec::one_param(CopulaFamily::GAUSSIAN, 0.5).unwrap();
        assert!((n.kendall_tau().unwrap() - 1.0 / 3.0).abs() < 1e-14);
        for s in fixed_pool() {
            assert_eq!(s.kendall_tau().unwrap(), s.rotate180().kendall_tau().unwrap());
        }
    }

    #[test]
    fn rotation_is_an_involution_and_swaps_tails() {
        for s in fixed_pool() {
            assert_eq!(s.rotate180().rotate180(), s);
            assert_eq!(s.rotate180().tdc().unwrap(), s.tdc().unwrap().swapped());
        }
        let c = CopulaSpec::one_param(CopulaFamily::CLAYTON, 1.3).unwrap().rotate180();
        assert_eq!(c.family, CopulaFamily::SURVIVAL_CLAYTON);
        let f = CopulaSpec::one_param(CopulaFamily::FRANK, 2.0).unwrap().rotate180();
        assert_eq!(f.tdc().unwrap(), TdcPair::default());
        // Radially symmetric families are unchanged by rotation.
        for &(u, v) in &[(0.2, 0.7), (0.6, 0.4)] {
            let base = CopulaSpec::one_param(CopulaFamily::FRANK, 2.0).unwrap();
            assert!((f.cdf(u, v).unwrap() - base.cdf(u, v).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn validation() {
        assert!(matches!(
            CopulaSpec::one_param(CopulaFamily::GUMBEL, 0.9),
            Err(Error::ParameterDomain(_))
        ));
        assert!(CopulaSpec::one_param(CopulaFamily::CLAYTON, -0.5).is_err());
        assert!(CopulaSpec::one_param(CopulaFamily::FRANK, 0.0).is_err());
        assert!(CopulaSpec::one_param(CopulaFamily::GAUSSIAN, 1.2).is_err());
        assert!(CopulaSpec::one_param(CopulaFamily::STUDENT_T, 0.3).is_err());
        assert!(CopulaSpec::new(CopulaFamily::JOE, 2.0, Some(3.0)).is_err());
        assert!(CopulaSpec::student_t(0.3, -1.0).is_err());
        let g = CopulaSpec::one_param(CopulaFamily::GUMBEL, 2.0).unwrap();
        assert!(matches!(g.log_density(0.0, 0.5), Err(Error::Boundary { .. })));
        assert!(matches!(g.log_density(0.5, 1.0), Err(Error::Boundary { .. })));
    }

    #[test]
    fn family_names_round_trip() {
        for fam in CopulaFamily::POOL {
            assert_eq!(fam.name().parse::<CopulaFamily>().unwrap(), fam);
        }
        assert!("vine".parse::<CopulaFamily>().is_err());
    }

    #[test]
    fn debye_at_one() {
        // Oracle: Simpson's rule with 20 000 panels on t/(eᵗ−1).
        let n = 20_000;
        let f = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let simpson = s * h / 3.0;
        assert!((debye1(1.0) - simpson).abs() < 1e-10 * simpson);
        assert!((debye1(1.0) - 0.777_504).abs() < 1e-6);
    }
}
