//! Ranks, the empirical copula, tail-dependence trajectories and five
//! nonparametric tail-dependence estimators.
//!
//! Every estimator is computed on upper-tail counts. The lower tail is the
//! upper tail of the reflected ranks `N + 1 − R`, which makes estimating the
//! lower tail of `(y₁, y₂)` identical to estimating the upper tail of
//! `(−y₁, −y₂)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ranks and pseudo-observations of a bivariate sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSample {
    pub n: usize,
    /// Average ranks in `1..=N`.
    pub ranks: Vec<(f64, f64)>,
    /// `rank / (N + 1)`.
    pub pseudo: Vec<(f64, f64)>,
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pseudo_observations(data: &[(f64, f64)]) -> Result<PseudoSample> {
    if data.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: data.len(),
        });
    }
    if data.iter().any(|(a, b)| a.is_nan() || b.is_nan()) {
        return Err(Error::Domain("NaN in data".into()));
    }
    let x: Vec<f64> = data.iter().map(|p| p.0).collect();
    let y: Vec<f64> = data.iter().map(|p| p.1).collect();
    Ok(PseudoSample::from_ranks(
        average_ranks(&x).into_iter().zip(average_ranks(&y)).collect(),
    ))
}

impl PseudoSample {
    pub fn from_ranks(ranks: Vec<(f64, f64)>) -> Self {
        let n = ranks.len();
        let scale = 1.0 / (n as f64 + 1.0);
        let pseudo = ranks.iter().map(|&(a, b)| (a * scale, b * scale)).collect();
        Self { n, ranks, pseudo }
    }

    /// Ranks `N + 1 − R`: the sample of `(−y₁, −y₂)`.
    pub fn reflected(&self) -> Self {
        let top = self.n as f64 + 1.0;
        Self::from_ranks(self.ranks.iter().map(|&(a, b)| (top - a, top - b)).collect())
    }

    pub fn swapped(&self) -> Self {
        Self::from_ranks(self.ranks.iter().map(|&(a, b)| (b, a)).collect())
    }

    pub fn u(&self) -> impl Iterator<Item = f64> + '_ {
        self.pseudo.iter().map(|p| p.0)
    }

    pub fn v(&self) -> impl Iterator<Item = f64> + '_ {
        self.pseudo.iter().map(|p| p.1)
    }
}

// Guards `R ≤ uN` against `uN` landing a hair below an integer.
#[inline]
fn scaled(u: f64, n: usize) -> f64 {
    u * n as f64 * (1.0 + 4.0 * f64::EPSILON)
}

/// `Ĉ(u, v) = (1/N) #{R₁ ≤ uN, R₂ ≤ vN}`.
pub fn empirical_copula(ps: &PseudoSample, u: f64, v: f64) -> f64 {
    let (a, b) = (scaled(u, ps.n), scaled(v, ps.n));
    ps.ranks.iter().filter(|&&(r, s)| r <= a && s <= b).count() as f64 / ps.n as f64
}

/// Empirical mass of `(a, 1] × (a, 1]`: `(1/N) #{R₁ > aN, R₂ > aN}`.
pub fn empirical_survival_mass(ps: &PseudoSample, a: f64) -> f64 {
    let t = scaled(a, ps.n);
    ps.ranks.iter().filter(|&&(r, s)| r > t && s > t).count() as f64 / ps.n as f64
}

/// Joint exceedance counts `S(t) = #{min(R₁, R₂) > t}` for integer `t`.
struct UpperCounts {
    /// Sorted `min(R₁, R₂)`.
    mins: Vec<f64>,
}

impl UpperCounts {
    fn new(ps: &PseudoSample) -> Self {
        let mut mins: Vec<f64> = ps.ranks.iter().map(|&(a, b)| a.min(b)).collect();
        mins.sort_by(f64::total_cmp);
        Self { mins }
    }

    fn above(&self, t: f64) -> usize {
        self.mins.len() - self.mins.partition_point(|&m| m <= t)
    }
}

/// Empirical tail-dependence trajectories at `u = i/N`, `i = 1..N−1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub u: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

/// Upper trajectory `#{R₁ > i, R₂ > i} / (N − i)` for `i = 1..N−1`.
///
/// Without ties this equals `(1 − 2i/N + Ĉ(i/N, i/N)) / (1 − i/N)`.
fn upper_trajectory(ps: &PseudoSample) -> Vec<f64> {
    let counts = UpperCounts::new(ps);
    let n = ps.n;
    (1..n).map(|i| counts.above(i as f64) as f64 / (n - i) as f64).collect()
}

pub fn tdc_trajectory(ps: &PseudoSample) -> Result<Trajectory> {
    if ps.n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: ps.n });
    }
    let n = ps.n;
    let upper = upper_trajectory(ps);
    // The lower curve at i/N is the reflected upper curve at (N − i)/N.
    let mut lower = upper_trajectory(&ps.reflected());
    lower.reverse();
    Ok(Trajectory {
        u: (1..n).map(|i| i as f64 / n as f64).collect(),
        upper,
        lower,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Lower,
    Upper,
}

impl std::str::FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lower" | "l" => Ok(Self::Lower),
            "upper" | "u" => Ok(Self::Upper),
            _ => Err(Error::Argument(format!("unknown tail '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdcEstimate {
    pub estimator: u8,
    pub tail: Tail,
    /// Estimate clamped to `[0, 1]`.
    pub value: f64,
    /// Estimate before clamping.
    pub raw: f64,
    /// Tail sample size `k`, or the selected trajectory index for estimator 4.
    pub k_used: usize,
}

pub const MIN_ESTIMATION_N: usize = 16;

/// `round(√N)`, at least 4.
pub fn tail_size(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).max(4)
}

/// Estimates one tail with estimator `1..=5`.
pub fn estimate_tdc_empirical(ps: &PseudoSample, estimator: u8, tail: Tail) -> Result<TdcEstimate> {
    if ps.n < MIN_ESTIMATION_N {
        return Err(Error::InsufficientData {
            needed: MIN_ESTIMATION_N,
            got: ps.n,
        });
    }
    if !(1..=5).contains(&estimator) {
        return Err(Error::Argument(format!("estimator must be 1..=5, got {estimator}")));
    }
    let oriented;
    let ps = match tail {
        Tail::Upper => ps,
        Tail::Lower => {
            oriented = ps.reflected();
            &oriented
        }
    };
    let (raw, k_used) = estimate_upper(ps, estimator);
    Ok(TdcEstimate {
        estimator,
        tail,
        value: if raw.is_nan() { 0.0 } else { raw.clamp(0.0, 1.0) },
        raw,
        k_used,
    })
}

/// All five estimators on both tails, ordered by estimator then tail.
pub fn estimate_all(ps: &PseudoSample) -> Result<Vec<TdcEstimate>> {
    let mut out = Vec::with_capacity(10);
    for e in 1..=5 {
        out.push(estimate_tdc_empirical(ps, e, Tail::Lower)?);
        out.push(estimate_tdc_empirical(ps, e, Tail::Upper)?);
    }
    Ok(out)
}

/// Upper-tail estimates `[λ̂⁽¹⁾, …, λ̂⁽⁵⁾]`, clamped.
pub fn upper_estimates(ps: &PseudoSample) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (e, slot) in out.iter_mut().enumerate() {
        let (raw, _) = estimate_upper(ps, e as u8 + 1);
        *slot = if raw.is_nan() { 0.0 } else { raw.clamp(0.0, 1.0) };
    }
    out
}

fn estimate_upper(ps: &PseudoSample, estimator: u8) -> (f64, usize) {
    let n = ps.n;
    let nf = n as f64;
    let k = tail_size(n);
    let kf = k as f64;
    let counts = UpperCounts::new(ps);
    match estimator {
        // Joint exceedances above 1 − k/N over k/N. The empirical upper
        // tail copula Λ̂(1, 1) has the same form.
        1 | 5 => (counts.above((n - k) as f64) as f64 / kf, k),
        2 => {
            let c = empirical_copula(ps, 1.0 - kf / nf, 1.0 - kf / nf);
            (2.0 - c.ln() / (1.0 - kf / nf).ln(), k)
        }
        3 => {
            // Least squares through the origin of S(N − i)/N on i/N.
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for i in 1..=k {
                let x = i as f64 / nf;
                let y = counts.above((n - i) as f64) as f64 / nf;
                sxy += x * y;
                sxx += x * x;
            }
            (sxy / sxx, k)
        }
        _ => trajectory_plateau(&upper_trajectory(ps), n),
    }
}

/// Estimator 4: follows the upper trajectory from `u = 1/2` towards the
/// tail and keeps the last point at which it is still decreasing (its running
/// minimum), stopping `2k` points short of the end where the curve is
/// dominated by count noise. Returns the value there and its index `i₀`.
fn trajectory_plateau(upper: &[f64], n: usize) -> (f64, usize) {
    let k = tail_size(n);
    // upper[j] is the trajectory at i = j + 1.
    let first = (n / 2).max(1) - 1;
    let last = (n.saturating_sub(2 * k).max(1) - 1).max(first);
    let mut best = first;
    for j in first..=last {
        if upper[j] <= upper[best] {
            best = j;
        }
    }
    (upper[best], best + 1)
}

/// Kendall's tau-b in `O(n log n)` (Knight's algorithm).
pub fn kendall_tau(data: &[(f64, f64)]) -> f64 {
    let n = data.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut pts: Vec<(f64, f64)> = data.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let pairs = |m: u64| m * m.saturating_sub(1) / 2;
    let n0 = pairs(n as u64);

    // Ties in x (n1) and joint ties (n3).
    let (mut n1, mut n3) = (0u64, 0u64);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pts[j + 1].0 == pts[i].0 {
            j += 1;
        }
        n1 += pairs((j - i + 1) as u64);
        let mut a = i;
        while a <= j {
            let mut b = a;
            while b < j && pts[b + 1].1 == pts[a].1 {
                b += 1;
            }
            n3 += pairs((b - a + 1) as u64);
            a = b + 1;
        }
        i = j + 1;
    }

    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    // Ties in y, on the now-sorted y values.
    let mut n2 = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ys[j + 1] == ys[i] {
            j += 1;
        }
        n2 += pairs((j - i + 1) as u64);
        i = j + 1;
    }

    let num = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let den = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

/// Sorts `v` and returns the number of strictly discordant swaps.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comonotone(n: usize) -> PseudoSample {
        let d: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, i as f64 * 2.0)).collect();
        pseudo_observations(&d).unwrap()
    }

    fn anticomonotone(n: usize) -> PseudoSample {
        let d: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, -(i as f64))).collect();
        pseudo_observations(&d).unwrap()
    }

    #[test]
    fn hand_ranked_example() {
        let ps = pseudo_observations(&[(10.0, 5.0), (20.0, 1.0), (30.0, 7.0)]).unwrap();
        assert_eq!(ps.ranks, vec![(1.0, 2.0), (2.0, 1.0), (3.0, 3.0)]);
        assert_eq!(ps.pseudo, vec![(0.25, 0.5), (0.5, 0.25), (0.75, 0.75)]);
        assert!(matches!(
            pseudo_observations(&[(1.0, 1.0)]),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn comonotone_and_reversed_ranks() {
        let ps = comonotone(7);
        for (i, r) in ps.ranks.iter().enumerate() {
            assert_eq!(*r, ((i + 1) as f64, (i + 1) as f64));
        }
        let ps = anticomonotone(7);
        for (i, r) in ps.ranks.iter().enumerate() {
            assert_eq!(*r, ((i + 1) as f64, (7 - i) as f64));
        }
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn empirical_copula_counts() {
        assert_eq!(empirical_copula(&comonotone(4), 0.5, 0.5), 0.5);
        assert_eq!(empirical_copula(&anticomonotone(4), 0.5, 0.5), 0.0);
        assert_eq!(empirical_copula(&anticomonotone(9), 1.0, 1.0), 1.0);
        assert_eq!(empirical_survival_mass(&comonotone(4), 0.5), 0.5);
    }

    #[test]
    fn comonotone_trajectories_are_one() {
        let t = tdc_trajectory(&comonotone(50)).unwrap();
        assert!(t.lower.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert!(t.upper.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        assert_eq!(t.u.len(), 49);
    }

    #[test]
    fn trajectory_matches_formula_without_ties() {
        // Oracle: (1 − 2i/N + Ĉ(i/N,i/N)) / (1 − i/N) and Ĉ(i/N,i/N)/(i/N).
        let ranks: Vec<(f64, f64)> = [3, 7, 1, 9, 4, 10, 2, 8, 5, 6]
            .iter()
            .zip([5, 9, 2, 10, 1, 8, 3, 7, 6, 4])
            .map(|(&a, b)| (a as f64, b as f64))
            .collect();
        let ps = PseudoSample::from_ranks(ranks);
        let t = tdc_trajectory(&ps).unwrap();
        let n = 10.0;
        for i in 1..10 {
            let u = i as f64 / n;
            let c = empirical_copula(&ps, u, u);
            assert!((t.upper[i - 1] - (1.0 - 2.0 * u + c) / (1.0 - u)).abs() < 1e-12);
            assert!((t.lower[i - 1] - c / u).abs() < 1e-12);
        }
    }

    #[test]
    fn estimator_examples() {
        let e = estimate_tdc_empirical(&comonotone(16), 1, Tail::Lower).unwrap();
        assert_eq!((e.value, e.k_used), (1.0, 4));
        let e = estimate_tdc_empirical(&comonotone(100), 2, Tail::Upper).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert_eq!(e.k_used, 10);
        let e = estimate_tdc_empirical(&anticomonotone(100), 5, Tail::Upper).unwrap();
        assert_eq!(e.value, 0.0);
        for est in 1..=5 {
            for tail in [Tail::Lower, Tail::Upper] {
                let e = estimate_tdc_empirical(&comonotone(64), est, tail).unwrap();
                assert!((e.value - 1.0).abs() < 1e-12, "{est} {tail:?} {e:?}");
            }
        }
        assert!(estimate_tdc_empirical(&comonotone(15), 1, Tail::Upper).is_err());
        assert!(estimate_tdc_empirical(&comonotone(20), 6, Tail::Upper).is_err());
    }

    #[test]
    fn tail_size_rounds() {
        assert_eq!(tail_size(16), 4);
        assert_eq!(tail_size(1500), 39);
        assert_eq!(tail_size(2000), 45);
        assert_eq!(tail_size(5), 4);
    }

    #[test]
    fn kendall_matches_naive() {
        let data: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let x = ((i * 37) % 101) as f64;
                let y = ((i * 53) % 17) as f64 + 0.1 * x;
                (x.floor(), (y / 3.0).floor())
            })
            .collect();
        // Naive tau-b.
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..data.len() {
            for j in i + 1..data.len() {
                let dx = data[i].0 - data[j].0;
                let dy = data[i].1 - data[j].1;
                if dx == 0.0 && dy == 0.0 {
                    continue;
                }
                if dx == 0.0 {
                    tx += 1;
                } else if dy == 0.0 {
                    ty += 1;
                } else if dx * dy > 0.0 {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
        let naive = (c - d) as f64 / (((c + d + tx) * (c + d + ty)) as f64).sqrt();
        assert!((kendall_tau(&data) - naive).abs() < 1e-12);
        let co: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, i as f64)).collect();
        assert_eq!(kendall_tau(&co), 1.0);
    }
}
