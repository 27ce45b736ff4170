//! Finite mixtures of copula regressions with gamma GLM margins, fitted by
//! EM. Each component pairs a copula with two log-link gamma regressions;
//! the mixing proportions carry no covariates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaFamily, CopulaSpec, TdcPair};
use crate::fitting::{
    fit_copula_weighted, fit_gamma_glm_weighted, information_criteria, GammaGlmFit, CLAMP,
};
use crate::sampling::{sample_copula_with, stream_rng};
use crate::special::gamma_quantile;
use crate::{Error, Result};

/// Components with less total responsibility than this are degenerate.
pub const MIN_COMPONENT_WEIGHT: f64 = 5.0;

/// Responses and per-margin design rows (each row starts with the intercept).
#[derive(Debug, Clone, Copy)]
pub struct EmData<'a> {
    pub y1: &'a [f64],
    pub y2: &'a [f64],
    pub x1: &'a [Vec<f64>],
    pub x2: &'a [Vec<f64>],
}

impl EmData<'_> {
    pub fn len(&self) -> usize {
        self.y1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y1.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.y1.len();
        if self.y2.len() != n || self.x1.len() != n || self.x2.len() != n {
            return Err(Error::Design("responses and design rows are not aligned".into()));
        }
        Ok(())
    }
}

/// Design rows kept with a fitted mixture so it can be simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDesign {
    pub x1: Vec<Vec<f64>>,
    pub x2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFit {
    pub copula: CopulaSpec,
    pub margin1: GammaGlmFit,
    pub margin2: GammaGlmFit,
}

impl ComponentFit {
    pub fn n_params(&self) -> usize {
        self.copula.n_params() + self.margin1.n_params() + self.margin2.n_params()
    }

    /// Log of copula density times both marginal densities at row `i`.
    fn ln_density(&self, data: &EmData, i: usize) -> f64 {
        let (y1, y2, x1, x2) = (data.y1[i], data.y2[i], &data.x1[i], &data.x2[i]);
        let u = self.margin1.cdf(y1, x1).clamp(CLAMP, 1.0 - CLAMP);
        let v = self.margin2.cdf(y2, x2).clamp(CLAMP, 1.0 - CLAMP);
        self.copula.log_density_unchecked(u, v) + self.margin1.ln_pdf(y1, x1) + self.margin2.ln_pdf(y2, x2)
    }

    fn weighted_ln_density(&self, data: &EmData, w: &[f64]) -> f64 {
        (0..data.len())
            .filter(|&i| w[i] > 0.0)
            .map(|i| w[i] * self.ln_density(data, i))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub components: Vec<ComponentFit>,
    pub mixing: Vec<f64>,
    /// `N × G` posterior membership probabilities.
    pub responsibilities: Vec<Vec<f64>>,
    pub loglik: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub aic: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Observed log-likelihood after each iteration.
    pub loglik_trace: Vec<f64>,
}

impl MixtureModel {
    pub fn g(&self) -> usize {
        self.components.len()
    }

    pub fn families(&self) -> Vec<CopulaFamily> {
        self.components.iter().map(|c| c.copula.family).collect()
    }

    /// Mixing-weighted sum of the component coefficients.
    pub fn tdc(&self) -> TdcPair {
        mixture_tdc(self)
    }

    /// Assembles a model from parameters, evaluating responsibilities and
    /// the likelihood on `data`.
    pub fn from_parts(components: Vec<ComponentFit>, mixing: Vec<f64>, data: &EmData) -> Result<Self> {
        data.validate()?;
        if components.is_empty() || components.len() != mixing.len() {
            return Err(Error::Argument("one mixing weight per component required".into()));
        }
        let n_params = components.len() - 1 + components.iter().map(ComponentFit::n_params).sum::<usize>();
        let mut model = Self {
            components,
            mixing,
            responsibilities: Vec::new(),
            loglik: f64::NAN,
            n_params,
            n_obs: data.len(),
            aic: f64::NAN,
            bic: f64::NAN,
            iterations: 0,
            converged: false,
            loglik_trace: Vec::new(),
        };
        let (resp, ll) = e_step_with_loglik(&model, data);
        model.set_state(resp, ll);
        Ok(model)
    }

    fn set_state(&mut self, resp: Vec<Vec<f64>>, loglik: f64) {
        self.responsibilities = resp;
        self.loglik = loglik;
        let (aic, bic) = information_criteria(loglik, self.n_params, self.n_obs);
        self.aic = aic;
        self.bic = bic;
    }

    /// Reorders the components; `order[k]` is the old index of new component `k`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut m = self.clone();
        m.components = order.iter().map(|&k| self.components[k].clone()).collect();
        m.mixing = order.iter().map(|&k| self.mixing[k]).collect();
        m.responsibilities = self
            .responsibilities
            .iter()
            .map(|row| order.iter().map(|&k| row[k]).collect())
            .collect();
        m
    }

    /// `n` draws on the data scale: a component by the mixing weights, a
    /// design row uniformly from `design`, then the component's copula and
    /// marginal quantiles.
    pub fn simulate_with<R: Rng + ?Sized>(&self, design: &MixtureDesign, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
        let rows = design.x1.len();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let p: f64 = rng.random();
            let mut g = 0;
            let mut acc = self.mixing[0];
            while p >= acc && g + 1 < self.mixing.len() {
                g += 1;
                acc += self.mixing[g];
            }
            let i = rng.random_range(0..rows);
            let c = &self.components[g];
            let (u, v) = sample_copula_with(&c.copula, 1, rng)[0];
            let (a1, r1) = c.margin1.shape_rate(&design.x1[i]);
            let (a2, r2) = c.margin2.shape_rate(&design.x2[i]);
            out.push((gamma_quantile(u, a1, r1), gamma_quantile(v, a2, r2)));
        }
        out
    }
}

/// `Σ τ_g λ_g` for both tails.
pub fn mixture_tdc(model: &MixtureModel) -> TdcPair {
    let tdcs: Vec<TdcPair> = model.components.iter().map(|c| c.copula.tdc_unchecked()).collect();
    crate::bma::blend_tdc(&tdcs, &model.mixing)
}

/// MAP component per row, lower index on ties.
pub fn classify(model: &MixtureModel) -> Vec<usize> {
    model
        .responsibilities
        .iter()
        .map(|row| {
            let mut best = 0;
            for (g, &z) in row.iter().enumerate() {
                if z > row[best] {
                    best = g;
                }
            }
            best
        })
        .collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior membership probabilities, computed in log space.
pub fn e_step(model: &MixtureModel, data: &EmData) -> Vec<Vec<f64>> {
    e_step_with_loglik(model, data).0
}

fn e_step_with_loglik(model: &MixtureModel, data: &EmData) -> (Vec<Vec<f64>>, f64) {
    let g = model.components.len();
    let ln_tau: Vec<f64> = model.mixing.iter().map(|t| t.ln()).collect();
    let rows: Vec<(Vec<f64>, f64)> = (0..data.len())
        .map(|i| {
            let lj: Vec<f64> = (0..g)
                .map(|k| {
                    let l = ln_tau[k] + model.components[k].ln_density(data, i);
                    if l.is_nan() {
                        f64::NEG_INFINITY
                    } else {
                        l
                    }
                })
                .collect();
            let total = log_sum_exp(&lj);
            if total.is_finite() {
                (lj.iter().map(|l| (l - total).exp()).collect(), total)
            } else {
                // Every component underflows: fall back to the prior.
                (model.mixing.clone(), total)
            }
        })
        .collect();
    let ll = rows.iter().map(|r| r.1).sum();
    (rows.into_iter().map(|r| r.0).collect(), ll)
}

/// Column sums of the responsibilities.
fn component_weights(resp: &[Vec<f64>], g: usize) -> Vec<f64> {
    let mut s = vec![0.0; g];
    for row in resp {
        for (acc, z) in s.iter_mut().zip(row) {
            *acc += z;
        }
    }
    s
}

fn column(resp: &[Vec<f64>], g: usize) -> Vec<f64> {
    resp.iter().map(|r| r[g]).collect()
}

/// Maximises the weighted complete-data likelihood of one component:
/// both margins by weighted gamma GLM, then the copula at the updated
/// marginal probabilities.
fn fit_component(
    family: CopulaFamily,
    data: &EmData,
    w: &[f64],
    previous: Option<&ComponentFit>,
) -> Result<ComponentFit> {
    let margin1 = fit_gamma_glm_weighted(
        data.y1,
        data.x1,
        Some(w),
        previous.map(|p| p.margin1.coefficients.as_slice()),
    )?;
    let margin2 = fit_gamma_glm_weighted(
        data.y2,
        data.x2,
        Some(w),
        previous.map(|p| p.margin2.coefficients.as_slice()),
    )?;
    let copula = fit_copula_at_margins(family, data, w, &margin1, &margin2, previous)?;
    Ok(ComponentFit {
        copula,
        margin1,
        margin2,
    })
}

fn fit_copula_at_margins(
    family: CopulaFamily,
    data: &EmData,
    w: &[f64],
    margin1: &GammaGlmFit,
    margin2: &GammaGlmFit,
    previous: Option<&ComponentFit>,
) -> Result<CopulaSpec> {
    let uv: Vec<(f64, f64)> = (0..data.len())
        .map(|i| (margin1.cdf(data.y1[i], &data.x1[i]), margin2.cdf(data.y2[i], &data.x2[i])))
        .collect();
    let warm = previous.filter(|p| p.copula.family == family).map(|p| p.copula.params);
    Ok(fit_copula_weighted(family, &uv, Some(w), warm)?.spec)
}

/// M-step: mixing proportions from column means, then every component
/// from its weighted likelihood. With `previous` set, a component update
/// that would lower its expected complete-data log-likelihood is replaced
/// by a copula-only update, or rejected, so EM stays monotone.
pub fn m_step(
    resp: &[Vec<f64>],
    data: &EmData,
    families: &[CopulaFamily],
    previous: Option<&[ComponentFit]>,
) -> Result<(Vec<f64>, Vec<ComponentFit>)> {
    data.validate()?;
    let g = families.len();
    if resp.len() != data.len() || resp.iter().any(|r| r.len() != g) {
        return Err(Error::Argument("responsibility matrix does not match data and families".into()));
    }
    let sums = component_weights(resp, g);
    for (k, &s) in sums.iter().enumerate() {
        if !(s >= MIN_COMPONENT_WEIGHT) {
            return Err(Error::DegenerateComponent {
                component: k,
                weight: s,
                threshold: MIN_COMPONENT_WEIGHT,
            });
        }
    }
    let n = data.len() as f64;
    let total: f64 = sums.iter().sum();
    let mixing: Vec<f64> = sums.iter().map(|s| s / total).collect();
    debug_assert!((total - n).abs() < 1e-6 * n);

    let mut comps = Vec::with_capacity(g);
    for (k, &family) in families.iter().enumerate() {
        let w = column(resp, k);
        let prev = previous.map(|p| &p[k]);
        let fresh = fit_component(family, data, &w, prev);
        let Some(old) = prev else {
            comps.push(fresh?);
            continue;
        };
        let q_old = old.weighted_ln_density(data, &w);
        let accept = |c: &ComponentFit| {
            let q = c.weighted_ln_density(data, &w);
            q.is_finite() && q >= q_old
        };
        match fresh {
            Ok(c) if accept(&c) => comps.push(c),
            _ => {
                let spec = fit_copula_at_margins(family, data, &w, &old.margin1, &old.margin2, Some(old));
                let alt = spec.ok().map(|copula| ComponentFit {
                    copula,
                    margin1: old.margin1.clone(),
                    margin2: old.margin2.clone(),
                });
                match alt {
                    Some(c) if accept(&c) => comps.push(c),
                    _ => comps.push(old.clone()),
                }
            }
        }
    }
    Ok((mixing, comps))
}

/// How EM runs are started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmInit {
    /// Ward clustering of the log-responses.
    Hierarchical,
    /// Uniformly random hard labels.
    Random,
    GivenLabels(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Stop when the relative log-likelihood increase falls below this.
    pub epsilon: f64,
    pub max_iter: usize,
    pub init: EmInit,
    /// Number of starts; the first uses `init`, the rest random labels.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_iter: 500,
            init: EmInit::Hierarchical,
            restarts: 3,
            seed: 0,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::Argument("EM needs epsilon > 0, max_iter ≥ 1 and restarts ≥ 1".into()));
        }
        Ok(())
    }
}

/// Initial hard labels for start `restart` (0 uses the configured mode,
/// later starts are random).
pub fn initial_labels(data: &EmData, g: usize, cfg: &EmConfig, restart: usize) -> Result<Vec<usize>> {
    let n = data.len();
    let random = |stream: u64| {
        let mut rng = stream_rng(cfg.seed, stream);
        (0..n).map(|_| rng.random_range(0..g)).collect()
    };
    Ok(match (&cfg.init, restart) {
        (EmInit::Hierarchical, 0) => {
            let pts: Vec<[f64; 2]> = (0..n).map(|i| [data.y1[i].ln(), data.y2[i].ln()]).collect();
            ward_labels(&pts, g)
        }
        (EmInit::GivenLabels(l), 0) => {
            if l.len() != n || l.iter().any(|&k| k >= g) {
                return Err(Error::Argument(format!("given labels must be {n} values in 0..{g}")));
            }
            l.clone()
        }
        (_, r) => random(r as u64),
    })
}

/// Agglomerative clustering with Ward linkage (nearest-neighbour chain),
/// cut into `g` clusters. Clusters are numbered by increasing mean of the
/// coordinate sum.
pub fn ward_labels(points: &[[f64; 2]], g: usize) -> Vec<usize> {
    let n = points.len();
    if g <= 1 || n == 0 {
        return vec![0; n];
    }
    let g = g.min(n);
    let mut d = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..i {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            let s = dx * dx + dy * dy;
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();
    while merges.len() + 1 < n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster"));
        }
        let (a, b) = loop {
            let a = *chain.last().unwrap();
            let prev = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d[a * n + p]);
            for k in 0..n {
                if active[k] && k != a && d[a * n + k] < best_d {
                    best = Some(k);
                    best_d = d[a * n + k];
                }
            }
            let b = best.expect("another active cluster");
            if Some(b) == prev {
                chain.pop();
                chain.pop();
                break (a, b);
            }
            chain.push(b);
        };
        let (keep, drop) = (a.min(b), a.max(b));
        let dab = d[a * n + b];
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if active[k] && k != a && k != b {
                let nk = size[k] as f64;
                let upd = ((na + nk) * d[a * n + k] + (nb + nk) * d[b * n + k] - nk * dab) / (na + nb + nk);
                d[keep * n + k] = upd;
                d[k * n + keep] = upd;
            }
        }
        active[drop] = false;
        size[keep] += size[drop];
        merges.push((keep, drop, dab));
    }
    merges.sort_by(|x, y| x.2.total_cmp(&y.2));

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b, _) in merges.iter().take(n - g) {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[rb] = ra;
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut ids: Vec<usize> = roots.clone();
    ids.sort_unstable();
    ids.dedup();
    let centre = |r: usize| {
        let (s, c) = (0..n)
            .filter(|&i| roots[i] == r)
            .fold((0.0, 0usize), |(s, c), i| (s + points[i][0] + points[i][1], c + 1));
        s / c as f64
    };
    let mut order: Vec<(f64, usize)> = ids.iter().map(|&r| (centre(r), r)).collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    roots
        .iter()
        .map(|r| order.iter().position(|o| o.1 == *r).unwrap())
        .collect()
}

fn one_hot(labels: &[usize], g: usize) -> Vec<Vec<f64>> {
    labels
        .iter()
        .map(|&l| (0..g).map(|k| if k == l { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// EM from hard initial labels.
pub fn em_from_labels(
    data: &EmData,
    families: &[CopulaFamily],
    labels: &[usize],
    cfg: &EmConfig,
) -> Result<MixtureModel> {
    let g = families.len();
    let (mixing, comps) = m_step(&one_hot(labels, g), data, families, None)?;
    let mut model = MixtureModel::from_parts(comps, mixing, data)?;
    model.loglik_trace.push(model.loglik);
    for it in 1..=cfg.max_iter {
        let (mixing, comps) = m_step(&model.responsibilities, data, families, Some(&model.components))?;
        let prev = model.loglik;
        let (trace, _) = (std::mem::take(&mut model.loglik_trace), ());
        model = MixtureModel::from_parts(comps, mixing, data)?;
        model.loglik_trace = trace;
        model.loglik_trace.push(model.loglik);
        model.iterations = it;
        if (model.loglik - prev) / prev.abs().max(1e-300) < cfg.epsilon {
            model.converged = true;
            break;
        }
    }
    Ok(model)
}

/// Fits a `G`-component mixture (`G = families.len()`), keeping the best of
/// `cfg.restarts` starts by log-likelihood.
pub fn em_fit(data: &EmData, families: &[CopulaFamily], cfg: &EmConfig) -> Result<MixtureModel> {
    cfg.validate()?;
    data.validate()?;
    let g = families.len();
    if g == 0 {
        return Err(Error::Argument("at least one component is required".into()));
    }
    if data.len() < 20 * g {
        return Err(Error::InsufficientData {
            needed: 20 * g,
            got: data.len(),
        });
    }
    let starts = (0..cfg.restarts)
        .map(|r| initial_labels(data, g, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    best_of_starts(data, families, &starts, cfg)
}

/// Runs EM from each labelling and keeps the highest log-likelihood.
fn best_of_starts(
    data: &EmData,
    families: &[CopulaFamily],
    starts: &[Vec<usize>],
    cfg: &EmConfig,
) -> Result<MixtureModel> {
    let mut best: Option<MixtureModel> = None;
    let mut last_err = None;
    for labels in starts {
        match em_from_labels(data, families, labels, cfg) {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.loglik > b.loglik) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        Error::Fit(format!(
            "every EM start failed; last error: {}",
            last_err.map_or_else(|| "none".into(), |e| e.to_string())
        ))
    })
}

/// One entry of a permutation search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationFit {
    pub index: usize,
    pub families: Vec<CopulaFamily>,
    pub model: Option<MixtureModel>,
    pub error: Option<String>,
}

impl PermutationFit {
    pub fn bic(&self) -> f64 {
        self.model.as_ref().map_or(f64::INFINITY, |m| m.bic)
    }

    pub fn aic(&self) -> f64 {
        self.model.as_ref().map_or(f64::INFINITY, |m| m.aic)
    }
}

/// Every ordered `G`-tuple of families from `pool`, in lexicographic order
/// of pool indices.
pub fn family_tuples(pool: &[CopulaFamily], g: usize) -> Vec<Vec<CopulaFamily>> {
    let mut out = vec![Vec::new()];
    for _ in 0..g {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<CopulaFamily>| {
                pool.iter().map(move |&f| {
                    let mut t = prefix.clone();
                    t.push(f);
                    t
                })
            })
            .collect();
    }
    out
}

/// Fits every ordered `G`-tuple from the pool from the same initial
/// classifications (one per start), ranked by BIC (failures last, in index
/// order).
pub fn permutation_search(
    data: &EmData,
    pool: &[CopulaFamily],
    g: usize,
    cfg: &EmConfig,
) -> Result<Vec<PermutationFit>> {
    cfg.validate()?;
    data.validate()?;
    if pool.is_empty() || g == 0 {
        return Err(Error::Argument("family pool and G must be non-empty".into()));
    }
    if data.len() < 20 * g {
        return Err(Error::InsufficientData {
            needed: 20 * g,
            got: data.len(),
        });
    }
    let starts = (0..cfg.restarts)
        .map(|r| initial_labels(data, g, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let tuples = family_tuples(pool, g);
    let mut fits: Vec<PermutationFit> = tuples
        .into_par_iter()
        .enumerate()
        .map(|(index, families)| {
            let (model, error) = match best_of_starts(data, &families, &starts, cfg) {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e.to_string())),
            };
            PermutationFit {
                index,
                families,
                model,
                error,
            }
        })
        .collect();
    fits.sort_by(|a, b| a.bic().total_cmp(&b.bic()).then(a.index.cmp(&b.index)));
    Ok(fits)
}

/// Best model for each number of components, and the AIC choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSelection {
    /// `(G, ranked permutation fits)` for `G = 1..=max_g`.
    pub searches: Vec<(usize, Vec<PermutationFit>)>,
    pub chosen_g: usize,
}

impl ComponentSelection {
    pub fn best(&self) -> Option<&MixtureModel> {
        self.searches
            .iter()
            .find(|(g, _)| *g == self.chosen_g)
            .and_then(|(_, fits)| fits.first())
            .and_then(|f| f.model.as_ref())
    }
}

/// Runs the permutation search for `G = 1..=max_g` and picks the `G` whose
/// best-BIC model has the lowest AIC; near ties go to the smaller `G`.
pub fn select_components(
    data: &EmData,
    pool: &[CopulaFamily],
    max_g: usize,
    cfg: &EmConfig,
) -> Result<ComponentSelection> {
    let mut searches = Vec::new();
    let mut chosen: Option<(usize, f64)> = None;
    for g in 1..=max_g {
        if data.len() < 20 * g {
            break;
        }
        let fits = permutation_search(data, pool, g, cfg)?;
        let aic = fits.first().map_or(f64::INFINITY, PermutationFit::aic);
        if aic.is_finite() && chosen.is_none_or(|(_, best)| aic < best - 1e-6) {
            chosen = Some((g, aic));
        }
        searches.push((g, fits));
    }
    let chosen_g = chosen
        .ok_or_else(|| Error::Fit("no mixture could be fitted for any number of components".into()))?
        .0;
    Ok(ComponentSelection { searches, chosen_g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::fit_copula_ifm;
    use crate::sampling::{compose_dataset, MarginalSpec, MixtureComponent, MixtureSimSpec};

    fn glm(b: &[f64], shape: f64) -> GammaGlmFit {
        GammaGlmFit {
            coefficients: b.to_vec(),
            shape,
            loglik: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    fn comp(fam: CopulaFamily, theta: f64) -> ComponentFit {
        ComponentFit {
            copula: CopulaSpec::one_param(fam, theta).unwrap(),
            margin1: glm(&[0.5], 2.0),
            margin2: glm(&[1.0], 3.0),
        }
    }

    fn toy() -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let y1 = vec![0.5, 1.2, 2.3, 0.8, 3.1, 1.9];
        let y2 = vec![2.0, 1.1, 4.2, 2.5, 5.3, 0.7];
        (y1, y2, vec![vec![1.0]; 6])
    }

    #[test]
    fn e_step_examples() {
        let (y1, y2, x) = toy();
        let data = EmData { y1: &y1, y2: &y2, x1: &x, x2: &x };
        let one = MixtureModel::from_parts(vec![comp(CopulaFamily::GUMBEL, 1.5)], vec![1.0], &data).unwrap();
        assert!(e_step(&one, &data).iter().all(|r| r == &vec![1.0]));
        let c = comp(CopulaFamily::GUMBEL, 1.5);
        let two = MixtureModel::from_parts(vec![c.clone(), c], vec![0.5, 0.5], &data).unwrap();
        assert!(e_step(&two, &data).iter().all(|r| (r[0] - 0.5).abs() < 1e-15));
        // Direct formula against the component densities.
        let m = MixtureModel::from_parts(
            vec![comp(CopulaFamily::GUMBEL, 1.5), comp(CopulaFamily::FRANK, -2.0)],
            vec![0.3, 0.7],
            &data,
        )
        .unwrap();
        for (i, row) in m.responsibilities.iter().enumerate() {
            let h1 = m.components[0].ln_density(&data, i).exp();
            let h2 = m.components[1].ln_density(&data, i).exp();
            assert!((row[0] - 0.3 * h1 / (0.3 * h1 + 0.7 * h2)).abs() < 1e-12);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let direct: f64 = (0..6)
            .map(|i| {
                (0.3 * m.components[0].ln_density(&data, i).exp() + 0.7 * m.components[1].ln_density(&data, i).exp())
                    .ln()
            })
            .sum();
        assert!((m.loglik - direct).abs() < 1e-8 * direct.abs());
    }

    #[test]
    fn ward_separates_clear_groups() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push([i as f64 * 0.01, 0.0]);
            pts.push([5.0 + i as f64 * 0.01, 5.0]);
        }
        let l = ward_labels(&pts, 2);
        for (i, &lab) in l.iter().enumerate() {
            assert_eq!(lab, i % 2);
        }
        assert_eq!(ward_labels(&pts, 1), vec![0; 20]);
    }

    #[test]
    fn ward_matches_greedy_oracle() {
        // Naive O(n³) Ward: repeatedly merge the pair with the smallest
        // increase in within-cluster sum of squares.
        let mut rng = stream_rng(2, 0);
        let pts: Vec<[f64; 2]> = (0..40).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let mut clusters: Vec<Vec<usize>> = (0..40).map(|i| vec![i]).collect();
        let centroid = |c: &[usize]| {
            let s = c.iter().fold([0.0, 0.0], |a, &i| [a[0] + pts[i][0], a[1] + pts[i][1]]);
            [s[0] / c.len() as f64, s[1] / c.len() as f64]
        };
        while clusters.len() > 3 {
            let mut best = (0, 1, f64::INFINITY);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let (ca, cb) = (centroid(&clusters[a]), centroid(&clusters[b]));
                    let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
                    let inc = na * nb / (na + nb) * ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2));
                    if inc < best.2 {
                        best = (a, b, inc);
                    }
                }
            }
            let b = clusters.remove(best.1);
            clusters[best.0].extend(b);
        }
        let labels = ward_labels(&pts, 3);
        for c in &clusters {
            assert!(c.iter().all(|&i| labels[i] == labels[c[0]]));
        }
    }

    #[test]
    fn m_step_hard_split() {
        let (y1, y2, x) = toy();
        let data = EmData { y1: &y1, y2: &y2, x1: &x, x2: &x };
        let resp = one_hot(&[0, 0, 0, 1, 1, 1], 2);
        // Fewer than five points per component is degenerate.
        assert!(matches!(
            m_step(&resp, &data, &[CopulaFamily::FRANK; 2], None),
            Err(Error::DegenerateComponent { .. })
        ));
    }

    fn study4(seed: u64) -> crate::data::Dataset {
        let spec = MixtureSimSpec {
            components: vec![
                MixtureComponent {
                    copula: CopulaSpec::one_param(CopulaFamily::GUMBEL, 2.0).unwrap(),
                    weight: 0.5,
                    margin1: MarginalSpec::GammaGlm { coefficients: vec![1.0, 0.1, 0.1], shape: 6.0 },
                    margin2: MarginalSpec::GammaGlm { coefficients: vec![2.0, 0.2, 0.2], shape: 3.0 },
                },
                MixtureComponent {
                    copula: CopulaSpec::one_param(CopulaFamily::FRANK, 3.0).unwrap(),
                    weight: 0.5,
                    margin1: MarginalSpec::GammaGlm { coefficients: vec![0.8, 0.2, 0.2], shape: 2.0 },
                    margin2: MarginalSpec::GammaGlm { coefficients: vec![0.8, 0.2, 0.2], shape: 2.0 },
                },
            ],
            n: 1000,
            seed,
            n_covariates: 2,
        };
        compose_dataset(&spec).unwrap()
    }

    #[test]
    fn em_is_monotone_and_recovers_components() {
        let d = study4(8);
        let x = d.design(&["x1".into(), "x2".into()]).unwrap();
        let data = EmData { y1: &d.y1, y2: &d.y2, x1: &x, x2: &x };
        let fams = [CopulaFamily::GUMBEL, CopulaFamily::FRANK];
        let truth = d.labels.clone().unwrap();
        let cfg = EmConfig {
            init: EmInit::GivenLabels(truth.clone()),
            ..EmConfig::default()
        };
        let m = em_fit(&data, &fams, &cfg).unwrap();
        for w in m.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{:?}", m.loglik_trace);
        }
        assert!((m.mixing.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((m.mixing[0] - 0.5).abs() < 0.08, "{:?}", m.mixing);
        assert!((m.components[0].copula.theta() - 2.0).abs() < 0.4);
        assert!((m.components[1].copula.theta() - 3.0).abs() < 1.0);
        // Determinism.
        assert_eq!(m, em_fit(&data, &fams, &cfg).unwrap());
        // Label swap.
        let s = m.permuted(&[1, 0]);
        let (resp, ll) = e_step_with_loglik(&s, &data);
        assert!((ll - m.loglik).abs() < 1e-9 * m.loglik.abs());
        assert!((mixture_tdc(&s).upper - mixture_tdc(&m).upper).abs() < 1e-15);
        let a = classify(&m);
        let b: Vec<usize> = resp
            .iter()
            .map(|r| if r[1] > r[0] { 1 } else { 0 })
            .collect();
        let count = |l: &[usize], k| l.iter().filter(|&&x| x == k).count();
        assert_eq!(count(&a, 0), count(&b, 1));
    }

    #[test]
    fn single_component_em_equals_ifm() {
        let spec = MixtureSimSpec {
            components: vec![MixtureComponent {
                copula: CopulaSpec::one_param(CopulaFamily::GUMBEL, 2.0).unwrap(),
                weight: 1.0,
                margin1: MarginalSpec::gamma(2.0, 1.0),
                margin2: MarginalSpec::gamma(3.0, 1.0),
            }],
            n: 400,
            seed: 4,
            n_covariates: 0,
        };
        let d = compose_dataset(&spec).unwrap();
        let x = vec![vec![1.0]; d.len()];
        let data = EmData { y1: &d.y1, y2: &d.y2, x1: &x, x2: &x };
        let m = em_fit(&data, &[CopulaFamily::GUMBEL], &EmConfig::default()).unwrap();
        let ifm = fit_copula_ifm(CopulaFamily::GUMBEL, &d.y1, &d.y2, &x, &x).unwrap();
        assert!((m.components[0].copula.theta() - ifm.record.spec.theta()).abs() < 1e-5);
        assert!((m.loglik - ifm.record.loglik).abs() < 1e-6 * m.loglik.abs());
        assert_eq!(m.n_params, ifm.record.n_params);
        assert!(m.responsibilities.iter().all(|r| r[0] == 1.0));
    }

    #[test]
    fn mixture_tdc_examples() {
        let (y1, y2, x) = toy();
        let data = EmData { y1: &y1, y2: &y2, x1: &x, x2: &x };
        let m = MixtureModel::from_parts(
            vec![
                comp(CopulaFamily::JOE, 1.7),
                comp(CopulaFamily::GUMBEL, 1.5),
                comp(CopulaFamily::SURVIVAL_CLAYTON, 1.3),
            ],
            vec![1.0 / 3.0; 3],
            &data,
        )
        .unwrap();
        assert!((mixture_tdc(&m).upper - 0.499).abs() < 1e-3);
        let m = MixtureModel::from_parts(
            vec![comp(CopulaFamily::FRANK, 2.02), comp(CopulaFamily::CLAYTON, 0.5)],
            vec![0.49, 0.51],
            &data,
        )
        .unwrap();
        let t = mixture_tdc(&m);
        assert!((t.lower - 0.1275).abs() < 1e-12 && t.upper == 0.0);
    }

    #[test]
    fn classify_ties_go_low() {
        let (y1, y2, x) = toy();
        let data = EmData { y1: &y1, y2: &y2, x1: &x, x2: &x };
        let c = comp(CopulaFamily::FRANK, 1.0);
        let m = MixtureModel::from_parts(vec![c.clone(), c], vec![0.5, 0.5], &data).unwrap();
        assert_eq!(classify(&m), vec![0; 6]);
    }

    #[test]
    fn tuples_enumerate_pool() {
        assert_eq!(family_tuples(&[CopulaFamily::GUMBEL], 2).len(), 1);
        assert_eq!(family_tuples(&CopulaFamily::POOL, 2).len(), 81);
        let t = family_tuples(&[CopulaFamily::GUMBEL, CopulaFamily::FRANK], 2);
        assert_eq!(t[1], vec![CopulaFamily::GUMBEL, CopulaFamily::FRANK]);
    }
}
