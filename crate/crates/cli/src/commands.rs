//! Argument definitions and subcommand implementations.

use clap::{Args, Parser, Subcommand, ValueEnum};
use tailblend::bma::{blend_tdc, bma_weights, tdc_method1, tdc_method2, BmaEnsemble, FittedModel, Method2Result};
use tailblend::copula::{CopulaFamily, CopulaSpec, TdcPair};
use tailblend::data::Dataset;
use tailblend::empirical::{estimate_tdc_empirical, pseudo_observations, PseudoSample, Tail};
use tailblend::fitting::{fit_copula_ifm, fit_pool_mple, FitRecord};
use tailblend::mixture::{
    classify, permutation_search, select_components, EmConfig, EmData, MixtureModel, PermutationFit,
};
use tailblend::sampling::{compose_dataset, MixtureSimSpec};
use tailblend::studies;

use crate::error::{CliError, CliResult};
use crate::io::{dataset_to_csv, load_dataset, read_input, write_output, LoadDiagnostics};
use crate::report::{
    round_weights, ComponentRow, DistanceRow, EmpiricalRow, EstimateRow, FitFailure, FitRow, GSelectionRow, MarginRow,
    Meta, Method1Block, Method2Block, MixtureBlock, RankingRow, Report,
};

#[derive(Debug, Parser)]
#[command(name = "tailblend", version, about = "Tail dependence of bivariate losses by copula model averaging")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "TAILBLEND_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent or `-`.
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from a study preset or a JSON mixture specification.
    Simulate(SimulateArgs),
    /// Nonparametric tail-dependence estimates.
    TdcEmpirical(EmpiricalArgs),
    /// Fit each copula family and tabulate the criteria.
    Fit(FitArgs),
    /// Blend the family fits by BIC weights.
    Bma(BmaArgs),
    /// Finite mixture of copula regressions fitted by EM.
    Mixture(MixtureArgs),
    /// Empirical estimates, fits and both blending methods in one report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Comma-separated input with a header row; `-` reads standard input.
    #[arg(default_value = "-")]
    pub input: String,
    /// The two response columns.
    #[arg(long, value_delimiter = ',', default_value = "y1,y2")]
    pub columns: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub study: Option<u8>,
    /// JSON mixture specification; its seed defaults to `--seed`.
    #[arg(long)]
    pub spec: Option<String>,
    /// Sample size, overriding the preset.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmpiricalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub estimators: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    /// Maximum pseudo-likelihood on ranks.
    Mple,
    /// Gamma regression margins, then the copula.
    Ifm,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = DEFAULT_POOL)]
    pub families: Vec<CopulaFamily>,
    #[arg(long, value_enum, default_value_t = FitMethod::Mple)]
    pub method: FitMethod,
    /// Covariate columns for the margins (IFM only).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BmaArgs {
    /// Data file, or a report written by `fit`.
    #[arg(default_value = "-")]
    pub input: String,
    #[arg(long, value_delimiter = ',', default_value = "y1,y2")]
    pub columns: Vec<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = DEFAULT_POOL)]
    pub families: Vec<CopulaFamily>,
    /// 1: weighted tail coefficients; 2: empirical estimates on blended samples.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub method: u8,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
}

#[derive(Debug, Args)]
pub struct MixtureOptions {
    /// Number of components.
    #[arg(long, conflicts_with = "max_g")]
    pub g: Option<usize>,
    /// Choose the number of components in `1..=max-g` by AIC.
    #[arg(long)]
    pub max_g: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// EM starts per family tuple (hierarchical, then random).
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct MixtureArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = DEFAULT_POOL)]
    pub families: Vec<CopulaFamily>,
    #[command(flatten)]
    pub options: MixtureOptions,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_family, default_value = DEFAULT_POOL)]
    pub families: Vec<CopulaFamily>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub estimators: Vec<u8>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Add a mixture block when `--g` or `--max-g` is given.
    #[command(flatten)]
    pub mixture: MixtureOptions,
}

const DEFAULT_POOL: &str = "t,gaussian,joe,survival-joe,gumbel,survival-gumbel,clayton,survival-clayton,frank";

fn parse_family(s: &str) -> Result<CopulaFamily, String> {
    s.parse().map_err(|e: tailblend::Error| e.to_string())
}

pub fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Simulate(a) => write_output(out, &dataset_to_csv(&simulate(&a, seed)?)?),
        Command::TdcEmpirical(a) => crate::report::render_report(&empirical_report(&a, seed)?, out),
        Command::Fit(a) => crate::report::render_report(&fit_report(&a, seed)?, out),
        Command::Bma(a) => crate::report::render_report(&bma_report(&a, seed)?, out),
        Command::Mixture(a) => crate::report::render_report(&mixture_report(&a, seed)?, out),
        Command::Report(a) => crate::report::render_report(&full_report(&a, seed)?, out),
    }
}

fn meta(command: &str, seed: u64, n_obs: usize, diag: LoadDiagnostics) -> Meta {
    Meta {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: Some(seed),
        n_obs: Some(n_obs),
        rows_rejected: diag.rejected,
        fit_method: None,
    }
}

fn y_columns(columns: &[String]) -> CliResult<[&str; 2]> {
    match columns {
        [a, b] => Ok([a.as_str(), b.as_str()]),
        _ => Err(CliError::Usage(format!(
            "--columns takes exactly two names, got {}",
            columns.len()
        ))),
    }
}

fn load(input: &InputArgs, covariates: &[String]) -> CliResult<(Dataset, LoadDiagnostics)> {
    load_dataset(&input.input, y_columns(&input.columns)?, covariates)
}

fn check_positive(data: &Dataset) -> CliResult<()> {
    if data.y1.iter().chain(&data.y2).any(|&y| y <= 0.0) {
        return Err(CliError::Data("gamma margins need strictly positive responses".into()));
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs, seed: u64) -> CliResult<Dataset> {
    if let Some(path) = &args.spec {
        let mut value: serde_json::Value = serde_json::from_str(&read_input(path)?)?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| CliError::Data("specification must be a JSON object".into()))?;
        obj.entry("seed").or_insert(seed.into());
        if let Some(n) = args.n {
            obj.insert("n".into(), n.into());
        }
        let spec: MixtureSimSpec = serde_json::from_value(value)?;
        return Ok(compose_dataset(&spec)?);
    }
    let study = args.study.ok_or_else(|| CliError::Usage("either --study or --spec is required".into()))?;
    Ok(studies::simulate_study(study, args.n, seed)?)
}

fn empirical_rows(ps: &PseudoSample, estimators: &[u8]) -> CliResult<Vec<EmpiricalRow>> {
    let mut rows = Vec::new();
    for &e in estimators {
        for tail in [Tail::Lower, Tail::Upper] {
            let est = estimate_tdc_empirical(ps, e, tail)?;
            rows.push(EmpiricalRow {
                estimator: e,
                tail: tail_name(tail).into(),
                value: est.value,
                raw: est.raw,
                k_used: est.k_used,
            });
        }
    }
    Ok(rows)
}

fn tail_name(tail: Tail) -> &'static str {
    match tail {
        Tail::Lower => "lower",
        Tail::Upper => "upper",
    }
}

pub fn empirical_report(args: &EmpiricalArgs, seed: u64) -> CliResult<Report> {
    let (data, diag) = load(&args.input, &[])?;
    let ps = pseudo_observations(&data.pairs())?;
    Ok(Report {
        meta: meta("tdc-empirical", seed, data.len(), diag),
        empirical: empirical_rows(&ps, &args.estimators)?,
        ..Report::default()
    })
}

/// Successful fits in pool order, and the failures.
fn fit_families(
    data: &Dataset,
    families: &[CopulaFamily],
    method: FitMethod,
    covariates: &[String],
) -> CliResult<(Vec<FitRecord>, Vec<FitFailure>)> {
    let results: Vec<tailblend::Result<FitRecord>> = match method {
        FitMethod::Mple => fit_pool_mple(families, &pseudo_observations(&data.pairs())?),
        FitMethod::Ifm => {
            check_positive(data)?;
            let x = data.design(covariates)?;
            families
                .iter()
                .map(|&f| fit_copula_ifm(f, &data.y1, &data.y2, &x, &x).map(|r| r.record))
                .collect()
        }
    };
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for (family, r) in families.iter().zip(results) {
        match r {
            Ok(f) => fits.push(f),
            Err(e) => failures.push(FitFailure {
                family: family.to_string(),
                error: e.to_string(),
            }),
        }
    }
    if fits.is_empty() {
        return Err(CliError::Fit(format!("all {} fits failed", families.len())));
    }
    Ok((fits, failures))
}

fn fit_rows(fits: &[FitRecord], weights: &[f64]) -> Vec<FitRow> {
    let rounded = round_weights(weights);
    fits.iter()
        .zip(rounded)
        .map(|(f, w)| FitRow {
            family: f.spec.family.to_string(),
            theta: f.spec.theta(),
            df: f.spec.df(),
            loglik: f.loglik,
            n_params: f.n_params,
            n_obs: f.n_obs,
            aic: f.aic,
            bic: f.bic,
            weight: Some(w),
            lambda_lower: f.tdc.lower,
            lambda_upper: f.tdc.upper,
            converged: f.converged,
            at_boundary: f.at_boundary,
        })
        .collect()
}

fn method1_block(families: &[String], tdcs: &[TdcPair], weights: &[f64], blended: TdcPair) -> Method1Block {
    let best = (0..weights.len()).fold(0, |b, k| if weights[k] > weights[b] { k } else { b });
    Method1Block {
        lambda_lower: blended.lower,
        lambda_upper: blended.upper,
        best_family: families[best].clone(),
        best_lambda_lower: tdcs[best].lower,
        best_lambda_upper: tdcs[best].upper,
    }
}

fn ensemble_method1(fits: &[FitRecord], ens: &BmaEnsemble) -> Method1Block {
    let names: Vec<String> = fits.iter().map(|f| f.spec.family.to_string()).collect();
    method1_block(&names, &ens.tdcs, &ens.weights, ens.blended)
}

pub fn fit_report(args: &FitArgs, seed: u64) -> CliResult<Report> {
    let (data, diag) = load(&args.input, &args.covariates)?;
    let (fits, failures) = fit_families(&data, &args.families, args.method, &args.covariates)?;
    let ens = BmaEnsemble::new(&fits)?;
    let mut m = meta("fit", seed, data.len(), diag);
    m.fit_method = Some(format!("{:?}", args.method).to_ascii_lowercase());
    Ok(Report {
        meta: m,
        fits: fit_rows(&fits, &ens.weights),
        fit_failures: failures,
        method1: Some(ensemble_method1(&fits, &ens)),
        ..Report::default()
    })
}

fn method2_block(res: &Method2Result) -> Method2Block {
    let row = |d: tailblend::bma::Distances| DistanceRow {
        wasserstein: d.wasserstein,
        l2_star: d.l2_star,
    };
    Method2Block {
        reps: res.reps,
        n: res.n,
        counts: res.counts.clone(),
        estimates: res
            .estimates
            .iter()
            .map(|e| EstimateRow {
                estimator: e.estimator,
                tail: tail_name(e.tail).into(),
                mean: e.mean,
                sd: e.sd,
            })
            .collect(),
        distances: res.distances.map(row),
        mean_distances: res.mean_distances.map(row),
    }
}

/// Method 1 (and 2) from a fit report, without access to the data.
fn bma_from_report(report: Report, args: &BmaArgs, seed: u64) -> CliResult<Report> {
    if report.fits.is_empty() {
        return Err(CliError::Data("the input report has no fits".into()));
    }
    let bics: Vec<f64> = report.fits.iter().map(|f| f.bic).collect();
    let tdcs: Vec<TdcPair> = report
        .fits
        .iter()
        .map(|f| TdcPair::new(f.lambda_lower, f.lambda_upper))
        .collect();
    let weights = bma_weights(&bics)?;
    let names: Vec<String> = report.fits.iter().map(|f| f.family.clone()).collect();
    let method1 = method1_block(&names, &tdcs, &weights, blend_tdc(&tdcs, &weights));
    let n = report.fits[0].n_obs;
    let method2 = if args.method == 2 {
        let models = report
            .fits
            .iter()
            .map(|f| Ok(FittedModel::Copula(CopulaSpec::new(f.family.parse()?, f.theta, f.df)?)))
            .collect::<tailblend::Result<Vec<_>>>()?;
        Some(method2_block(&tdc_method2(&models, &weights, n, args.reps, seed, None)?))
    } else {
        None
    };
    let mut fits = report.fits;
    for (row, w) in fits.iter_mut().zip(round_weights(&weights)) {
        row.weight = Some(w);
    }
    Ok(Report {
        meta: Meta {
            command: "bma".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: Some(seed),
            n_obs: Some(n),
            rows_rejected: report.meta.rows_rejected,
            fit_method: report.meta.fit_method,
        },
        fits,
        fit_failures: report.fit_failures,
        method1: Some(method1),
        method2,
        ..Report::default()
    })
}

pub fn bma_report(args: &BmaArgs, seed: u64) -> CliResult<Report> {
    let text = read_input(&args.input)?;
    if text.trim_start().starts_with('{') {
        return bma_from_report(crate::report::parse_report(&text)?, args, seed);
    }
    let (data, diag) = crate::io::parse_dataset(&text, y_columns(&args.columns)?, &[])?;
    let ps = pseudo_observations(&data.pairs())?;
    let (fits, failures) = fit_families(&data, &args.families, FitMethod::Mple, &[])?;
    let ens = BmaEnsemble::new(&fits)?;
    let method2 = if args.method == 2 {
        Some(method2_block(&run_method2(&fits, &ens, &ps, args.reps, seed)?))
    } else {
        None
    };
    let mut m = meta("bma", seed, data.len(), diag);
    m.fit_method = Some("mple".into());
    Ok(Report {
        meta: m,
        fits: fit_rows(&fits, &ens.weights),
        fit_failures: failures,
        method1: Some(ensemble_method1(&fits, &ens)),
        method2,
        ..Report::default()
    })
}

fn run_method2(
    fits: &[FitRecord],
    ens: &BmaEnsemble,
    ps: &PseudoSample,
    reps: usize,
    seed: u64,
) -> CliResult<Method2Result> {
    let models: Vec<FittedModel> = fits.iter().map(|f| FittedModel::Copula(f.spec)).collect();
    Ok(tdc_method2(&models, &ens.weights, ps.n, reps, seed, Some(ps))?)
}

/// Smallest share of rows whose class differs from the given label, over
/// all relabellings of the classes.
pub fn misclassification(classes: &[usize], labels: &[usize], g: usize) -> f64 {
    fn permutations(g: usize) -> Vec<Vec<usize>> {
        if g == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in permutations(g - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, g - 1);
                out.push(q);
            }
        }
        out
    }
    let best = permutations(g)
        .iter()
        .map(|perm| {
            classes
                .iter()
                .zip(labels)
                .filter(|(&c, &l)| perm.get(l) != Some(&c))
                .count()
        })
        .min()
        .unwrap_or(classes.len());
    best as f64 / classes.len().max(1) as f64
}

fn margin_row(m: &tailblend::fitting::GammaGlmFit) -> MarginRow {
    MarginRow {
        coefficients: m.coefficients.clone(),
        shape: m.shape,
    }
}

fn ranking_row(f: &PermutationFit) -> RankingRow {
    RankingRow {
        families: f.families.iter().map(ToString::to_string).collect(),
        loglik: f.model.as_ref().map(|m| m.loglik),
        aic: f.model.as_ref().map(|m| m.aic),
        bic: f.model.as_ref().map(|m| m.bic),
        error: f.error.clone(),
    }
}

/// Fits the mixture and summarises the best model by BIC.
pub fn mixture_block(
    data: &Dataset,
    pool: &[CopulaFamily],
    opts: &MixtureOptions,
    seed: u64,
) -> CliResult<MixtureBlock> {
    check_positive(data)?;
    let x = data.design(&opts.covariates)?;
    let em = EmData {
        y1: &data.y1,
        y2: &data.y2,
        x1: &x,
        x2: &x,
    };
    let cfg = EmConfig {
        restarts: opts.restarts,
        seed,
        ..EmConfig::default()
    };
    let (ranked, g_selection) = match opts.max_g {
        Some(max_g) => {
            let sel = select_components(&em, pool, max_g, &cfg)?;
            let rows = sel
                .searches
                .iter()
                .filter_map(|(g, fits)| {
                    let m = fits.first()?.model.as_ref()?;
                    Some(GSelectionRow {
                        g: *g,
                        families: m.families().iter().map(ToString::to_string).collect(),
                        aic: m.aic,
                        bic: m.bic,
                    })
                })
                .collect();
            let chosen = sel
                .searches
                .into_iter()
                .find(|(g, _)| *g == sel.chosen_g)
                .map(|(_, f)| f)
                .unwrap_or_default();
            (chosen, rows)
        }
        None => (permutation_search(&em, pool, opts.g.unwrap_or(2), &cfg)?, Vec::new()),
    };
    let models: Vec<&MixtureModel> = ranked.iter().filter_map(|f| f.model.as_ref()).collect();
    let best: &MixtureModel = models
        .first()
        .copied()
        .ok_or_else(|| CliError::Fit("every family tuple failed to fit".into()))?;
    let owned: Vec<MixtureModel> = models.iter().map(|&m| m.clone()).collect();
    let blended = tdc_method1(&owned)?;
    let classes = classify(best);
    let mixing = round_weights(&best.mixing);
    let tdc = best.tdc();
    let components = best
        .components
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let t = c.copula.tdc_unchecked();
            ComponentRow {
                family: c.copula.family.to_string(),
                theta: c.copula.theta(),
                df: c.copula.df(),
                mixing: mixing[k],
                margin1: margin_row(&c.margin1),
                margin2: margin_row(&c.margin2),
                lambda_lower: t.lower,
                lambda_upper: t.upper,
                size: classes.iter().filter(|&&z| z == k).count(),
            }
        })
        .collect();
    Ok(MixtureBlock {
        g: best.g(),
        covariates: opts.covariates.clone(),
        components,
        loglik: best.loglik,
        aic: best.aic,
        bic: best.bic,
        iterations: best.iterations,
        converged: best.converged,
        lambda_lower: tdc.lower,
        lambda_upper: tdc.upper,
        bma_lambda_lower: blended.lower,
        bma_lambda_upper: blended.upper,
        ranking: ranked.iter().map(ranking_row).collect(),
        g_selection,
        misclassification: data
            .labels
            .as_ref()
            .map(|l| misclassification(&classes, l, best.g())),
    })
}

pub fn mixture_report(args: &MixtureArgs, seed: u64) -> CliResult<Report> {
    let (data, diag) = load(&args.input, &args.options.covariates)?;
    let mut m = meta("mixture", seed, data.len(), diag);
    m.fit_method = Some("em".into());
    Ok(Report {
        meta: m,
        mixture: Some(mixture_block(&data, &args.families, &args.options, seed)?),
        ..Report::default()
    })
}

pub fn full_report(args: &ReportArgs, seed: u64) -> CliResult<Report> {
    let (data, diag) = load(&args.input, &args.mixture.covariates)?;
    let ps = pseudo_observations(&data.pairs())?;
    let (fits, failures) = fit_families(&data, &args.families, FitMethod::Mple, &[])?;
    let ens = BmaEnsemble::new(&fits)?;
    let method2 = run_method2(&fits, &ens, &ps, args.reps, seed)?;
    let mixture = if args.mixture.g.is_some() || args.mixture.max_g.is_some() {
        Some(mixture_block(&data, &args.families, &args.mixture, seed)?)
    } else {
        None
    };
    let mut m = meta("report", seed, data.len(), diag);
    m.fit_method = Some("mple".into());
    Ok(Report {
        meta: m,
        fits: fit_rows(&fits, &ens.weights),
        fit_failures: failures,
        empirical: empirical_rows(&ps, &args.estimators)?,
        method1: Some(ensemble_method1(&fits, &ens)),
        method2: Some(method2_block(&method2)),
        mixture,
    })
}
