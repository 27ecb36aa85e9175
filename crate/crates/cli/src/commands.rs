use std::time::Instant;

use pcskew::estimator::{self, PValueSequence, ResidualAnalysis, TestKind};
use pcskew::sim;
use pcskew::skew;

use crate::cli::{AlphaSweepArgs, EstimateArgs, MatrixArgs, SimulateArgs};
use crate::config::{self, SimOverrides};
use crate::document::{
    scree, AnalysisConfig, CommandName, ResultDocument, RunConfig, SweepPoint, SweepSeries, TestEstimate,
};
use crate::error::CliError;
use crate::input::{self, LoadedMatrix, ReadOptions};

fn load(args: &MatrixArgs) -> Result<LoadedMatrix, CliError> {
    let options = ReadOptions {
        delimiter: args.delimiter,
        orientation: args.orientation,
        header: args.header,
        center: args.center,
    };
    Ok(input::read_matrix(&args.input, &options)?)
}

/// Keeps the tests that can run on `n` observations. A test that was asked
/// for alone is an input error; within `both` it is skipped with a warning.
fn runnable_tests(requested: &[TestKind], n: usize, warnings: &mut Vec<String>) -> Result<Vec<TestKind>, CliError> {
    let mut kept = Vec::new();
    for &kind in requested {
        let problem = if n < kind.min_observations() {
            Some(format!("{kind} test needs at least {} observations, got {n}", kind.min_observations()))
        } else if kind == TestKind::Triples && n > skew::TRIPLES_MAX_N {
            Some(format!("triples test is limited to {} observations, got {n}", skew::TRIPLES_MAX_N))
        } else {
            None
        };
        match problem {
            Some(p) if requested.len() == 1 => return Err(CliError::input(p)),
            Some(p) => warnings.push(format!("{p}; skipped")),
            None => kept.push(kind),
        }
    }
    if kept.is_empty() {
        return Err(CliError::input(format!("no skewness test can run on n = {n} observations")));
    }
    if kept.contains(&TestKind::Triples) && n < skew::TRIPLES_ASYMPTOTIC_N {
        warnings.push(format!(
            "triples test with n = {n}: normal approximation is rough below {}",
            skew::TRIPLES_ASYMPTOTIC_N
        ));
    }
    Ok(kept)
}

struct Analysis {
    doc: ResultDocument,
    sequences: Vec<PValueSequence>,
}

/// Shared by `estimate` and `alpha-sweep`: residuals, p-values and `m̂` at `alpha`.
fn analyze(
    command: CommandName,
    matrix: &MatrixArgs,
    alpha: f64,
    tests: &[TestKind],
    max_k: Option<usize>,
) -> Result<Analysis, CliError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let loaded = load(matrix)?;
    let mut warnings = loaded.warnings;
    let n = loaded.matrix.n();
    let tests = runnable_tests(tests, n, &mut warnings)?;
    let analysis = ResidualAnalysis::from_data(&loaded.matrix, max_k, false, matrix.standardize)?;
    if analysis.constant_columns > 0 {
        warnings.push(format!("{} constant columns were left unscaled", analysis.constant_columns));
    }
    let mut doc = ResultDocument::new(
        command,
        RunConfig::Analysis(AnalysisConfig {
            alpha,
            tests: tests.clone(),
            max_k: analysis.residuals.max_k(),
            max_k_requested: max_k,
            center: matrix.center,
            standardize: matrix.standardize,
            orientation: matrix.orientation,
            delimiter: matrix.delimiter,
            header: matrix.header,
            alphas: None,
        }),
    );
    let mut sequences = Vec::new();
    for &kind in &tests {
        let p = analysis.pvalues(kind)?;
        let degenerate = p.degenerate.iter().filter(|&&b| b).count();
        if degenerate > 0 {
            warnings.push(format!("{kind}: {degenerate} degenerate residual columns were assigned p = 0.5"));
        }
        let e = estimator::estimate_m(&p, alpha)?;
        if e.saturated {
            warnings.push(format!(
                "{kind}: no p-value exceeded alpha = {alpha} up to M = {}; the estimate is censored at M",
                p.max_k()
            ));
        }
        if doc.residual_skewness.is_empty() {
            doc.residual_skewness = p.skewness.clone();
        }
        doc.estimates.push(TestEstimate::from_estimate(&e));
        sequences.push(p);
    }
    doc.scree = scree(&analysis.gram_eigenvalues, n);
    doc.input = Some(loaded.fingerprint);
    doc.warnings = warnings;
    Ok(Analysis { doc, sequences })
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<ResultDocument, CliError> {
    let start = Instant::now();
    let a = analyze(
        CommandName::Estimate,
        &args.matrix,
        args.analysis.alpha,
        &args.analysis.test.kinds(),
        args.analysis.max_k,
    )?;
    let mut doc = a.doc;
    doc.timing.total_seconds = start.elapsed().as_secs_f64();
    Ok(doc)
}

fn sweep(sequences: &[PValueSequence], alphas: &[f64]) -> Result<Vec<SweepSeries>, CliError> {
    sequences
        .iter()
        .map(|p| {
            let points = estimator::alpha_sweep(p, alphas)?
                .into_iter()
                .map(|e| SweepPoint {
                    alpha: e.alpha,
                    m_hat: e.m_hat,
                    saturated: e.saturated,
                })
                .collect();
            Ok(SweepSeries { test: p.kind, points })
        })
        .collect()
}

pub fn cmd_alpha_sweep(args: &AlphaSweepArgs) -> Result<ResultDocument, CliError> {
    let start = Instant::now();
    if args.alphas.is_empty() {
        return Err(CliError::config("empty --alphas grid"));
    }
    if let Some(bad) = args.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(CliError::config(format!("alpha must lie in (0, 1), got {bad}")));
    }
    let mut doc = match (&args.from, &args.input) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            let mut prior: ResultDocument = serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("{} is not a result document: {e}", path.display())))?;
            if prior.estimates.is_empty() {
                return Err(CliError::input(format!("{} holds no p-values", path.display())));
            }
            if let Some(choice) = args.test {
                let wanted = choice.kinds();
                prior.estimates.retain(|e| wanted.contains(&e.test));
                if prior.estimates.is_empty() {
                    return Err(CliError::input(format!("{} holds no p-values for {choice:?}", path.display())));
                }
            }
            let sequences: Vec<PValueSequence> = prior
                .estimates
                .iter()
                .map(|e| PValueSequence::from_values(e.test, e.p_values.clone()))
                .collect();
            if let RunConfig::Analysis(cfg) = &mut prior.config {
                cfg.alphas = Some(args.alphas.clone());
            }
            prior.command = CommandName::AlphaSweep;
            prior.alpha_sweep = sweep(&sequences, &args.alphas)?;
            prior.timing.reused_pvalues = true;
            prior
        }
        (None, Some(input)) => {
            let matrix = MatrixArgs {
                input: input.clone(),
                delimiter: args.delimiter,
                orientation: args.orientation,
                header: args.header,
                center: args.center,
                standardize: args.standardize,
            };
            let tests = args.test.unwrap_or(crate::cli::TestChoice::Both).kinds();
            let a = analyze(CommandName::AlphaSweep, &matrix, args.alpha, &tests, args.max_k)?;
            let mut doc = a.doc;
            if let RunConfig::Analysis(cfg) = &mut doc.config {
                cfg.alphas = Some(args.alphas.clone());
            }
            doc.alpha_sweep = sweep(&a.sequences, &args.alphas)?;
            doc.timing.reused_pvalues = false;
            doc
        }
        (None, None) => return Err(CliError::config("alpha-sweep needs a data matrix or --from")),
    };
    doc.timing.total_seconds = start.elapsed().as_secs_f64();
    Ok(doc)
}

fn flag_overrides(args: &SimulateArgs) -> Result<SimOverrides, CliError> {
    Ok(SimOverrides {
        case: args.case.as_deref().map(config::parse_case).transpose()?,
        d: args.d,
        n: args.n,
        m: args.m,
        s: args.s,
        g: args.g,
        beta: args.beta,
        distribution: args
            .dist
            .as_deref()
            .map(|s| s.parse().map_err(|e: sim::SimError| CliError::config(e.to_string())))
            .transpose()?,
        seed: args.seed,
        replicates: args.reps,
        alpha: args.alpha,
        kn_alpha: args.kn_alpha,
        estimators: args.estimators.as_deref().map(config::parse_estimators).transpose()?,
        max_k: args.max_k,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<ResultDocument, CliError> {
    let start = Instant::now();
    let base = match &args.config {
        Some(path) => SimOverrides::read_config(path)?,
        None => SimOverrides::default(),
    };
    let (spec, mut warnings) = base.merged(&flag_overrides(args)?).to_spec();
    let summary = sim::run_replicates(&spec)?;
    for (method, s) in &summary.methods {
        if s.failures > 0 {
            let first = summary
                .replicates
                .iter()
                .find_map(|r| r.errors.get(method))
                .cloned()
                .unwrap_or_default();
            warnings.push(format!("{method}: {} of {} replicates failed (first: {first})", s.failures, spec.replicates));
        }
    }
    let mut doc = ResultDocument::new(CommandName::Simulate, RunConfig::Simulation(spec));
    doc.simulation = Some(summary);
    doc.warnings = warnings;
    doc.timing.total_seconds = start.elapsed().as_secs_f64();
    Ok(doc)
}
