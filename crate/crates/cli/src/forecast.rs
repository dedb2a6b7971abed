use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use stationing::forecast::io::{read_labeled_trips, write_labeled_trips, ModelDocument};
use stationing::forecast::{
    cross_entropy, fit_isotonic, permutation_test, select_feature_set, train_logistic, Categorical,
    FeatureSpec, LabeledTrip, LogisticModel, Numerical, TrainOptions, DEFAULT_L2_LAMBDA,
    DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use stationing::rng::seeded;
use stationing::scenario::GroundTruth;

use crate::errors;
use crate::io::{ensure_dir, fmt_f64, require_file, write_csv, write_json};
use crate::manifest::Recorder;
use crate::Globals;

pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const MODEL_FILE: &str = "model.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const EVAL_FILE: &str = "eval.json";
pub const SELECTION_FILE: &str = "selection.csv";
pub const PERM_TEST_FILE: &str = "perm_test.csv";

#[derive(Debug, Subcommand, Serialize)]
pub enum ForecastCommand {
    /// Split labeled trips, fit a logistic model and report cross-entropy.
    Train(TrainArgs),
    /// Cross-entropy of a saved model on a labeled file.
    Eval(EvalArgs),
    /// Rank every subset of categorical features by test cross-entropy.
    SelectFeatures(SelectArgs),
    /// Pairwise permutation tests of disruption rates between routes.
    PermTest(PermArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// Labeled trips CSV.
    #[arg(long)]
    pub labeled: PathBuf,
    /// Share of rows held out for testing (seeded random split).
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Categorical features (comma separated).
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "route_direction,service_window,day_of_week,ridership_category,year,month"
    )]
    pub categoricals: Vec<String>,
    /// Numeric features (comma separated; empty for none).
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "precipitation,temperature"
    )]
    pub numericals: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_L2_LAMBDA)]
    pub l2: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Store an isotonic calibrator fitted on the training scores.
    #[arg(long)]
    pub calibrate: bool,
    /// Ground-truth model; its test cross-entropy is reported alongside.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub labeled: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    /// Numeric features included in every model.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "precipitation,temperature"
    )]
    pub numericals: Vec<String>,
    /// Candidate categoricals (default: all six).
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "route_direction,service_window,day_of_week,ridership_category,year,month"
    )]
    pub candidates: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct PermArgs {
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long, default_value_t = 999)]
    pub n_perm: usize,
}

pub fn run(globals: &Globals, cmd: ForecastCommand) -> Result<()> {
    ensure_dir(&globals.out)?;
    match &cmd {
        ForecastCommand::Train(a) => train(globals, a, &cmd),
        ForecastCommand::Eval(a) => eval(globals, a, &cmd),
        ForecastCommand::SelectFeatures(a) => select(globals, a, &cmd),
        ForecastCommand::PermTest(a) => perm(globals, a, &cmd),
    }
}

fn parse_list<T: std::str::FromStr<Err = String>>(items: &[String]) -> Result<Vec<T>> {
    items
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(errors::usage))
        .collect()
}

fn load_labeled(path: &Path, rec: &mut Recorder) -> Result<Vec<LabeledTrip>> {
    require_file(path)?;
    let rows = read_labeled_trips(path).with_context(|| format!("reading {}", path.display()))?;
    rec.input(path);
    if rows.is_empty() {
        return Err(errors::usage(format!("{} has no rows", path.display())));
    }
    Ok(rows)
}

/// Seeded random split; each part keeps the file order.
pub fn split(
    rows: Vec<LabeledTrip>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledTrip>, Vec<LabeledTrip>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(errors::usage(
            "--test-fraction must lie strictly between 0 and 1",
        ));
    }
    let n = rows.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (row, t) in rows.into_iter().zip(is_test) {
        if t {
            test.push(row);
        } else {
            train.push(row);
        }
    }
    Ok((train, test))
}

fn labels(rows: &[LabeledTrip]) -> Vec<u8> {
    rows.iter().map(|r| r.label).collect()
}

fn positive_rate(rows: &[LabeledTrip]) -> f64 {
    rows.iter().map(|r| r.label as f64).sum::<f64>() / rows.len() as f64
}

fn raw_scores(model: &LogisticModel, rows: &[LabeledTrip]) -> Result<Vec<f64>> {
    Ok(rows
        .par_iter()
        .map(|r| model.predict_proba(&r.features))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Scores of a saved model: calibrated when it carries a calibrator.
fn doc_scores(doc: &ModelDocument, rows: &[LabeledTrip]) -> Result<Vec<f64>> {
    let raw = raw_scores(&doc.model, rows)?;
    match &doc.calibrator {
        Some(cal) => Ok(raw
            .into_iter()
            .map(|p| cal.calibrate(p))
            .collect::<std::result::Result<Vec<_>, _>>()?),
        None => Ok(raw),
    }
}

#[derive(Debug, Serialize)]
struct Split {
    train_ce: f64,
    test_ce: f64,
}

#[derive(Debug, Serialize)]
struct Metrics {
    v: u32,
    n_train: usize,
    n_test: usize,
    train_positive_rate: f64,
    test_positive_rate: f64,
    categoricals: Vec<Categorical>,
    numericals: Vec<Numerical>,
    converged: bool,
    iterations: usize,
    /// Cross-entropy of the saved model (calibrated if it stores a
    /// calibrator).
    train_ce: f64,
    test_ce: f64,
    raw: Split,
    calibrated: Split,
    truth_test_ce: Option<f64>,
}

fn train(globals: &Globals, a: &TrainArgs, cmd: &ForecastCommand) -> Result<()> {
    let seed = globals.seed();
    let mut rec = Recorder::new();
    let cats: Vec<Categorical> = parse_list(&a.fit.categoricals)?;
    let nums: Vec<Numerical> = parse_list(&a.fit.numericals)?;
    let truth = match &a.truth {
        Some(p) => {
            require_file(p)?;
            rec.input(p);
            Some(GroundTruth::load(p)?)
        }
        None => None,
    };
    let rows = load_labeled(&a.split.labeled, &mut rec)?;
    let (train_rows, test_rows) = split(rows, a.split.test_fraction, seed)?;
    info!(
        "{} training rows, {} test rows",
        train_rows.len(),
        test_rows.len()
    );
    write_labeled_trips(&globals.out.join(TRAIN_FILE), &train_rows)?;
    write_labeled_trips(&globals.out.join(TEST_FILE), &test_rows)?;
    rec.output(TRAIN_FILE);
    rec.output(TEST_FILE);

    let spec = FeatureSpec::fit(train_rows.iter().map(|r| &r.features), &cats, &nums);
    let trained = train_logistic(&train_rows, &spec, a.fit.l2, a.fit.max_iters, a.fit.tol)?;
    if !trained.report.converged {
        warn!("model saved without meeting the gradient tolerance");
    }
    let model = trained.model;
    let (y_train, y_test) = (labels(&train_rows), labels(&test_rows));
    let train_raw = raw_scores(&model, &train_rows)?;
    let test_raw = raw_scores(&model, &test_rows)?;
    let cal = fit_isotonic(&train_raw, &y_train)?;
    let calibrate = |s: &[f64]| -> Result<Vec<f64>> {
        Ok(s.iter()
            .map(|&p| cal.calibrate(p))
            .collect::<std::result::Result<Vec<_>, _>>()?)
    };
    let raw = Split {
        train_ce: cross_entropy(&train_raw, &y_train)?,
        test_ce: cross_entropy(&test_raw, &y_test)?,
    };
    let calibrated = Split {
        train_ce: cross_entropy(&calibrate(&train_raw)?, &y_train)?,
        test_ce: cross_entropy(&calibrate(&test_raw)?, &y_test)?,
    };
    let truth_test_ce = match &truth {
        Some(t) => {
            let p: Vec<f64> = test_rows
                .iter()
                .map(|r| t.probability(&r.features))
                .collect();
            Some(cross_entropy(&p, &y_test)?)
        }
        None => None,
    };

    let doc = ModelDocument::new(model, a.calibrate.then_some(cal));
    doc.save(&globals.out.join(MODEL_FILE))?;
    rec.output(MODEL_FILE);
    let (train_ce, test_ce) = if a.calibrate {
        (calibrated.train_ce, calibrated.test_ce)
    } else {
        (raw.train_ce, raw.test_ce)
    };
    let metrics = Metrics {
        v: 1,
        n_train: train_rows.len(),
        n_test: test_rows.len(),
        train_positive_rate: positive_rate(&train_rows),
        test_positive_rate: positive_rate(&test_rows),
        categoricals: spec.included_categoricals(),
        numericals: spec.included_numericals(),
        converged: trained.report.converged,
        iterations: trained.report.iterations,
        train_ce,
        test_ce,
        raw,
        calibrated,
        truth_test_ce,
    };
    write_json(&globals.out.join(METRICS_FILE), &metrics)?;
    rec.output(METRICS_FILE);
    info!("train CE {train_ce:.6}, test CE {test_ce:.6}");
    rec.finish(globals, "forecast train", seed, cmd)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Evaluation {
    v: u32,
    n: usize,
    positive_rate: f64,
    cross_entropy: f64,
    raw_cross_entropy: f64,
    calibrated: bool,
}

fn eval(globals: &Globals, a: &EvalArgs, cmd: &ForecastCommand) -> Result<()> {
    let mut rec = Recorder::new();
    require_file(&a.model)?;
    let doc = ModelDocument::load(&a.model)?;
    rec.input(&a.model);
    let rows = load_labeled(&a.labeled, &mut rec)?;
    let y = labels(&rows);
    let out = Evaluation {
        v: 1,
        n: rows.len(),
        positive_rate: positive_rate(&rows),
        cross_entropy: cross_entropy(&doc_scores(&doc, &rows)?, &y)?,
        raw_cross_entropy: cross_entropy(&raw_scores(&doc.model, &rows)?, &y)?,
        calibrated: doc.calibrator.is_some(),
    };
    write_json(&globals.out.join(EVAL_FILE), &out)?;
    rec.output(EVAL_FILE);
    rec.finish(globals, "forecast eval", globals.seed(), cmd)?;
    Ok(())
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    if items.is_empty() {
        return "(none)".into();
    }
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

fn select(globals: &Globals, a: &SelectArgs, cmd: &ForecastCommand) -> Result<()> {
    let seed = globals.seed();
    let mut rec = Recorder::new();
    let cands: Vec<Categorical> = parse_list(&a.candidates)?;
    let nums: Vec<Numerical> = parse_list(&a.numericals)?;
    let rows = load_labeled(&a.split.labeled, &mut rec)?;
    let (train_rows, test_rows) = split(rows, a.split.test_fraction, seed)?;
    let table = select_feature_set(
        &train_rows,
        &test_rows,
        &cands,
        &nums,
        TrainOptions::default(),
    )?;
    let csv_rows: Vec<Vec<String>> = table
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                join(&r.categoricals),
                join(&r.numericals),
                r.spec.n_columns().to_string(),
                fmt_f64(r.train_ce),
                fmt_f64(r.test_ce),
                r.converged.to_string(),
            ]
        })
        .collect();
    write_csv(
        &globals.out.join(SELECTION_FILE),
        &[
            "rank",
            "categoricals",
            "numericals",
            "n_columns",
            "train_ce",
            "test_ce",
            "converged",
        ],
        &csv_rows,
    )?;
    rec.output(SELECTION_FILE);
    rec.finish(globals, "forecast select-features", seed, cmd)?;
    Ok(())
}

fn perm(globals: &Globals, a: &PermArgs, cmd: &ForecastCommand) -> Result<()> {
    let seed = globals.seed();
    let mut rec = Recorder::new();
    let rows = load_labeled(&a.labeled, &mut rec)?;
    let mut by_route: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &rows {
        by_route
            .entry(r.features.route_direction.route_id.clone())
            .or_default()
            .push(r.label as f64);
    }
    let routes: Vec<&String> = by_route.keys().collect();
    let pairs: Vec<(usize, usize)> = (0..routes.len())
        .flat_map(|i| (i..routes.len()).map(move |j| (i, j)))
        .collect();
    let p_values = pairs
        .par_iter()
        .map(|&(i, j)| permutation_test(&by_route[routes[i]], &by_route[routes[j]], a.n_perm, seed))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut matrix = vec![vec![0.0; routes.len()]; routes.len()];
    for (&(i, j), p) in pairs.iter().zip(p_values) {
        matrix[i][j] = p;
        matrix[j][i] = p;
    }
    let mut header = vec!["route"];
    header.extend(routes.iter().map(|r| r.as_str()));
    let csv_rows: Vec<Vec<String>> = routes
        .iter()
        .zip(&matrix)
        .map(|(r, row)| {
            std::iter::once(r.to_string())
                .chain(row.iter().map(|&p| fmt_f64(p)))
                .collect()
        })
        .collect();
    write_csv(&globals.out.join(PERM_TEST_FILE), &header, &csv_rows)?;
    rec.output(PERM_TEST_FILE);
    rec.finish(globals, "forecast perm-test", seed, cmd)?;
    Ok(())
}
