//! L2-regularised logistic regression fitted by full-batch gradient descent
//! with Armijo backtracking. Initialisation is at zero, so a fit is a pure
//! function of its inputs.

use serde::{Deserialize, Serialize};

use super::features::{EncodedRow, FeatureSpec, LabeledTrip, TripFeatures};
use super::{Classifier, ForecastError, Result};

pub const DEFAULT_L2_LAMBDA: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-8;

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;
const MAX_STEP: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub l2_lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            l2_lambda: DEFAULT_L2_LAMBDA,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub spec: FeatureSpec,
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub l2_lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub converged: bool,
    pub grad_inf_norm: f64,
    /// Penalised mean cross-entropy at the returned parameters.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: LogisticModel,
    pub report: ConvergenceReport,
}

impl Trained {
    /// Turns a non-converged fit into [`ForecastError::DidNotConverge`],
    /// which still carries the last iterate.
    pub fn require_converged(self) -> Result<LogisticModel> {
        if self.report.converged {
            Ok(self.model)
        } else {
            Err(ForecastError::DidNotConverge {
                model: Box::new(self.model),
                iterations: self.report.iterations,
                grad_inf_norm: self.report.grad_inf_norm,
            })
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Keeps a probability strictly inside (0, 1).
fn open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl LogisticModel {
    pub fn linear_predictor(&self, features: &TripFeatures) -> Result<f64> {
        let row = self.spec.encode_sparse(features)?;
        Ok(self.intercept + sparse_dot(&self.spec, &row, &self.weights))
    }

    pub fn predict_proba(&self, features: &TripFeatures) -> Result<f64> {
        Ok(open_unit(sigmoid(self.linear_predictor(features)?)))
    }
}

impl Classifier for LogisticModel {
    fn predict_proba(&self, features: &TripFeatures) -> Result<f64> {
        LogisticModel::predict_proba(self, features)
    }
}

fn sparse_dot(spec: &FeatureSpec, row: &EncodedRow, w: &[f64]) -> f64 {
    let mut z = 0.0;
    for &c in &row.ones {
        z += w[c as usize];
    }
    for (col, x) in spec.numericals.iter().zip(&row.numeric) {
        z += w[col.column] * x;
    }
    z
}

/// Row access used by the optimiser.
trait Design {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn dot(&self, i: usize, w: &[f64]) -> f64;
    fn add_scaled(&self, i: usize, scale: f64, out: &mut [f64]);
}

struct EncodedDesign<'a> {
    rows: Vec<EncodedRow>,
    numeric_cols: Vec<usize>,
    n_cols: usize,
    _spec: &'a FeatureSpec,
}

impl Design for EncodedDesign<'_> {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn n_cols(&self) -> usize {
        self.n_cols
    }

    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        let row = &self.rows[i];
        let mut z = 0.0;
        for &c in &row.ones {
            z += w[c as usize];
        }
        for (&c, x) in self.numeric_cols.iter().zip(&row.numeric) {
            z += w[c] * x;
        }
        z
    }

    fn add_scaled(&self, i: usize, scale: f64, out: &mut [f64]) {
        let row = &self.rows[i];
        for &c in &row.ones {
            out[c as usize] += scale;
        }
        for (&c, x) in self.numeric_cols.iter().zip(&row.numeric) {
            out[c] += scale * x;
        }
    }
}

struct DenseDesign<'a> {
    rows: &'a [Vec<f64>],
    n_cols: usize,
}

impl Design for DenseDesign<'_> {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn n_cols(&self) -> usize {
        self.n_cols
    }

    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        self.rows[i].iter().zip(w).map(|(x, w)| x * w).sum()
    }

    fn add_scaled(&self, i: usize, scale: f64, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(&self.rows[i]) {
            *o += scale * x;
        }
    }
}

/// Penalised objective and its gradient. `params[0]` is the intercept and
/// is not penalised.
fn objective<D: Design>(x: &D, y: &[u8], lambda: f64, params: &[f64], grad: &mut [f64]) -> f64 {
    let n = x.n_rows() as f64;
    let (b0, w) = (params[0], &params[1..]);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let mut g0 = 0.0;
    {
        let gw = &mut grad[1..];
        for (i, &yi) in y.iter().enumerate().take(x.n_rows()) {
            let z = b0 + x.dot(i, w);
            let yi = f64::from(yi);
            loss += softplus(z) - yi * z;
            let r = sigmoid(z) - yi;
            g0 += r;
            x.add_scaled(i, r, gw);
        }
    }
    grad[0] = g0 / n;
    let mut penalty = 0.0;
    for (g, wj) in grad[1..].iter_mut().zip(w) {
        *g = *g / n + lambda * wj;
        penalty += wj * wj;
    }
    loss / n + 0.5 * lambda * penalty
}

fn gradient_descent<D: Design>(
    x: &D,
    y: &[u8],
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, ConvergenceReport) {
    let dim = x.n_cols() + 1;
    let mut params = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut f = objective(x, y, lambda, &params, &mut grad);

    let mut trial = vec![0.0; dim];
    let mut trial_grad = vec![0.0; dim];
    let mut step = 1.0_f64;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let g_inf = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if g_inf < tol {
            converged = true;
            break;
        }
        if iterations == max_iters {
            break;
        }
        let gg: f64 = grad.iter().map(|g| g * g).sum();

        step = (step * 2.0).min(MAX_STEP);
        let accepted = loop {
            for ((t, p), g) in trial.iter_mut().zip(&params).zip(&grad) {
                *t = p - step * g;
            }
            let ft = objective(x, y, lambda, &trial, &mut trial_grad);
            if ft <= f - ARMIJO_C * step * gg {
                break Some(ft);
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some(ft) => {
                std::mem::swap(&mut params, &mut trial);
                std::mem::swap(&mut grad, &mut trial_grad);
                f = ft;
            }
            // No descent possible at machine precision.
            None => break,
        }
    }

    let grad_inf_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    (
        params,
        ConvergenceReport {
            iterations,
            converged,
            grad_inf_norm,
            objective: f,
        },
    )
}

fn check_labels(y: &[u8]) -> Result<()> {
    if y.is_empty() {
        return Err(ForecastError::Empty);
    }
    if let Some(bad) = y.iter().find(|&&l| l > 1) {
        return Err(ForecastError::InvalidLabel(*bad));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(ForecastError::SingleClassData);
    }
    Ok(())
}

/// Fits a logistic model on the columns described by `spec`.
///
/// A fit that hits `max_iters` is still returned; its report has
/// `converged == false` and a warning is logged.
pub fn train_logistic(
    data: &[LabeledTrip],
    spec: &FeatureSpec,
    l2_lambda: f64,
    max_iters: usize,
    tol: f64,
) -> Result<Trained> {
    let y: Vec<u8> = data.iter().map(|d| d.label).collect();
    check_labels(&y)?;
    if !(l2_lambda >= 0.0) {
        return Err(ForecastError::InvalidOption(
            "l2_lambda must be nonnegative".into(),
        ));
    }
    let rows = data
        .iter()
        .map(|d| spec.encode_sparse(&d.features))
        .collect::<Result<Vec<_>>>()?;
    let design = EncodedDesign {
        rows,
        numeric_cols: spec.numericals.iter().map(|c| c.column).collect(),
        n_cols: spec.n_columns(),
        _spec: spec,
    };
    let (params, report) = gradient_descent(&design, &y, l2_lambda, max_iters, tol);
    if !report.converged {
        log::warn!(
            "logistic fit stopped after {} iterations (|grad|_inf = {:.3e})",
            report.iterations,
            report.grad_inf_norm
        );
    }
    Ok(Trained {
        model: LogisticModel {
            spec: spec.clone(),
            intercept: params[0],
            weights: params[1..].to_vec(),
            l2_lambda,
        },
        report,
    })
}

/// Fits intercept and weights on a raw dense matrix (no encoding, no
/// standardization). Returns `(intercept, weights, report)`.
pub fn fit_dense(
    rows: &[Vec<f64>],
    labels: &[u8],
    options: TrainOptions,
) -> Result<(f64, Vec<f64>, ConvergenceReport)> {
    check_labels(labels)?;
    if rows.len() != labels.len() {
        return Err(ForecastError::LengthMismatch {
            left: rows.len(),
            right: labels.len(),
        });
    }
    let n_cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(ForecastError::InvalidOption("ragged design matrix".into()));
    }
    let design = DenseDesign { rows, n_cols };
    let (params, report) = gradient_descent(
        &design,
        labels,
        options.l2_lambda,
        options.max_iters,
        options.tol,
    );
    Ok((params[0], params[1..].to_vec(), report))
}

/// Trainer producing [`LogisticModel`]s over a fixed feature selection.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticTrainer {
    pub categoricals: Vec<super::Categorical>,
    pub numericals: Vec<super::Numerical>,
    pub options: TrainOptions,
}

impl super::Trainer for LogisticTrainer {
    type Model = LogisticModel;

    fn fit(&self, data: &[LabeledTrip]) -> Result<LogisticModel> {
        let spec = FeatureSpec::fit(
            data.iter().map(|d| &d.features),
            &self.categoricals,
            &self.numericals,
        );
        let o = self.options;
        Ok(train_logistic(data, &spec, o.l2_lambda, o.max_iters, o.tol)?.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::features::*;
    use crate::forecast::metrics::cross_entropy;
    use crate::network::{Direction, RouteDirection};
    use rand::Rng;

    fn trip(window: ServiceWindow, label: u8) -> LabeledTrip {
        LabeledTrip {
            trip_id: String::new(),
            features: TripFeatures {
                route_direction: RouteDirection::new("R1", Direction::Inbound),
                ridership_category: RidershipCategory::Low,
                service_window: window,
                year: 2022,
                month: 1,
                day_of_week: DayOfWeek::Mon,
                precipitation: 0.0,
                temperature: 50.0,
            },
            label,
        }
    }

    fn fixed_model(intercept: f64) -> LogisticModel {
        let data = [trip(ServiceWindow::Morning, 0)];
        let spec = FeatureSpec::fit(
            data.iter().map(|d| &d.features),
            &[Categorical::ServiceWindow],
            &[],
        );
        LogisticModel {
            weights: vec![0.0; spec.n_columns()],
            spec,
            intercept,
            l2_lambda: 0.0,
        }
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = fixed_model(0.0);
        assert_eq!(
            m.predict_proba(&trip(ServiceWindow::Morning, 0).features)
                .unwrap(),
            0.5
        );
    }

    #[test]
    fn intercept_minus_ln3_predicts_quarter() {
        let m = fixed_model(-(3.0_f64).ln());
        let p = m
            .predict_proba(&trip(ServiceWindow::Morning, 0).features)
            .unwrap();
        assert!((p - 0.25).abs() < 1e-15);
        assert!((p + (1.0 - p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_class_rejected() {
        let data = vec![
            trip(ServiceWindow::Morning, 0),
            trip(ServiceWindow::MidDay, 0),
        ];
        let spec = FeatureSpec::fit(
            data.iter().map(|d| &d.features),
            &[Categorical::ServiceWindow],
            &[],
        );
        assert!(matches!(
            train_logistic(&data, &spec, 0.0, 100, 1e-8),
            Err(ForecastError::SingleClassData)
        ));
        assert!(matches!(
            train_logistic(&[], &spec, 0.0, 100, 1e-8),
            Err(ForecastError::Empty)
        ));
    }

    #[test]
    fn two_point_separator_is_monotone() {
        let rows = vec![vec![0.0], vec![1.0]];
        let (b0, w, _) = fit_dense(
            &rows,
            &[0, 1],
            TrainOptions {
                l2_lambda: 0.0,
                max_iters: 2000,
                tol: 1e-8,
            },
        )
        .unwrap();
        assert!(sigmoid(b0) < sigmoid(b0 + w[0]));
    }

    #[test]
    fn symmetric_labels_on_zero_features() {
        let rows = vec![vec![0.0, 0.0]; 6];
        let (b0, w, report) =
            fit_dense(&rows, &[1, 0, 1, 0, 1, 0], TrainOptions::default()).unwrap();
        assert!(report.converged);
        assert!(b0.abs() < 1e-9);
        assert!(w.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn separable_data_keeps_improving() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 - 9.5]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let mut last_ce = f64::INFINITY;
        let mut last_w = 0.0;
        for iters in [10, 100, 1000, 10_000] {
            let opts = TrainOptions {
                l2_lambda: 0.0,
                max_iters: iters,
                tol: 0.0,
            };
            let (b0, w, report) = fit_dense(&rows, &y, opts).unwrap();
            assert!(!report.converged);
            let p: Vec<f64> = rows.iter().map(|r| sigmoid(b0 + w[0] * r[0])).collect();
            let ce = cross_entropy(&p, &y).unwrap();
            assert!(ce < last_ce, "{iters}: {ce} !< {last_ce}");
            assert!(w[0] > last_w);
            last_ce = ce;
            last_w = w[0];
        }
        assert!(last_ce < 1e-3);
    }

    #[test]
    fn encoded_fit_matches_label_frequency_per_level() {
        // With one categorical and tiny L2 the fit reproduces per-level rates.
        let mut data = Vec::new();
        let mut rng = crate::rng::seeded(3);
        for _ in 0..400 {
            data.push(trip(
                ServiceWindow::Morning,
                u8::from(rng.random::<f64>() < 0.2),
            ));
            data.push(trip(
                ServiceWindow::Evening,
                u8::from(rng.random::<f64>() < 0.6),
            ));
        }
        let spec = FeatureSpec::fit(
            data.iter().map(|d| &d.features),
            &[Categorical::ServiceWindow],
            &[],
        );
        let trained = train_logistic(&data, &spec, 1e-6, 10_000, 1e-10).unwrap();
        for w in [ServiceWindow::Morning, ServiceWindow::Evening] {
            let rows: Vec<_> = data
                .iter()
                .filter(|d| d.features.service_window == w)
                .collect();
            let freq = rows.iter().filter(|d| d.label == 1).count() as f64 / rows.len() as f64;
            let p = trained.model.predict_proba(&trip(w, 0).features).unwrap();
            assert!((p - freq).abs() < 1e-3, "{w}: {p} vs {freq}");
        }
    }
}
