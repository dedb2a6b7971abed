//! Exhaustive search over categorical feature subsets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{Categorical, FeatureSpec, LabeledTrip, Numerical};
use super::logistic::{train_logistic, LogisticModel, TrainOptions};
use super::metrics::cross_entropy;
use super::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub categoricals: Vec<Categorical>,
    pub numericals: Vec<Numerical>,
    pub spec: FeatureSpec,
    pub train_ce: f64,
    pub test_ce: f64,
    pub converged: bool,
}

/// Mean cross-entropy of `model` on `data`.
pub fn evaluate(model: &LogisticModel, data: &[LabeledTrip]) -> Result<f64> {
    let p = data
        .iter()
        .map(|d| model.predict_proba(&d.features))
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<u8> = data.iter().map(|d| d.label).collect();
    cross_entropy(&p, &y)
}

/// Trains one model per subset of `candidates` (always including
/// `numericals`) and ranks them by test cross-entropy, ascending.
pub fn select_feature_set(
    train: &[LabeledTrip],
    test: &[LabeledTrip],
    candidates: &[Categorical],
    numericals: &[Numerical],
    options: TrainOptions,
) -> Result<Vec<SelectionRow>> {
    let mut cands = candidates.to_vec();
    cands.sort();
    cands.dedup();
    let n_subsets = 1usize << cands.len();

    let rows = (0..n_subsets)
        .into_par_iter()
        .map(|mask| {
            let chosen: Vec<Categorical> = cands
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, c)| *c)
                .collect();
            let spec = FeatureSpec::fit(train.iter().map(|d| &d.features), &chosen, numericals);
            let trained = train_logistic(
                train,
                &spec,
                options.l2_lambda,
                options.max_iters,
                options.tol,
            )?;
            let train_ce = evaluate(&trained.model, train)?;
            let test_ce = evaluate(&trained.model, test)?;
            Ok((
                mask,
                SelectionRow {
                    categoricals: chosen,
                    numericals: spec.included_numericals(),
                    spec,
                    train_ce,
                    test_ce,
                    converged: trained.report.converged,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = rows;
    rows.sort_by(|(ma, a), (mb, b)| a.test_ce.total_cmp(&b.test_ce).then(ma.cmp(mb)));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}
