//! Selection scoring: normalized validation + causal risk, the edge-count
//! confidence factor for lambda, and the ranking procedure.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fitness::causal_risk;
use crate::graph::CausalDag;
use crate::risks::{
    density_ratio, dev_risk, factual_mse, fit_propensity, iptw_risk, iwcv_risk,
};
use crate::zoo::CandidateModel;

/// Per-model record of raw and normalized risks, the combined score, and the
/// resulting rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub model_id: String,
    pub v_r_raw: f64,
    pub c_r_raw: f64,
    pub v_r_norm: f64,
    pub c_r_norm: f64,
    pub lambda: f64,
    pub icms: f64,
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_pehe: Option<f64>,
}

/// Confidence factor from graph agreement:
/// `|E(G)| / |E(G_prior) ∪ E(G_discovered)|`, edges compared as directed
/// pairs; 1 when the union is empty.
pub fn lambda_from_graphs(
    g: &CausalDag,
    g_prior: &CausalDag,
    g_discovered: &CausalDag,
) -> Result<f64> {
    let ids: BTreeSet<_> = g.node_ids().into_iter().collect();
    let prior_ids: BTreeSet<_> = g_prior.node_ids().into_iter().collect();
    let disc_ids: BTreeSet<_> = g_discovered.node_ids().into_iter().collect();
    if ids != prior_ids || ids != disc_ids {
        return Err(Error::NodeSetMismatch);
    }
    let mut union: BTreeSet<(u32, u32)> = BTreeSet::new();
    for e in g_prior.edges().iter().chain(g_discovered.edges()) {
        union.insert((e.src.0, e.dst.0));
    }
    if union.is_empty() {
        return Ok(1.0);
    }
    Ok(g.edge_count() as f64 / union.len() as f64)
}

/// Min-max normalization into [0, 1]; a degenerate range maps everything to 0
/// so a constant component never influences ordering.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("cannot normalize non-finite values".into()));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - min) / (max - min)).collect())
}

/// Combined selection score: `v_norm + lambda * c_norm`.
pub fn icms_score(v_norm: f64, c_norm: f64, lambda: f64) -> f64 {
    v_norm + lambda * c_norm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseRisk {
    Mse,
    Iptw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UdaWeighting {
    None,
    Iwcv,
    Dev,
}

/// Which validation risk feeds the score: a base per-sample loss, optionally
/// re-weighted toward the target covariate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskSpec {
    pub base: BaseRisk,
    pub uda: UdaWeighting,
}

impl RiskSpec {
    pub fn name(&self) -> String {
        let base = match self.base {
            BaseRisk::Mse => "mse",
            BaseRisk::Iptw => "iptw",
        };
        match self.uda {
            UdaWeighting::None => base.to_string(),
            UdaWeighting::Iwcv => format!("iwcv({base})"),
            UdaWeighting::Dev => format!("dev({base})"),
        }
    }
}

/// Scalar validation risk per model under `spec`. The propensity model (for
/// IPTW) is fitted on the validation set; importance weights come from a
/// source-vs-target discriminator over the covariates.
pub fn validation_risks(
    models: &[CandidateModel],
    val: &Dataset,
    target_x: &Dataset,
    spec: RiskSpec,
) -> Result<Vec<f64>> {
    let propensity = match spec.base {
        BaseRisk::Iptw => Some(fit_propensity(val)?),
        BaseRisk::Mse => None,
    };
    let weights = match spec.uda {
        UdaWeighting::None => None,
        _ => Some(density_ratio(&val.covariates(), target_x)?),
    };
    models
        .iter()
        .map(|m| {
            let losses = match &propensity {
                Some(p) => iptw_risk(m, val, p)?,
                None => factual_mse(m, val)?,
            };
            match (&spec.uda, &weights) {
                (UdaWeighting::None, _) => Ok(losses.mean()),
                (UdaWeighting::Iwcv, Some(w)) => iwcv_risk(&losses, w),
                (UdaWeighting::Dev, Some(w)) => dev_risk(&losses, w),
                _ => unreachable!("weights exist whenever uda is set"),
            }
        })
        .collect()
}

/// Causal risk per model against the already-mutilated graph.
pub fn causal_risks(
    models: &[CandidateModel],
    target_x: &Dataset,
    mutilated: &CausalDag,
) -> Result<Vec<f64>> {
    models.iter().map(|m| causal_risk(m, target_x, mutilated)).collect()
}

/// Normalizes raw risks across the candidate set, combines them, and sorts
/// ascending with model-id tie-break. Ranks are 1-based.
pub fn rank_from_risks(
    model_ids: &[String],
    v_r: &[f64],
    c_r: &[f64],
    lambda: f64,
) -> Result<Vec<ScoreReport>> {
    if model_ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    if model_ids.len() != v_r.len() || v_r.len() != c_r.len() {
        return Err(Error::LengthMismatch { left: model_ids.len(), right: v_r.len() });
    }
    if lambda < 0.0 {
        return Err(Error::Config("lambda must be non-negative".into()));
    }
    let v_norm = minmax_normalize(v_r)?;
    let c_norm = minmax_normalize(c_r)?;
    let mut order: Vec<usize> = (0..model_ids.len()).collect();
    let score =
        |i: usize| icms_score(v_norm[i], c_norm[i], lambda);
    order.sort_by(|&a, &b| {
        score(a)
            .total_cmp(&score(b))
            .then_with(|| model_ids[a].cmp(&model_ids[b]))
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(pos, i)| ScoreReport {
            model_id: model_ids[i].clone(),
            v_r_raw: v_r[i],
            c_r_raw: c_r[i],
            v_r_norm: v_norm[i],
            c_r_norm: c_norm[i],
            lambda,
            icms: score(i),
            rank: pos + 1,
            true_pehe: None,
        })
        .collect())
}

/// Full ranking pipeline: mutilates the graph at its treatment node, computes
/// the configured validation risk and the causal risk for every model,
/// normalizes each across the candidate set, and sorts by the combined score.
pub fn rank_models(
    models: &[CandidateModel],
    val: &Dataset,
    target_x: &Dataset,
    dag: &CausalDag,
    lambda: f64,
    spec: RiskSpec,
) -> Result<Vec<ScoreReport>> {
    if models.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (treatment, _) = dag.selection_roles()?;
    let mutilated = dag.mutilate(treatment)?;
    let v_r = validation_risks(models, val, target_x, spec)?;
    let c_r = causal_risks(models, target_x, &mutilated)?;
    let ids: Vec<String> = models.iter().map(|m| m.model_id().to_string()).collect();
    rank_from_risks(&ids, &v_r, &c_r, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::dag_from_parts;
    use approx::assert_abs_diff_eq;

    fn graph(edges: &[(usize, usize)]) -> CausalDag {
        let e: Vec<(usize, usize, Option<f64>)> =
            edges.iter().map(|&(s, d)| (s, d, None)).collect();
        dag_from_parts(&["a", "b", "c"], &[], &[], &e).unwrap()
    }

    #[test]
    fn lambda_examples() {
        let g = graph(&[(0, 1), (1, 2), (0, 2)]);
        assert_abs_diff_eq!(lambda_from_graphs(&g, &g, &g).unwrap(), 1.0);

        // |E(G)| = 3, union of prior and discovered = 6 -> 0.5
        let prior = graph(&[(0, 1), (1, 2), (0, 2)]);
        let disc = graph(&[(1, 0), (2, 1), (2, 0)]);
        assert_abs_diff_eq!(lambda_from_graphs(&g, &prior, &disc).unwrap(), 0.5);

        // empty prior, G = discovered -> 1
        let empty = graph(&[]);
        assert_abs_diff_eq!(lambda_from_graphs(&g, &empty, &g).unwrap(), 1.0);

        // both empty -> denominator 0 -> 1
        assert_abs_diff_eq!(lambda_from_graphs(&empty, &empty, &empty).unwrap(), 1.0);
    }

    #[test]
    fn lambda_node_set_mismatch() {
        let g = graph(&[]);
        let other = dag_from_parts(&["a", "b"], &[], &[], &[]).unwrap();
        assert!(matches!(lambda_from_graphs(&g, &other, &g), Err(Error::NodeSetMismatch)));
    }

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_normalize(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert!(matches!(minmax_normalize(&[]), Err(Error::EmptyInput)));

        // affine invariance
        let v = [3.0, -1.0, 7.5, 2.2];
        let scaled: Vec<f64> = v.iter().map(|x| 2.5 * x + 11.0).collect();
        let a = minmax_normalize(&v).unwrap();
        let b = minmax_normalize(&scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn icms_score_examples() {
        assert_abs_diff_eq!(icms_score(0.2, 0.6, 1.0), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(icms_score(0.7, 0.3, 0.0), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(icms_score(0.0, 0.0, 4.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_lambda_zero_equals_v_r_order() {
        let ids: Vec<String> = ["m0", "m1", "m2", "m3"].iter().map(|s| s.to_string()).collect();
        let v_r = [3.0, 1.0, 2.0, 0.5];
        let c_r = [0.0, 100.0, -5.0, 50.0];
        let reports = rank_from_risks(&ids, &v_r, &c_r, 0.0).unwrap();
        let ranked: Vec<&str> = reports.iter().map(|r| r.model_id.as_str()).collect();
        assert_eq!(ranked, vec!["m3", "m1", "m2", "m0"]);
        // ranks are a permutation of 1..=N
        let mut ranks: Vec<usize> = reports.iter().map(|r| r.rank).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, vec![1, 2, 3, 4]);
    }

    #[test]
    fn rank_tie_breaks_by_model_id() {
        let ids: Vec<String> = ["beta", "alpha"].iter().map(|s| s.to_string()).collect();
        // (v_norm, c_norm) = (0, 1) and (1, 0) at lambda 1: both score 1
        let v_r = [0.0, 1.0];
        let c_r = [1.0, 0.0];
        let reports = rank_from_risks(&ids, &v_r, &c_r, 1.0).unwrap();
        assert_eq!(reports[0].model_id, "alpha");
        assert_eq!(reports[1].model_id, "beta");
        assert_abs_diff_eq!(reports[0].icms, reports[1].icms, epsilon = 1e-12);
    }

    #[test]
    fn rank_invariant_to_affine_transform_of_raw_risks() {
        let ids: Vec<String> = (0..5).map(|i| format!("m{i}")).collect();
        let v_r = [3.0, 1.0, 2.0, 5.0, 4.0];
        let c_r = [0.1, 0.9, 0.4, 0.2, 0.8];
        let base = rank_from_risks(&ids, &v_r, &c_r, 1.0).unwrap();
        let v_scaled: Vec<f64> = v_r.iter().map(|x| 7.0 * x - 2.0).collect();
        let c_scaled: Vec<f64> = c_r.iter().map(|x| 0.3 * x + 40.0).collect();
        let scaled = rank_from_risks(&ids, &v_scaled, &c_scaled, 1.0).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert_eq!(a.model_id, b.model_id);
            assert_eq!(a.rank, b.rank);
        }
    }

    #[test]
    fn rank_reports_serialize_deterministically() {
        let ids: Vec<String> = (0..3).map(|i| format!("m{i}")).collect();
        let v_r = [0.25, 0.5, 0.125];
        let c_r = [10.0, -3.0, 4.5];
        let a = serde_json::to_string(&rank_from_risks(&ids, &v_r, &c_r, 1.0).unwrap()).unwrap();
        let b = serde_json::to_string(&rank_from_risks(&ids, &v_r, &c_r, 1.0).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rank_rejects_negative_lambda_and_empty() {
        let ids = vec!["m".to_string()];
        assert!(rank_from_risks(&ids, &[1.0], &[1.0], -0.5).is_err());
        assert!(matches!(rank_from_risks(&[], &[], &[], 1.0), Err(Error::EmptyInput)));
    }
}
