//! Ablation sweeps: lambda sensitivity, graph misspecification, and partial
//! knowledge of the outcome's parents. Data and fitted zoo are held fixed per
//! DAG; only the swept parameter changes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dgp::{perturb_graph, subseed, PerturbMode};
use crate::error::{Error, Result};
use crate::graph::CausalDag;
use crate::harness::experiment::{prepare_unit, DagUnit, ExperimentConfig};
use crate::harness::metrics::pehe_top_decile;
use crate::selection::{causal_risks, rank_from_risks, validation_risks};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub sweep: String,
    /// Validation-risk method the sweep was run with.
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PerturbMode>,
    pub parameters: Vec<f64>,
    /// Primary metric per parameter per DAG. For the misspecification sweep
    /// this is the PEHE-10 delta against the correct graph; otherwise it is
    /// the normalized PEHE-10 itself.
    pub per_dag: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Per-DAG reference values: the bare validation-risk ranking for the
    /// lambda and subgraph sweeps, the correct-graph combined ranking for the
    /// misspecification sweep.
    pub baseline_per_dag: Vec<f64>,
    pub baseline_mean: f64,
}

impl SweepReport {
    fn finalize(mut self) -> Self {
        for row in &self.per_dag {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let se = if row.len() < 2 {
                0.0
            } else {
                (row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0) / n).sqrt()
            };
            self.mean.push(mean);
            self.se.push(se);
        }
        self.baseline_mean =
            self.baseline_per_dag.iter().sum::<f64>() / self.baseline_per_dag.len() as f64;
        self
    }

    /// Curve CSV for plotting: one row per swept parameter.
    pub fn write_curve_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["parameter", "mean", "se", "baseline_mean"])?;
        for (i, p) in self.parameters.iter().enumerate() {
            w.write_record([
                format!("{p}"),
                format!("{}", self.mean[i]),
                format!("{}", self.se[i]),
                format!("{}", self.baseline_mean),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct UnitRisks {
    unit: DagUnit,
    v_r: Vec<f64>,
    c_r: Vec<f64>,
}

fn ranked_pehe(unit: &DagUnit, v_r: &[f64], c_r: &[f64], lambda: f64) -> Result<f64> {
    let reports = rank_from_risks(&unit.model_ids, v_r, c_r, lambda)?;
    let aligned: Vec<f64> = reports
        .iter()
        .map(|r| {
            let i = unit.model_ids.iter().position(|id| id == &r.model_id).unwrap();
            unit.true_pehe[i]
        })
        .collect();
    pehe_top_decile(&reports, &aligned, true)
}

fn prepare_risks(cfg: &ExperimentConfig, index: usize) -> Result<UnitRisks> {
    let spec = cfg.methods.first().ok_or(Error::Config("no selection method".into()))?;
    let unit = prepare_unit(cfg, index)?;
    let target_x = unit.target.covariates();
    let v_r = validation_risks(&unit.models, &unit.val, &target_x, *spec)?;
    let (t_id, _) = unit.dag.selection_roles()?;
    let mutilated = unit.dag.mutilate(t_id)?;
    let c_r = causal_risks(&unit.models, &target_x, &mutilated)?;
    Ok(UnitRisks { unit, v_r, c_r })
}

/// Reruns the combined ranking at each lambda, holding data and zoo fixed per
/// DAG. The reference is the bare validation-risk ranking (lambda = 0).
pub fn sweep_lambda(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<SweepReport> {
    cfg.validate()?;
    if lambdas.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut per_dag = vec![Vec::with_capacity(cfg.n_dags); lambdas.len()];
    let mut baseline = Vec::with_capacity(cfg.n_dags);
    for i in 0..cfg.n_dags {
        let r = prepare_risks(cfg, i)?;
        baseline.push(ranked_pehe(&r.unit, &r.v_r, &r.c_r, 0.0)?);
        for (k, &lam) in lambdas.iter().enumerate() {
            per_dag[k].push(ranked_pehe(&r.unit, &r.v_r, &r.c_r, lam)?);
        }
    }
    Ok(SweepReport {
        sweep: "lambda".into(),
        method: cfg.methods[0].name(),
        mode: None,
        parameters: lambdas.to_vec(),
        per_dag,
        mean: Vec::new(),
        se: Vec::new(),
        baseline_per_dag: baseline,
        baseline_mean: 0.0,
    }
    .finalize())
}

/// Scores each DAG with progressively mutated graphs and reports the PEHE-10
/// delta against the correct graph.
pub fn sweep_misspec(
    cfg: &ExperimentConfig,
    fractions: &[f64],
    mode: PerturbMode,
) -> Result<SweepReport> {
    cfg.validate()?;
    if fractions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut per_dag = vec![Vec::with_capacity(cfg.n_dags); fractions.len()];
    let mut baseline = Vec::with_capacity(cfg.n_dags);
    for i in 0..cfg.n_dags {
        let r = prepare_risks(cfg, i)?;
        let lambda = cfg.lambda.value(&r.unit.dag)?;
        let correct = ranked_pehe(&r.unit, &r.v_r, &r.c_r, lambda)?;
        baseline.push(correct);
        let target_x = r.unit.target.covariates();
        for (k, &fraction) in fractions.iter().enumerate() {
            let mutated = perturb_graph(
                &r.unit.dag,
                fraction,
                mode,
                subseed(cfg.master_seed, &[20, i as u64, k as u64]),
            )?;
            let (t_id, _) = mutated.selection_roles()?;
            let mutilated = mutated.mutilate(t_id)?;
            let c_r = causal_risks(&r.unit.models, &target_x, &mutilated)?;
            let p = ranked_pehe(&r.unit, &r.v_r, &c_r, lambda)?;
            per_dag[k].push(p - correct);
        }
    }
    Ok(SweepReport {
        sweep: "misspec".into(),
        method: cfg.methods[0].name(),
        mode: Some(mode),
        parameters: fractions.to_vec(),
        per_dag,
        mean: Vec::new(),
        se: Vec::new(),
        baseline_per_dag: baseline,
        baseline_mean: 0.0,
    }
    .finalize())
}

/// Keeps only a seeded prefix of the outcome's covariate parent edges (the
/// treatment edge is always retained) and reruns the combined ranking.
/// The reference is the bare validation-risk ranking.
pub fn sweep_subgraph(cfg: &ExperimentConfig, kept_fractions: &[f64]) -> Result<SweepReport> {
    cfg.validate()?;
    if kept_fractions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut per_dag = vec![Vec::with_capacity(cfg.n_dags); kept_fractions.len()];
    let mut baseline = Vec::with_capacity(cfg.n_dags);
    for i in 0..cfg.n_dags {
        let r = prepare_risks(cfg, i)?;
        baseline.push(ranked_pehe(&r.unit, &r.v_r, &r.c_r, 0.0)?);
        let (t_id, y_id) = r.unit.dag.selection_roles()?;
        let mut y_parents: Vec<_> = r
            .unit
            .dag
            .parents_of(y_id)?
            .into_iter()
            .filter(|&p| p != t_id)
            .collect();
        {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(subseed(
                cfg.master_seed,
                &[21, i as u64],
            ));
            y_parents.shuffle(&mut rng);
        }
        let target_x = r.unit.target.covariates();
        for (k, &frac) in kept_fractions.iter().enumerate() {
            let keep_n = if y_parents.is_empty() {
                0
            } else {
                ((frac * y_parents.len() as f64).round() as usize)
                    .clamp(1, y_parents.len())
            };
            let kept: Vec<_> = y_parents[..keep_n].to_vec();
            let subgraph = retain_outcome_parents(&r.unit.dag, y_id, t_id, &kept)?;
            let lambda = cfg.lambda.value(&subgraph)?;
            let mutilated = subgraph.mutilate(t_id)?;
            let c_r = causal_risks(&r.unit.models, &target_x, &mutilated)?;
            per_dag[k].push(ranked_pehe(&r.unit, &r.v_r, &c_r, lambda)?);
        }
    }
    Ok(SweepReport {
        sweep: "subgraph".into(),
        method: cfg.methods[0].name(),
        mode: None,
        parameters: kept_fractions.to_vec(),
        per_dag,
        mean: Vec::new(),
        se: Vec::new(),
        baseline_per_dag: baseline,
        baseline_mean: 0.0,
    }
    .finalize())
}

fn retain_outcome_parents(
    dag: &CausalDag,
    y_id: crate::graph::NodeId,
    t_id: crate::graph::NodeId,
    kept: &[crate::graph::NodeId],
) -> Result<CausalDag> {
    let edges = dag
        .edges()
        .iter()
        .filter(|e| e.dst != y_id || e.src == t_id || kept.contains(&e.src))
        .cloned()
        .collect();
    CausalDag::new(dag.nodes().to_vec(), edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::tests::tiny_config;

    #[test]
    fn lambda_zero_point_equals_baseline_exactly() {
        let cfg = tiny_config();
        let report = sweep_lambda(&cfg, &[0.0, 1.0]).unwrap();
        for (i, &b) in report.baseline_per_dag.iter().enumerate() {
            assert_eq!(report.per_dag[0][i], b);
        }
    }

    #[test]
    fn misspec_zero_fraction_is_exactly_zero_delta() {
        let cfg = tiny_config();
        let report = sweep_misspec(&cfg, &[0.0, 0.5], PerturbMode::Add).unwrap();
        assert!(report.per_dag[0].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn subgraph_full_fraction_matches_full_graph() {
        let cfg = tiny_config();
        let sub = sweep_subgraph(&cfg, &[1.0]).unwrap();
        let lam = sweep_lambda(&cfg, &[1.0]).unwrap();
        for (a, b) in sub.per_dag[0].iter().zip(&lam.per_dag[0]) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn curve_csv_written() {
        let cfg = tiny_config();
        let report = sweep_lambda(&cfg, &[0.0, 0.5]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        report.write_curve_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("parameter,mean,se,baseline_mean"));
        assert_eq!(text.lines().count(), 3);
    }
}
