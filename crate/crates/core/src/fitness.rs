//! DAG-to-data fitness: conditional entropy, log-likelihood, BIC, and the
//! causal risk of a model's predictions over the prediction-augmented target
//! set.
//!
//! Entropies are in nats. Continuous conditionals use linear-Gaussian
//! residual variance with a floor so degenerate (deterministic or constant)
//! predictions remain scoreable; discrete conditionals use plug-in joint
//! counts; mixed parents are handled by one-hot encoding (continuous child)
//! or equal-frequency binning (discrete child).

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{E, PI};

use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::graph::CausalDag;
use crate::numeric;
use crate::zoo::CandidateModel;

/// Residual-variance floor for the Gaussian conditional entropy.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Number of equal-frequency bins used for continuous parents of a discrete
/// child.
const PARENT_BINS: usize = 4;

/// Target covariates duplicated under `t = 0` and `t = 1` with the model's
/// predicted potential outcomes appended.
#[derive(Debug, Clone)]
pub struct AugmentedTargetSet {
    data: Dataset,
    n_target: usize,
}

impl AugmentedTargetSet {
    /// Validates the construction invariants: `2 * n_target` rows, each
    /// treatment value appearing exactly `n_target` times with the control
    /// block first, and identical covariates across the paired rows.
    pub fn new(data: Dataset, n_target: usize) -> Result<Self> {
        if data.n_rows() != 2 * n_target {
            return Err(Error::SchemaMismatch(format!(
                "augmented set must have {} rows, got {}",
                2 * n_target,
                data.n_rows()
            )));
        }
        let t = data.treatment_values()?;
        let ok_t = t[..n_target].iter().all(|&v| v == 0.0)
            && t[n_target..].iter().all(|&v| v == 1.0);
        if !ok_t {
            return Err(Error::SchemaMismatch(
                "treatment column must be n_target zeros then n_target ones".into(),
            ));
        }
        let outcome = data.outcome_name().ok_or(Error::MissingOutcome)?.to_string();
        for c in data.columns() {
            if c.name == outcome || Some(c.name.as_str()) == data.treatment_name() {
                continue;
            }
            for i in 0..n_target {
                if c.values[i] != c.values[i + n_target] {
                    return Err(Error::SchemaMismatch(format!(
                        "covariate {:?} differs across paired rows",
                        c.name
                    )));
                }
            }
        }
        Ok(AugmentedTargetSet { data, n_target })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }
}

fn plug_in_conditional(child: &[f64], parents: &[Vec<f64>], n: usize) -> f64 {
    let mut groups: BTreeMap<Vec<u64>, BTreeMap<u64, usize>> = BTreeMap::new();
    for i in 0..n {
        let key: Vec<u64> = parents.iter().map(|p| p[i].to_bits()).collect();
        *groups.entry(key).or_default().entry(child[i].to_bits()).or_default() += 1;
    }
    let nf = n as f64;
    let mut h = 0.0;
    for counts in groups.values() {
        let np: usize = counts.values().sum();
        for &c in counts.values() {
            let c = c as f64;
            h -= c / nf * (c / np as f64).ln();
        }
    }
    h
}

/// Equal-frequency bin labels (0..PARENT_BINS) for a continuous column.
fn bin_equal_frequency(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut bins = vec![0.0; n];
    for (rank, &idx) in order.iter().enumerate() {
        bins[idx] = (rank * PARENT_BINS / n) as f64;
    }
    bins
}

/// Conditional entropy of `child` given `parents`, in nats.
pub fn conditional_entropy(
    data: &Dataset,
    child: &str,
    parents: &BTreeSet<String>,
) -> Result<f64> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let child_col = data.column(child)?;
    let parent_cols: Vec<&Column> =
        parents.iter().map(|p| data.column(p)).collect::<Result<_>>()?;

    if child_col.kind.is_discrete() {
        let encoded: Vec<Vec<f64>> = parent_cols
            .iter()
            .map(|c| {
                if c.kind.is_discrete() {
                    c.values.clone()
                } else {
                    bin_equal_frequency(&c.values)
                }
            })
            .collect();
        return Ok(plug_in_conditional(&child_col.values, &encoded, n));
    }

    // continuous child: Gaussian residual entropy from a least-squares fit
    let mut design_cols: Vec<Vec<f64>> = Vec::new();
    for c in &parent_cols {
        if c.kind.is_discrete() {
            let mut levels: Vec<u64> = c.values.iter().map(|v| v.to_bits()).collect();
            levels.sort_unstable();
            levels.dedup();
            for &lv in levels.iter().skip(1) {
                design_cols.push(
                    c.values.iter().map(|v| if v.to_bits() == lv { 1.0 } else { 0.0 }).collect(),
                );
            }
        } else {
            design_cols.push(c.values.clone());
        }
    }
    let variance = if design_cols.is_empty() {
        numeric::variance(&child_col.values)
    } else {
        let refs: Vec<&[f64]> = design_cols.iter().map(|v| v.as_slice()).collect();
        let x = numeric::design_with_intercept(&refs, n);
        numeric::variance(&numeric::ols_residuals(&x, &child_col.values))
    };
    Ok(0.5 * (2.0 * PI * E * variance.max(VARIANCE_FLOOR)).ln())
}

/// Decomposed log-likelihood of the DAG given the data:
/// `-N * Σ_i H(X_i | parents(X_i))`.
pub fn log_likelihood(dag: &CausalDag, data: &Dataset) -> Result<f64> {
    for node in dag.nodes() {
        if data.column(&node.name).is_err() {
            return Err(Error::ColumnMismatch(node.name.clone()));
        }
    }
    let n = data.n_rows() as f64;
    let mut total = 0.0;
    for node in dag.nodes() {
        let parents: BTreeSet<String> = dag
            .parents_of(node.id)?
            .into_iter()
            .map(|p| dag.node(p).map(|s| s.name.clone()))
            .collect::<Result<_>>()?;
        total += conditional_entropy(data, &node.name, &parents)?;
    }
    Ok(-n * total)
}

/// BIC with a `(log2 N / 2) * ||G||` penalty, `||G|| = |nodes| + |edges|`.
pub fn bic_score(dag: &CausalDag, data: &Dataset) -> Result<f64> {
    let ll = log_likelihood(dag, data)?;
    let n = data.n_rows() as f64;
    let dim = (dag.node_count() + dag.edge_count()) as f64;
    Ok(-ll + n.log2() / 2.0 * dim)
}

/// Duplicates the target covariates under both treatment values and appends
/// the model's predicted potential outcomes.
pub fn augment_target(
    model: &CandidateModel,
    target_covariates: &Dataset,
) -> Result<AugmentedTargetSet> {
    let schema = model.schema();
    let names = target_covariates.covariate_names();
    let mut want = schema.features.clone();
    want.sort();
    let mut have = names.clone();
    have.sort();
    if want != have {
        return Err(Error::SchemaMismatch(format!(
            "target covariates {have:?} do not match training schema {want:?}"
        )));
    }
    let preds = model.predict_po(target_covariates)?;
    let n = target_covariates.n_rows();
    let mut columns = Vec::with_capacity(names.len() + 2);
    for c in target_covariates.columns() {
        let mut v = Vec::with_capacity(2 * n);
        v.extend_from_slice(&c.values);
        v.extend_from_slice(&c.values);
        columns.push(Column::new(c.name.clone(), c.kind, v));
    }
    let mut t = vec![0.0; n];
    t.extend(std::iter::repeat_n(1.0, n));
    columns.push(Column::new(schema.treatment.clone(), ColumnKind::Binary, t));
    let mut y = preds.y0;
    y.extend(preds.y1);
    columns.push(Column::new(schema.outcome.clone(), ColumnKind::Continuous, y));
    let data = Dataset::new(
        columns,
        Some(schema.treatment.clone()),
        Some(schema.outcome.clone()),
    )?;
    AugmentedTargetSet::new(data, n)
}

/// Causal risk: negative log-likelihood of the interventional DAG given the
/// prediction-augmented target set.
pub fn causal_risk(
    model: &CandidateModel,
    target_covariates: &Dataset,
    mutilated_dag: &CausalDag,
) -> Result<f64> {
    let (treatment, _) = mutilated_dag.selection_roles()?;
    if !mutilated_dag.parents_of(treatment)?.is_empty() {
        return Err(Error::NotMutilated);
    }
    let augmented = augment_target(model, target_covariates)?;
    Ok(-log_likelihood(mutilated_dag, augmented.data())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{dag_from_parts, NodeRole};
    use crate::zoo::{fit_candidate, FamilySpec, ModelSpec, OutcomeStructure};
    use approx::assert_abs_diff_eq;

    fn ds(cols: Vec<Column>) -> Dataset {
        Dataset::new(cols, None, None).unwrap()
    }

    #[test]
    fn balanced_binary_marginal_is_ln2() {
        let d = ds(vec![Column::new(
            "b",
            ColumnKind::Binary,
            (0..100).map(|i| (i % 2) as f64).collect(),
        )]);
        let h = conditional_entropy(&d, "b", &BTreeSet::new()).unwrap();
        assert_abs_diff_eq!(h, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn child_equal_to_parent_has_zero_entropy() {
        let v: Vec<f64> = (0..64).map(|i| ((i / 3) % 2) as f64).collect();
        let d = ds(vec![
            Column::new("p", ColumnKind::Binary, v.clone()),
            Column::new("c", ColumnKind::Binary, v),
        ]);
        let given: BTreeSet<String> = ["p".to_string()].into_iter().collect();
        assert_abs_diff_eq!(conditional_entropy(&d, "c", &given).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_continuous_child_hits_floor() {
        let p: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let c: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let d = ds(vec![
            Column::new("p", ColumnKind::Continuous, p),
            Column::new("c", ColumnKind::Continuous, c),
        ]);
        let given: BTreeSet<String> = ["p".to_string()].into_iter().collect();
        let h = conditional_entropy(&d, "c", &given).unwrap();
        let floor = 0.5 * (2.0 * PI * E * VARIANCE_FLOOR).ln();
        assert_abs_diff_eq!(h, floor, epsilon = 1e-9);
    }

    #[test]
    fn mixed_parents_bin_continuous_for_discrete_child() {
        // discrete child driven by the sign of a continuous parent: binning
        // into quartiles keeps most of the information
        let p: Vec<f64> = (0..200).map(|i| i as f64 - 99.5).collect();
        let c: Vec<f64> = p.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let d = ds(vec![
            Column::new("p", ColumnKind::Continuous, p),
            Column::new("c", ColumnKind::Binary, c),
        ]);
        let given: BTreeSet<String> = ["p".to_string()].into_iter().collect();
        let h = conditional_entropy(&d, "c", &given).unwrap();
        assert_abs_diff_eq!(h, 0.0, epsilon = 1e-12); // quartile bins separate the classes exactly
        let h_marginal = conditional_entropy(&d, "c", &BTreeSet::new()).unwrap();
        assert_abs_diff_eq!(h_marginal, 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_likelihood_edgeless_binary() {
        let mk = |period: usize| -> Vec<f64> {
            (0..100).map(|i| ((i / period) % 2) as f64).collect()
        };
        let d = Dataset::new(
            vec![
                Column::new("a", ColumnKind::Binary, mk(1)),
                Column::new("b", ColumnKind::Binary, mk(2)),
            ],
            None,
            None,
        )
        .unwrap();
        let g = dag_from_parts(&["a", "b"], &[], &[], &[]).unwrap();
        let ll = log_likelihood(&g, &d).unwrap();
        assert_abs_diff_eq!(ll, -100.0 * (2f64.ln() + 2f64.ln()), epsilon = 1e-9);
    }

    #[test]
    fn log_likelihood_single_node_compositional() {
        let v: Vec<f64> = (0..80).map(|i| (i as f64 * 0.37).sin()).collect();
        let d = ds(vec![Column::new("x", ColumnKind::Continuous, v)]);
        let g = dag_from_parts(&["x"], &[], &[], &[]).unwrap();
        let h = conditional_entropy(&d, "x", &BTreeSet::new()).unwrap();
        assert_abs_diff_eq!(log_likelihood(&g, &d).unwrap(), -80.0 * h, epsilon = 1e-12);
    }

    #[test]
    fn chain_beats_edgeless_on_correlated_data() {
        let a: Vec<f64> = (0..500).map(|i| (i as f64 * 0.11).sin() * 3.0).collect();
        let b: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.01 * (i as f64 * 0.7).cos())
            .collect();
        let d = ds(vec![
            Column::new("a", ColumnKind::Continuous, a),
            Column::new("b", ColumnKind::Continuous, b),
        ]);
        let chain = dag_from_parts(&["a", "b"], &[], &[], &[(0, 1, None)]).unwrap();
        let edgeless = dag_from_parts(&["a", "b"], &[], &[], &[]).unwrap();
        assert!(log_likelihood(&chain, &d).unwrap() > log_likelihood(&edgeless, &d).unwrap());
    }

    #[test]
    fn bic_penalty_behavior() {
        let one_row = ds(vec![Column::new("x", ColumnKind::Continuous, vec![1.5])]);
        let g = dag_from_parts(&["x"], &[], &[], &[]).unwrap();
        // N = 1: log2(1) = 0, so BIC = -LL
        assert_abs_diff_eq!(
            bic_score(&g, &one_row).unwrap(),
            -log_likelihood(&g, &one_row).unwrap(),
            epsilon = 1e-12
        );

        // fixed G, equal N: BIC difference equals LL difference
        let mk = |seed: f64| -> Dataset {
            ds(vec![Column::new(
                "x",
                ColumnKind::Continuous,
                (0..64).map(|i| (i as f64 * seed).sin()).collect(),
            )])
        };
        let d1 = mk(0.3);
        let d2 = mk(0.9);
        let bic_diff = bic_score(&g, &d1).unwrap() - bic_score(&g, &d2).unwrap();
        let ll_diff = -log_likelihood(&g, &d1).unwrap() + log_likelihood(&g, &d2).unwrap();
        assert_abs_diff_eq!(bic_diff, ll_diff, epsilon = 1e-9);
    }

    #[test]
    fn bic_prefers_edgeless_on_independent_data() {
        // independent-ish deterministic columns, large N
        let a: Vec<f64> = (0..4000).map(|i| (i as f64 * 0.61).sin()).collect();
        let b: Vec<f64> = (0..4000).map(|i| (i as f64 * 1.37).cos()).collect();
        let d = ds(vec![
            Column::new("a", ColumnKind::Continuous, a),
            Column::new("b", ColumnKind::Continuous, b),
        ]);
        let chain = dag_from_parts(&["a", "b"], &[], &[], &[(0, 1, None)]).unwrap();
        let edgeless = dag_from_parts(&["a", "b"], &[], &[], &[]).unwrap();
        assert!(bic_score(&edgeless, &d).unwrap() < bic_score(&chain, &d).unwrap());
    }

    #[test]
    fn zero_correlation_edge_leaves_entropy_unchanged() {
        // Walsh-style mutually orthogonal columns
        let n = 64;
        let x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let u: Vec<f64> = (0..n).map(|i| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e: Vec<f64> = (0..n).map(|i| if (i / 4) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c: Vec<f64> = (0..n).map(|i| x[i] + 0.25 * e[i]).collect();
        let d = ds(vec![
            Column::new("x", ColumnKind::Continuous, x),
            Column::new("u", ColumnKind::Continuous, u),
            Column::new("c", ColumnKind::Continuous, c),
        ]);
        let with_x: BTreeSet<String> = ["x".to_string()].into_iter().collect();
        let with_both: BTreeSet<String> =
            ["x".to_string(), "u".to_string()].into_iter().collect();
        let h1 = conditional_entropy(&d, "c", &with_x).unwrap();
        let h2 = conditional_entropy(&d, "c", &with_both).unwrap();
        assert_abs_diff_eq!(h1, h2, epsilon = 1e-9);
    }

    fn model_and_target() -> (CandidateModel, Dataset) {
        let train = Dataset::new(
            vec![
                Column::new("x1", ColumnKind::Continuous, vec![0.0, 1.0, 2.0, 3.0]),
                Column::new("t", ColumnKind::Binary, vec![0.0, 1.0, 0.0, 1.0]),
                Column::new("y", ColumnKind::Continuous, vec![0.0, 2.0, 2.0, 4.0]),
            ],
            Some("t".into()),
            Some("y".into()),
        )
        .unwrap();
        let spec = ModelSpec {
            model_id: "lin".into(),
            family: FamilySpec::Oracle {
                structure: OutcomeStructure { terms: vec![("x1".into(), 1.0)], treat_coef: 1.0 },
            },
        };
        let model = fit_candidate(&spec, &train, 0).unwrap();
        let target = ds(vec![Column::new("x1", ColumnKind::Continuous, vec![5.0, -1.0, 0.5])]);
        (model, target)
    }

    #[test]
    fn augment_builds_paired_rows() {
        let (model, target) = model_and_target();
        let aug = augment_target(&model, &target).unwrap();
        assert_eq!(aug.n_target(), 3);
        let d = aug.data();
        assert_eq!(d.n_rows(), 6);
        assert_eq!(d.treatment_values().unwrap(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        // y(t) = x1 + t, stable grouping: control block first
        assert_eq!(d.outcome_values().unwrap(), &[5.0, -1.0, 0.5, 6.0, 0.0, 1.5]);
        assert_eq!(d.values("x1").unwrap(), &[5.0, -1.0, 0.5, 5.0, -1.0, 0.5]);
    }

    #[test]
    fn augment_constant_model() {
        let train = Dataset::new(
            vec![
                Column::new("x1", ColumnKind::Continuous, vec![0.0, 1.0]),
                Column::new("t", ColumnKind::Binary, vec![0.0, 1.0]),
                Column::new("y", ColumnKind::Continuous, vec![0.0, 0.0]),
            ],
            Some("t".into()),
            Some("y".into()),
        )
        .unwrap();
        let spec = ModelSpec {
            model_id: "const".into(),
            family: FamilySpec::Oracle {
                structure: OutcomeStructure { terms: vec![], treat_coef: 0.0 },
            },
        };
        let model = fit_candidate(&spec, &train, 0).unwrap();
        let target = ds(vec![Column::new("x1", ColumnKind::Continuous, vec![3.0, 7.0])]);
        let aug = augment_target(&model, &target).unwrap();
        assert!(aug.data().outcome_values().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn augment_rejects_schema_mismatch() {
        let (model, _) = model_and_target();
        let wrong = ds(vec![Column::new("other", ColumnKind::Continuous, vec![1.0])]);
        assert!(matches!(augment_target(&model, &wrong), Err(Error::SchemaMismatch(_))));
    }

    fn selection_dag() -> CausalDag {
        dag_from_parts(
            &["x1", "t", "y"],
            &[(1, NodeRole::Treatment), (2, NodeRole::Outcome)],
            &[(1, ColumnKind::Binary)],
            &[(0, 1, Some(1.0)), (1, 2, Some(1.0)), (0, 2, Some(1.0))],
        )
        .unwrap()
    }

    #[test]
    fn causal_risk_is_negative_log_likelihood() {
        let (model, target) = model_and_target();
        let mdag = selection_dag().mutilate(crate::graph::NodeId(1)).unwrap();
        let risk = causal_risk(&model, &target, &mdag).unwrap();
        let aug = augment_target(&model, &target).unwrap();
        let ll = log_likelihood(&mdag, aug.data()).unwrap();
        assert_abs_diff_eq!(risk, -ll, epsilon = 1e-12);
    }

    #[test]
    fn causal_risk_requires_mutilated_graph() {
        let (model, target) = model_and_target();
        let err = causal_risk(&model, &target, &selection_dag());
        assert!(matches!(err, Err(Error::NotMutilated)));
    }

    #[test]
    fn causal_risk_row_order_invariant() {
        let (model, target) = model_and_target();
        let mdag = selection_dag().mutilate(crate::graph::NodeId(1)).unwrap();
        let a = causal_risk(&model, &target, &mdag).unwrap();
        let b = causal_risk(&model, &target.select_rows(&[2, 0, 1]), &mdag).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }
}
