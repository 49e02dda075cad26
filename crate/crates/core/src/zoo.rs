//! Candidate ITE model families.
//!
//! Desk-scale closed-form learners with a deliberate quality spread: per-arm
//! ridge regressions, a single polynomial regression taking the treatment as
//! an input, per-arm nearest-neighbor regressors, plus an oracle wrapping the
//! true structural outcome function and corrupted oracles that leak a
//! non-parent of the outcome into the treated arm. Fitting and prediction are
//! pure and deterministic.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{CausalDag, NodeRole};
use crate::numeric;

/// Column layout a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSchema {
    pub features: Vec<String>,
    pub treatment: String,
    pub outcome: String,
}

/// True linear response of the outcome node: covariate parents with their
/// edge weights plus the treatment edge coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeStructure {
    pub terms: Vec<(String, f64)>,
    pub treat_coef: f64,
}

impl OutcomeStructure {
    pub fn from_dag(dag: &CausalDag) -> Result<Self> {
        let (t, y) = dag.selection_roles()?;
        let mut terms = Vec::new();
        let mut treat_coef = 0.0;
        for (p, w) in dag.weighted_parents(y)? {
            if p == t {
                treat_coef = w;
            } else {
                terms.push((dag.node(p)?.name.clone(), w));
            }
        }
        Ok(OutcomeStructure { terms, treat_coef })
    }

    fn response(&self, x: &GatheredRows, row: usize, t: f64) -> f64 {
        let mut y = self.treat_coef * t;
        for (idx, w) in &x.term_indices {
            y += w * x.cols[*idx][row];
        }
        y
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    /// One ridge regression per treatment arm.
    TRidge { alpha: f64 },
    /// Single polynomial-feature regression with the treatment as an input.
    SPoly { degree: usize, alpha: f64 },
    /// Per-arm k-nearest-neighbor regression.
    TKnn { k: usize },
    /// True structural outcome function (evaluation only).
    Oracle { structure: OutcomeStructure },
    /// Oracle plus a spurious coefficient on a non-parent of the outcome,
    /// applied to the treated arm.
    CorruptedOracle { structure: OutcomeStructure, spur_feature: String, spur_coef: f64 },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::TRidge { .. } => "t_ridge",
            FamilySpec::SPoly { .. } => "s_poly",
            FamilySpec::TKnn { .. } => "t_knn",
            FamilySpec::Oracle { .. } => "oracle",
            FamilySpec::CorruptedOracle { .. } => "corrupted_oracle",
        }
    }

    pub fn hyperparams(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match self {
            FamilySpec::TRidge { alpha } => {
                m.insert("alpha".into(), *alpha);
            }
            FamilySpec::SPoly { degree, alpha } => {
                m.insert("degree".into(), *degree as f64);
                m.insert("alpha".into(), *alpha);
            }
            FamilySpec::TKnn { k } => {
                m.insert("k".into(), *k as f64);
            }
            FamilySpec::Oracle { .. } => {}
            FamilySpec::CorruptedOracle { spur_coef, .. } => {
                m.insert("spur_coef".into(), *spur_coef);
            }
        }
        m
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_id: String,
    pub family: FamilySpec,
}

#[derive(Debug, Clone)]
struct LinearModel {
    intercept: f64,
    coefs: Vec<f64>,
}

impl LinearModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
enum Fitted {
    TRidge { control: LinearModel, treated: LinearModel },
    SPoly { model: LinearModel, powers: Vec<Vec<u32>> },
    TKnn { k: usize, x0: Vec<Vec<f64>>, y0: Vec<f64>, x1: Vec<Vec<f64>>, y1: Vec<f64> },
    Oracle { structure: OutcomeStructure },
    Corrupted { structure: OutcomeStructure, spur_feature: String, spur_coef: f64 },
}

/// A fitted potential-outcome predictor `f(x, t)`.
#[derive(Debug, Clone)]
pub struct CandidateModel {
    model_id: String,
    family_name: String,
    hyperparams: BTreeMap<String, f64>,
    schema: ModelSchema,
    fitted: Fitted,
}

/// Predicted potential outcomes and their difference.
#[derive(Debug, Clone)]
pub struct PoPrediction {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub cate: Vec<f64>,
}

/// Feature columns gathered from a dataset in schema order.
struct GatheredRows<'a> {
    cols: Vec<&'a [f64]>,
    /// for oracle structures: (index into cols, weight)
    term_indices: Vec<(usize, f64)>,
    n: usize,
}

fn gather<'a>(data: &'a Dataset, schema: &ModelSchema) -> Result<GatheredRows<'a>> {
    let cols: Vec<&[f64]> = schema
        .features
        .iter()
        .map(|f| {
            data.values(f)
                .map_err(|_| Error::SchemaMismatch(format!("missing feature column {f:?}")))
        })
        .collect::<Result<_>>()?;
    let n = if cols.is_empty() { data.n_rows() } else { cols[0].len() };
    Ok(GatheredRows { cols, term_indices: Vec::new(), n })
}

fn row(cols: &[&[f64]], i: usize) -> Vec<f64> {
    cols.iter().map(|c| c[i]).collect()
}

/// Exponent vectors for all monomials over `p` variables with total degree in
/// `1..=degree`, in deterministic lexicographic order.
fn monomial_powers(p: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; p];
    fn rec(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, var: usize, left: u32) {
        if var == cur.len() {
            if cur.iter().any(|&e| e > 0) {
                out.push(cur.clone());
            }
            return;
        }
        for e in 0..=left {
            cur[var] = e;
            rec(out, cur, var + 1, left - e);
        }
        cur[var] = 0;
    }
    rec(&mut out, &mut cur, 0, degree as u32);
    out
}

fn expand_monomials(z: &[f64], powers: &[Vec<u32>]) -> Vec<f64> {
    powers
        .iter()
        .map(|pw| {
            pw.iter()
                .zip(z)
                .map(|(&e, &v)| v.powi(e as i32))
                .product::<f64>()
        })
        .collect()
}

/// Fits one candidate model. `seed` is part of the contract for reproducible
/// pipelines; the closed-form families are deterministic and ignore it.
pub fn fit_candidate(spec: &ModelSpec, train: &Dataset, _seed: u64) -> Result<CandidateModel> {
    let treatment = train.treatment_name().ok_or(Error::MissingTreatment)?.to_string();
    let outcome = train.outcome_name().ok_or(Error::MissingOutcome)?.to_string();
    let schema = ModelSchema { features: train.covariate_names(), treatment, outcome };
    let t = train.treatment_values()?;
    let y = train.outcome_values()?;
    let control_rows: Vec<usize> = (0..train.n_rows()).filter(|&i| t[i] == 0.0).collect();
    let treated_rows: Vec<usize> = (0..train.n_rows()).filter(|&i| t[i] == 1.0).collect();
    if control_rows.is_empty() || treated_rows.is_empty() {
        return Err(Error::SingleArmData);
    }
    let g = gather(train, &schema)?;

    let arm_matrix = |rows: &[usize]| -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), g.cols.len(), |i, j| g.cols[j][rows[i]])
    };
    let arm_y = |rows: &[usize]| -> Vec<f64> { rows.iter().map(|&i| y[i]).collect() };

    let fitted = match &spec.family {
        FamilySpec::TRidge { alpha } => {
            let fit_arm = |rows: &[usize]| {
                let (b0, b) = numeric::ridge_fit(&arm_matrix(rows), &arm_y(rows), *alpha);
                LinearModel { intercept: b0, coefs: b.iter().copied().collect() }
            };
            Fitted::TRidge { control: fit_arm(&control_rows), treated: fit_arm(&treated_rows) }
        }
        FamilySpec::SPoly { degree, alpha } => {
            let powers = monomial_powers(g.cols.len() + 1, *degree);
            let n = train.n_rows();
            let mut x = DMatrix::zeros(n, powers.len());
            for i in 0..n {
                let mut z = row(&g.cols, i);
                z.push(t[i]);
                for (j, v) in expand_monomials(&z, &powers).into_iter().enumerate() {
                    x[(i, j)] = v;
                }
            }
            let (b0, b) = numeric::ridge_fit(&x, y, *alpha);
            Fitted::SPoly {
                model: LinearModel { intercept: b0, coefs: b.iter().copied().collect() },
                powers,
            }
        }
        FamilySpec::TKnn { k } => Fitted::TKnn {
            k: *k,
            x0: control_rows.iter().map(|&i| row(&g.cols, i)).collect(),
            y0: arm_y(&control_rows),
            x1: treated_rows.iter().map(|&i| row(&g.cols, i)).collect(),
            y1: arm_y(&treated_rows),
        },
        FamilySpec::Oracle { structure } => Fitted::Oracle { structure: structure.clone() },
        FamilySpec::CorruptedOracle { structure, spur_feature, spur_coef } => Fitted::Corrupted {
            structure: structure.clone(),
            spur_feature: spur_feature.clone(),
            spur_coef: *spur_coef,
        },
    };

    Ok(CandidateModel {
        model_id: spec.model_id.clone(),
        family_name: spec.family.name().to_string(),
        hyperparams: spec.family.hyperparams(),
        schema,
        fitted,
    })
}

fn knn_predict(k: usize, xs: &[Vec<f64>], ys: &[f64], q: &[f64]) -> f64 {
    let mut dist: Vec<(f64, usize)> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let d: f64 = x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i)
        })
        .collect();
    let k = k.min(dist.len()).max(1);
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    dist[..k].iter().map(|&(_, i)| ys[i]).sum::<f64>() / k as f64
}

impl CandidateModel {
    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn family_name(&self) -> &str {
        &self.family_name
    }

    pub fn hyperparams(&self) -> &BTreeMap<String, f64> {
        &self.hyperparams
    }

    pub fn schema(&self) -> &ModelSchema {
        &self.schema
    }

    /// Potential-outcome predictions for every row of `x`; `cate` is the
    /// componentwise difference `y1 - y0`.
    pub fn predict_po(&self, x: &Dataset) -> Result<PoPrediction> {
        let mut g = gather(x, &self.schema)?;
        let n = g.n;
        let (mut y0, mut y1) = (Vec::with_capacity(n), Vec::with_capacity(n));
        match &self.fitted {
            Fitted::TRidge { control, treated } => {
                for i in 0..n {
                    let xi = row(&g.cols, i);
                    y0.push(control.predict(&xi));
                    y1.push(treated.predict(&xi));
                }
            }
            Fitted::SPoly { model, powers } => {
                for i in 0..n {
                    let mut z = row(&g.cols, i);
                    z.push(0.0);
                    y0.push(model.predict(&expand_monomials(&z, powers)));
                    *z.last_mut().unwrap() = 1.0;
                    y1.push(model.predict(&expand_monomials(&z, powers)));
                }
            }
            Fitted::TKnn { k, x0, y0: t0, x1, y1: t1 } => {
                for i in 0..n {
                    let xi = row(&g.cols, i);
                    y0.push(knn_predict(*k, x0, t0, &xi));
                    y1.push(knn_predict(*k, x1, t1, &xi));
                }
            }
            Fitted::Oracle { structure } => {
                g.term_indices = term_indices(&self.schema, structure)?;
                for i in 0..n {
                    y0.push(structure.response(&g, i, 0.0));
                    y1.push(structure.response(&g, i, 1.0));
                }
            }
            Fitted::Corrupted { structure, spur_feature, spur_coef } => {
                g.term_indices = term_indices(&self.schema, structure)?;
                let spur = self
                    .schema
                    .features
                    .iter()
                    .position(|f| f == spur_feature)
                    .ok_or_else(|| {
                        Error::SchemaMismatch(format!("missing spurious feature {spur_feature:?}"))
                    })?;
                for i in 0..n {
                    y0.push(structure.response(&g, i, 0.0));
                    y1.push(structure.response(&g, i, 1.0) + spur_coef * g.cols[spur][i]);
                }
            }
        }
        let cate = y1.iter().zip(&y0).map(|(a, b)| a - b).collect();
        Ok(PoPrediction { y0, y1, cate })
    }
}

fn term_indices(schema: &ModelSchema, s: &OutcomeStructure) -> Result<Vec<(usize, f64)>> {
    s.terms
        .iter()
        .map(|(f, w)| {
            schema
                .features
                .iter()
                .position(|x| x == f)
                .map(|i| (i, *w))
                .ok_or_else(|| Error::SchemaMismatch(format!("missing structural feature {f:?}")))
        })
        .collect()
}

/// Grid declaration for the candidate zoo.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ZooConfig {
    pub ridge_alphas: Vec<f64>,
    /// (degree, alpha) pairs
    pub poly: Vec<(usize, f64)>,
    pub knn_ks: Vec<usize>,
    pub include_oracle: bool,
    pub corrupted_coefs: Vec<f64>,
}

impl Default for ZooConfig {
    fn default() -> Self {
        ZooConfig {
            ridge_alphas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0],
            poly: vec![
                (1, 1e-6),
                (1, 1e-2),
                (1, 1.0),
                (2, 1e-6),
                (2, 1e-2),
                (2, 1.0),
                (3, 1e-6),
                (3, 1e-2),
                (3, 1.0),
            ],
            knn_ks: vec![1, 5, 25],
            include_oracle: true,
            corrupted_coefs: vec![0.5, 1.0, 2.0, 3.0],
        }
    }
}

/// Picks the spurious feature for corrupted oracles: the lowest-id feature
/// node that is not a parent of the outcome (shallow nodes keep the
/// corruption scale comparable across graphs), falling back to the lowest-id
/// feature when every feature is a parent.
pub fn spurious_feature(dag: &CausalDag) -> Result<String> {
    let (_, y) = dag.selection_roles()?;
    let parents = dag.parents_of(y)?;
    let features: Vec<_> = dag
        .nodes()
        .iter()
        .filter(|n| n.role == NodeRole::Feature)
        .collect();
    let pick = features
        .iter()
        .find(|n| !parents.contains(&n.id))
        .or_else(|| features.first())
        .ok_or(Error::MissingRoles { treatments: 1, outcomes: 1 })?;
    Ok(pick.name.clone())
}

/// Builds the model grid for a weighted DAG. Oracle families read the true
/// outcome structure off the graph.
pub fn build_zoo(cfg: &ZooConfig, dag: &CausalDag) -> Result<Vec<ModelSpec>> {
    let mut specs = Vec::new();
    for &alpha in &cfg.ridge_alphas {
        specs.push(ModelSpec {
            model_id: format!("t_ridge_a{alpha:e}"),
            family: FamilySpec::TRidge { alpha },
        });
    }
    for &(degree, alpha) in &cfg.poly {
        specs.push(ModelSpec {
            model_id: format!("s_poly_d{degree}_a{alpha:e}"),
            family: FamilySpec::SPoly { degree, alpha },
        });
    }
    for &k in &cfg.knn_ks {
        specs.push(ModelSpec { model_id: format!("t_knn_k{k:02}"), family: FamilySpec::TKnn { k } });
    }
    if cfg.include_oracle || !cfg.corrupted_coefs.is_empty() {
        let structure = OutcomeStructure::from_dag(dag)?;
        if cfg.include_oracle {
            specs.push(ModelSpec {
                model_id: "oracle".into(),
                family: FamilySpec::Oracle { structure: structure.clone() },
            });
        }
        if !cfg.corrupted_coefs.is_empty() {
            let spur = spurious_feature(dag)?;
            for &c in &cfg.corrupted_coefs {
                specs.push(ModelSpec {
                    model_id: format!("corrupted_oracle_c{c}"),
                    family: FamilySpec::CorruptedOracle {
                        structure: structure.clone(),
                        spur_feature: spur.clone(),
                        spur_coef: c,
                    },
                });
            }
        }
    }
    Ok(specs)
}
