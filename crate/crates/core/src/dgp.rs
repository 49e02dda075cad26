//! Synthetic structural-equation benchmark generator.
//!
//! Random weighted DAGs with treatment/outcome roles, observational source
//! data, shifted interventional target data with sealed true potential
//! outcomes, and graph misspecification for robustness sweeps. All generation
//! is a pure function of (config, seed); distinct seeds may run concurrently.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::graph::{CausalDag, Edge, NodeId, NodeRole, NodeSpec};

const TAG_OBS: u64 = 0x01;
const TAG_TREAT: u64 = 0x02;

/// Deterministic seed splitting: one independent stream per tagged purpose so
/// parallel schedules cannot change outputs.
pub fn subseed(master: u64, tags: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut s = splitmix(master);
    for &t in tags {
        s = splitmix(s ^ splitmix(t));
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    pub n_nodes: usize,
    /// Upper bound on the sampled edge count; `None` means the DAG maximum
    /// `n(n-1)/2`.
    pub max_edges: Option<usize>,
    pub noise_mean: f64,
    pub noise_sd: f64,
    pub weight_range: (f64, f64),
    pub n_source: usize,
    pub n_target: usize,
    /// Mean of the root-noise shift applied to perturbed nodes; must lie in
    /// [1, 10].
    pub perturb_mean: f64,
    pub perturb_sd: f64,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n_nodes: 8,
            max_edges: None,
            noise_mean: 0.0,
            noise_sd: 1.0,
            weight_range: (0.4, 1.0),
            n_source: 2000,
            n_target: 1000,
            perturb_mean: 5.0,
            perturb_sd: 1.0,
            seed: 0,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 3 {
            return Err(Error::Config("n_nodes must be at least 3".into()));
        }
        if !(1.0..=10.0).contains(&self.perturb_mean) {
            return Err(Error::Config("perturb_mean must lie in [1, 10]".into()));
        }
        if self.noise_sd < 0.0 || self.perturb_sd < 0.0 {
            return Err(Error::Config("standard deviations must be non-negative".into()));
        }
        if self.weight_range.0 > self.weight_range.1 {
            return Err(Error::Config("weight_range must be a non-empty interval".into()));
        }
        if self.n_source == 0 || self.n_target == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        Ok(())
    }
}

/// Random weighted DAG with roles placed for the benchmark.
///
/// Node ids follow a topological order with the treatment early and the
/// outcome last: a root feature `X1` on id 0, the treatment `T` on id 1 with
/// `X1` as its parent (selection bias), features `X2..X{n-2}` on ids
/// `2..n-2`, and the outcome `Y` as a sink on id `n-1`. The edge `T -> Y` is
/// always present so the treatment effect is nonzero, and `T` has no other
/// children: under interventional generation the assigned treatment reaches
/// covariates only through the outcome. The realized edge count is sampled
/// between half of `max_edges` and `max_edges` itself.
pub fn random_dag(
    n: usize,
    max_edges: usize,
    weight_range: (f64, f64),
    seed: u64,
) -> Result<CausalDag> {
    if n < 3 {
        return Err(Error::InfeasibleRoles(n));
    }
    let t_id = 1usize;
    let y_id = n - 1;
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let forced = (i, j) == (0, t_id) || (i, j) == (t_id, y_id);
            let into_treatment = j == t_id;
            let treatment_to_covariate = i == t_id && j != y_id;
            if !forced && !into_treatment && !treatment_to_covariate {
                candidates.push((i, j));
            }
        }
    }
    let hi = max_edges.min(candidates.len() + 2);
    if hi < 2 {
        return Err(Error::InfeasibleRoles(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    let lo = 2.max(hi / 2);
    let m = rng.random_range(lo..=hi);
    let mut pairs: Vec<(usize, usize)> = vec![(0, t_id), (t_id, y_id)];
    pairs.extend(candidates.into_iter().take(m - 2));
    pairs.sort_unstable();

    let edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(s, d)| Edge {
            src: NodeId(s as u32),
            dst: NodeId(d as u32),
            weight: Some(rng.random_range(weight_range.0..=weight_range.1)),
        })
        .collect();

    let nodes: Vec<NodeSpec> = (0..n)
        .map(|i| {
            if i == t_id {
                NodeSpec {
                    id: NodeId(i as u32),
                    name: "T".into(),
                    role: NodeRole::Treatment,
                    kind: ColumnKind::Binary,
                }
            } else if i == y_id {
                NodeSpec {
                    id: NodeId(i as u32),
                    name: "Y".into(),
                    role: NodeRole::Outcome,
                    kind: ColumnKind::Continuous,
                }
            } else {
                let feature_index = if i == 0 { 1 } else { i };
                NodeSpec {
                    id: NodeId(i as u32),
                    name: format!("X{feature_index}"),
                    role: NodeRole::Feature,
                    kind: ColumnKind::Continuous,
                }
            }
        })
        .collect();
    CausalDag::new(nodes, edges)
}

fn gaussian_column(rng: &mut ChaCha8Rng, mean: f64, sd: f64, n: usize) -> Vec<f64> {
    let dist = Normal::new(mean, sd).expect("valid normal");
    (0..n).map(|_| dist.sample(rng)).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Observational source data: every node is the weighted sum of its parents
/// plus Gaussian noise, generated in topological order; the treatment node
/// (when a treatment role exists) is then passed through a sigmoid and
/// binarized at 0.5.
pub fn gen_obs_data(dag: &CausalDag, cfg: &DgpConfig) -> Result<Dataset> {
    gen_structural(dag, cfg, cfg.n_source, subseed(cfg.seed, &[TAG_OBS]))
}

fn gen_structural(dag: &CausalDag, cfg: &DgpConfig, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = dag
        .nodes()
        .iter()
        .map(|_| gaussian_column(&mut rng, cfg.noise_mean, cfg.noise_sd, n))
        .collect();
    let idx_of = |id: NodeId| dag.nodes().iter().position(|nd| nd.id == id).unwrap();
    for id in dag.topological_sort()? {
        let i = idx_of(id);
        for (p, w) in dag.weighted_parents(id)? {
            let pi = idx_of(p);
            for r in 0..n {
                cols[i][r] += w * cols[pi][r];
            }
        }
    }
    let treatments: Vec<usize> = dag
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, nd)| nd.role == NodeRole::Treatment)
        .map(|(i, _)| i)
        .collect();
    if treatments.len() > 1 {
        return Err(Error::MissingRoles { treatments: treatments.len(), outcomes: 0 });
    }
    for &ti in &treatments {
        for v in cols[ti].iter_mut() {
            *v = if sigmoid(*v) > 0.5 { 1.0 } else { 0.0 };
        }
    }
    let treatment_name = treatments.first().map(|&i| dag.nodes()[i].name.clone());
    let outcome_name = dag
        .nodes()
        .iter()
        .find(|nd| nd.role == NodeRole::Outcome)
        .map(|nd| nd.name.clone());
    let columns = dag
        .nodes()
        .iter()
        .zip(cols)
        .map(|(nd, values)| {
            let kind = if Some(&nd.name) == treatment_name.as_ref() {
                ColumnKind::Binary
            } else {
                nd.kind
            };
            Column::new(nd.name.clone(), kind, values)
        })
        .collect();
    Dataset::new(columns, treatment_name, outcome_name)
}

/// True potential outcomes kept out of the selection path; exposed only for
/// evaluation.
#[derive(Debug, Clone)]
pub struct PotentialTruth {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
}

impl PotentialTruth {
    pub fn cate(&self) -> Vec<f64> {
        self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).collect()
    }
}

/// Interventional target data plus the sealed evaluation side-channel.
#[derive(Debug, Clone)]
pub struct TargetBundle {
    pub data: Dataset,
    truth: PotentialTruth,
}

impl TargetBundle {
    /// Covariates only: what selection is allowed to see.
    pub fn covariates(&self) -> Dataset {
        self.data.covariates()
    }

    /// Evaluation-only access to the true potential outcomes.
    pub fn truth(&self) -> &PotentialTruth {
        &self.truth
    }

    /// Writes the side-channel CSV (`y0,y1,cate`), kept separate from the
    /// selection-facing dataset.
    pub fn write_truth_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["y0", "y1", "cate"])?;
        for i in 0..self.truth.y0.len() {
            let (a, b) = (self.truth.y0[i], self.truth.y1[i]);
            w.write_record([format!("{a}"), format!("{b}"), format!("{}", b - a)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shifted interventional target data.
///
/// Perturbed nodes draw their root noise from `N(perturb_mean, perturb_sd)`;
/// structural propagation skips edges into the treatment and outcome; the
/// treatment is assigned 0 to the first half of the rows and 1 to the rest;
/// the outcome is the exact weighted sum of its parents under both treatment
/// values, yielding the true potential outcomes.
pub fn gen_treat_data(
    dag: &CausalDag,
    cfg: &DgpConfig,
    perturb_nodes: &BTreeSet<NodeId>,
) -> Result<TargetBundle> {
    let (t_id, y_id) = dag.selection_roles()?;
    let ancestors = dag.ancestors_of(y_id)?;
    if perturb_nodes.is_empty() || perturb_nodes.iter().any(|p| !ancestors.contains(p)) {
        return Err(Error::InvalidPerturbSet);
    }
    let n = cfg.n_target;
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, &[TAG_TREAT]));
    let mut cols: Vec<Vec<f64>> = dag
        .nodes()
        .iter()
        .map(|nd| {
            if perturb_nodes.contains(&nd.id) {
                gaussian_column(&mut rng, cfg.perturb_mean, cfg.perturb_sd, n)
            } else {
                gaussian_column(&mut rng, cfg.noise_mean, cfg.noise_sd, n)
            }
        })
        .collect();
    let idx_of = |id: NodeId| dag.nodes().iter().position(|nd| nd.id == id).unwrap();
    for id in dag.topological_sort()? {
        if id == t_id || id == y_id {
            continue;
        }
        let i = idx_of(id);
        for (p, w) in dag.weighted_parents(id)? {
            let pi = idx_of(p);
            for r in 0..n {
                cols[i][r] += w * cols[pi][r];
            }
        }
    }
    // assigned treatment: first half control, second half treated
    let n_control = n / 2;
    let t_idx = idx_of(t_id);
    for (r, v) in cols[t_idx].iter_mut().enumerate() {
        *v = if r < n_control { 0.0 } else { 1.0 };
    }
    // outcome from incoming edges under both treatment values
    let mut y0 = vec![0.0; n];
    for (p, w) in dag.weighted_parents(y_id)? {
        if p == t_id {
            continue;
        }
        let pi = idx_of(p);
        for r in 0..n {
            y0[r] += w * cols[pi][r];
        }
    }
    let treat_coef = dag.edge_weight(t_id, y_id).unwrap_or(0.0);
    let y1: Vec<f64> = y0.iter().map(|v| v + treat_coef).collect();
    let y_idx = idx_of(y_id);
    for r in 0..n {
        cols[y_idx][r] = if r < n_control { y0[r] } else { y1[r] };
    }

    let columns = dag
        .nodes()
        .iter()
        .zip(cols)
        .map(|(nd, values)| {
            let kind = if nd.id == t_id { ColumnKind::Binary } else { nd.kind };
            Column::new(nd.name.clone(), kind, values)
        })
        .collect();
    let data = Dataset::new(
        columns,
        Some(dag.node(t_id)?.name.clone()),
        Some(dag.node(y_id)?.name.clone()),
    )?;
    Ok(TargetBundle { data, truth: PotentialTruth { y0, y1 } })
}

/// Seeded shuffled row split, `frac` of the rows in the first part.
pub fn split_rows(data: &Dataset, frac: f64, seed: u64) -> (Dataset, Dataset) {
    let mut rows: Vec<usize> = (0..data.n_rows()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    let n_first = (data.n_rows() as f64 * frac).round() as usize;
    (data.select_rows(&rows[..n_first]), data.select_rows(&rows[n_first..]))
}

/// Seeded choice of shifted nodes: between one and `max_count` root
/// ancestors of the outcome. Shifts are applied to a node's own noise term,
/// so roots are the natural carriers; the treatment is excluded since its
/// root noise never reaches the assigned column.
pub fn choose_perturb_set(
    dag: &CausalDag,
    max_count: usize,
    seed: u64,
) -> Result<BTreeSet<NodeId>> {
    let (t_id, y_id) = dag.selection_roles()?;
    let mut candidates: Vec<NodeId> = dag
        .ancestors_of(y_id)?
        .into_iter()
        .filter(|&a| {
            a != t_id && dag.parents_of(a).map(|p| p.is_empty()).unwrap_or(false)
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidPerturbSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    let count = rng.random_range(1..=candidates.len().min(max_count.max(1)));
    Ok(candidates.into_iter().take(count).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbMode {
    /// Reverse existing edges.
    Reverse,
    /// Add spurious edges between non-adjacent pairs.
    Add,
}

/// Mutates `floor(fraction * |E|)` edges; mutations that would create a cycle
/// are resampled from the remaining candidates.
pub fn perturb_graph(
    dag: &CausalDag,
    fraction: f64,
    mode: PerturbMode,
    seed: u64,
) -> Result<CausalDag> {
    let k = (fraction * dag.edge_count() as f64).floor() as usize;
    if k == 0 {
        return Ok(dag.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = dag.nodes().to_vec();
    let mut edges = dag.edges().to_vec();
    let mut done = 0;
    match mode {
        PerturbMode::Reverse => {
            let mut order: Vec<usize> = (0..edges.len()).collect();
            order.shuffle(&mut rng);
            for idx in order {
                if done == k {
                    break;
                }
                let e = edges[idx].clone();
                edges[idx] = Edge { src: e.dst, dst: e.src, weight: e.weight };
                if CausalDag::new(nodes.clone(), edges.clone()).is_ok() {
                    done += 1;
                } else {
                    edges[idx] = e;
                }
            }
        }
        PerturbMode::Add => {
            let ids: Vec<NodeId> = nodes.iter().map(|nd| nd.id).collect();
            let mut pairs: Vec<(NodeId, NodeId)> = Vec::new();
            for &u in &ids {
                for &v in &ids {
                    if u != v && !dag.has_edge(u, v) && !dag.has_edge(v, u) {
                        pairs.push((u, v));
                    }
                }
            }
            pairs.shuffle(&mut rng);
            for (u, v) in pairs {
                if done == k {
                    break;
                }
                if edges.iter().any(|e| (e.src, e.dst) == (u, v) || (e.src, e.dst) == (v, u)) {
                    continue;
                }
                edges.push(Edge { src: u, dst: v, weight: None });
                if CausalDag::new(nodes.clone(), edges.clone()).is_ok() {
                    done += 1;
                } else {
                    edges.pop();
                }
            }
        }
    }
    if done < k {
        return Err(Error::NoAcyclicCompletion);
    }
    CausalDag::new(nodes, edges)
}
