//! Statistical conditional-independence testing on data, and the count of
//! graph-implied independencies a dataset violates.

use std::collections::BTreeSet;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::CausalDag;
use crate::numeric;

/// Residual variance below this fraction of the raw column variance is
/// treated as exactly deterministic; the residual is then independent of
/// anything and its correlation is taken to be zero.
const DEGENERATE_VAR_RATIO: f64 = 1e-16;

#[derive(Debug, Clone, Copy)]
pub struct CiTestConfig {
    /// Two-sided significance level of the Fisher z test.
    pub alpha: f64,
    /// |r| is clamped to this value before the Fisher transform.
    pub correlation_clamp: f64,
}

impl Default for CiTestConfig {
    fn default() -> Self {
        CiTestConfig { alpha: 0.05, correlation_clamp: 1.0 - 1e-7 }
    }
}

impl CiTestConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        CiTestConfig { alpha, ..Default::default() }
    }
}

fn numeric_column<'a>(data: &'a Dataset, name: &str) -> Result<&'a [f64]> {
    let col = data.column(name)?;
    if !col.kind.is_numeric() {
        return Err(Error::NonNumericColumn(name.to_string()));
    }
    Ok(&col.values)
}

/// Partial-correlation residuals of `target` after regressing on `given`
/// (with intercept).
fn residualize(data: &Dataset, target: &str, given: &[&str]) -> Result<Vec<f64>> {
    let y = numeric_column(data, target)?;
    if given.is_empty() {
        let m = numeric::mean(y);
        return Ok(y.iter().map(|v| v - m).collect());
    }
    let cols: Vec<&[f64]> = given
        .iter()
        .map(|g| numeric_column(data, g))
        .collect::<Result<_>>()?;
    let x = numeric::design_with_intercept(&cols, y.len());
    Ok(numeric::ols_residuals(&x, y))
}

/// Fisher z partial-correlation test. Returns `true` when `a` and `b` are
/// accepted as conditionally independent given `given`.
pub fn fisher_z_test(
    data: &Dataset,
    a: &str,
    b: &str,
    given: &BTreeSet<String>,
    cfg: &CiTestConfig,
) -> Result<bool> {
    let n = data.n_rows();
    if n <= given.len() + 3 {
        return Err(Error::InsufficientSamples { needed: given.len() + 3, got: n });
    }
    let given_refs: Vec<&str> = given.iter().map(|s| s.as_str()).collect();
    let res_a = residualize(data, a, &given_refs)?;
    let res_b = residualize(data, b, &given_refs)?;

    let var_a = numeric::variance(&res_a);
    let var_b = numeric::variance(&res_b);
    let raw_a = numeric::variance(numeric_column(data, a)?);
    let raw_b = numeric::variance(numeric_column(data, b)?);
    // A residual that is (numerically) deterministic carries no dependence.
    let degenerate = |res_var: f64, raw_var: f64| res_var <= DEGENERATE_VAR_RATIO * raw_var.max(1e-300);
    let r = if degenerate(var_a, raw_a) || degenerate(var_b, raw_b) {
        0.0
    } else {
        numeric::covariance(&res_a, &res_b) / (var_a * var_b).sqrt()
    };

    let clamped = r.clamp(-cfg.correlation_clamp, cfg.correlation_clamp);
    let z = clamped.atanh() * ((n - given.len()) as f64 - 3.0).sqrt();
    let threshold = Normal::standard().inverse_cdf(1.0 - cfg.alpha / 2.0);
    Ok(z.abs() <= threshold)
}

/// Number of local-Markov independencies of `dag` that the data rejects.
pub fn nci_count(dag: &CausalDag, data: &Dataset, cfg: &CiTestConfig) -> Result<usize> {
    for node in dag.nodes() {
        if data.column(&node.name).is_err() {
            return Err(Error::ColumnMismatch(node.name.clone()));
        }
    }
    let name_of = |id| dag.node(id).map(|n| n.name.clone());
    let mut violations = 0;
    for stmt in dag.local_markov_set() {
        let a = name_of(stmt.a)?;
        let b = name_of(stmt.b)?;
        let given: BTreeSet<String> =
            stmt.given.iter().map(|&g| name_of(g)).collect::<Result<_>>()?;
        if !fisher_z_test(data, &a, &b, &given, cfg)? {
            violations += 1;
        }
    }
    Ok(violations)
}
