//! Column-typed tabular data with designated treatment/outcome columns.
//!
//! A [`Dataset`] is stored column-major. Target-domain covariate sets carry
//! no outcome column; the designations are part of the data, not the schema
//! of any particular model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical,
}

impl ColumnKind {
    pub fn is_discrete(self) -> bool {
        matches!(self, ColumnKind::Binary | ColumnKind::Categorical)
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, ColumnKind::Categorical)
    }
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind, values: Vec<f64>) -> Self {
        Column { name: name.into(), kind, values }
    }
}

/// Sidecar metadata serialized next to a dataset CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub columns: Vec<ColumnMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Column>,
    treatment: Option<String>,
    outcome: Option<String>,
}

impl Dataset {
    pub fn new(
        columns: Vec<Column>,
        treatment: Option<String>,
        outcome: Option<String>,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = columns[0].values.len();
        for c in &columns {
            if c.values.len() != n {
                return Err(Error::RaggedColumns);
            }
            if c.kind == ColumnKind::Binary
                && c.values.iter().any(|&v| v != 0.0 && v != 1.0)
            {
                return Err(Error::NotBinary(c.name.clone()));
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::SchemaMismatch(format!("duplicate column {:?}", c.name)));
            }
        }
        if let Some(t) = &treatment {
            if !columns.iter().any(|c| &c.name == t) {
                return Err(Error::ColumnMismatch(t.clone()));
            }
        }
        if let Some(y) = &outcome {
            if !columns.iter().any(|c| &c.name == y) {
                return Err(Error::ColumnMismatch(y.clone()));
            }
        }
        Ok(Dataset { columns, treatment, outcome })
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::ColumnMismatch(name.to_string()))
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.column(name)?.values)
    }

    pub fn treatment_name(&self) -> Option<&str> {
        self.treatment.as_deref()
    }

    pub fn outcome_name(&self) -> Option<&str> {
        self.outcome.as_deref()
    }

    pub fn treatment_values(&self) -> Result<&[f64]> {
        let name = self.treatment.as_deref().ok_or(Error::MissingTreatment)?;
        self.values(name)
    }

    pub fn outcome_values(&self) -> Result<&[f64]> {
        let name = self.outcome.as_deref().ok_or(Error::MissingOutcome)?;
        self.values(name)
    }

    /// Covariate columns, i.e. everything except the designated treatment and
    /// outcome columns.
    pub fn covariates(&self) -> Dataset {
        let cols: Vec<Column> = self
            .columns
            .iter()
            .filter(|c| {
                Some(c.name.as_str()) != self.treatment.as_deref()
                    && Some(c.name.as_str()) != self.outcome.as_deref()
            })
            .cloned()
            .collect();
        Dataset { columns: cols, treatment: None, outcome: None }
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| {
                Some(c.name.as_str()) != self.treatment.as_deref()
                    && Some(c.name.as_str()) != self.outcome.as_deref()
            })
            .map(|c| c.name.clone())
            .collect()
    }

    /// New dataset containing the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind,
                values: rows.iter().map(|&i| c.values[i]).collect(),
            })
            .collect();
        Dataset { columns, treatment: self.treatment.clone(), outcome: self.outcome.clone() }
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            columns: self
                .columns
                .iter()
                .map(|c| ColumnMeta { name: c.name.clone(), kind: c.kind })
                .collect(),
            treatment: self.treatment.clone(),
            outcome: self.outcome.clone(),
        }
    }

    /// Writes `<path>` as CSV and the sidecar metadata JSON next to it.
    pub fn write_csv(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.n_rows() {
            w.write_record(self.columns.iter().map(|c| format!("{}", c.values[i])))?;
        }
        w.flush()?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        std::fs::write(meta_path, meta + "\n")?;
        Ok(())
    }

    pub fn read_csv(csv_path: &Path, meta_path: &Path) -> Result<Dataset> {
        let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
        let mut rdr = csv::Reader::from_path(csv_path)?;
        let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
        let mut by_name: Vec<(usize, ColumnKind)> = Vec::with_capacity(meta.columns.len());
        for cm in &meta.columns {
            let idx = headers
                .iter()
                .position(|h| h == &cm.name)
                .ok_or_else(|| Error::ColumnMismatch(cm.name.clone()))?;
            by_name.push((idx, cm.kind));
        }
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); meta.columns.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (slot, (idx, _)) in by_name.iter().enumerate() {
                let raw = rec.get(*idx).ok_or(Error::RaggedColumns)?;
                let v: f64 = raw
                    .parse()
                    .map_err(|_| Error::NonNumericColumn(meta.columns[slot].name.clone()))?;
                values[slot].push(v);
            }
        }
        let columns = meta
            .columns
            .iter()
            .zip(values)
            .map(|(cm, vals)| Column { name: cm.name.clone(), kind: cm.kind, values: vals })
            .collect();
        Dataset::new(columns, meta.treatment, meta.outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![
                Column::new("x", ColumnKind::Continuous, vec![1.0, 2.0, 3.0]),
                Column::new("t", ColumnKind::Binary, vec![0.0, 1.0, 0.0]),
                Column::new("y", ColumnKind::Continuous, vec![0.5, 1.5, 2.5]),
            ],
            Some("t".into()),
            Some("y".into()),
        )
        .unwrap()
    }

    #[test]
    fn designations_and_covariates() {
        let d = toy();
        assert_eq!(d.treatment_values().unwrap(), &[0.0, 1.0, 0.0]);
        assert_eq!(d.outcome_values().unwrap(), &[0.5, 1.5, 2.5]);
        let cov = d.covariates();
        assert_eq!(cov.n_cols(), 1);
        assert_eq!(cov.columns()[0].name, "x");
    }

    #[test]
    fn rejects_bad_binary_and_ragged() {
        let bad = Dataset::new(
            vec![Column::new("t", ColumnKind::Binary, vec![0.0, 2.0])],
            None,
            None,
        );
        assert!(matches!(bad, Err(Error::NotBinary(_))));
        let ragged = Dataset::new(
            vec![
                Column::new("a", ColumnKind::Continuous, vec![1.0]),
                Column::new("b", ColumnKind::Continuous, vec![1.0, 2.0]),
            ],
            None,
            None,
        );
        assert!(matches!(ragged, Err(Error::RaggedColumns)));
    }

    #[test]
    fn csv_round_trip() {
        let d = toy();
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("d.csv");
        let meta = dir.path().join("d.meta.json");
        d.write_csv(&csv, &meta).unwrap();
        let back = Dataset::read_csv(&csv, &meta).unwrap();
        assert_eq!(back.n_rows(), 3);
        assert_eq!(back.values("y").unwrap(), d.values("y").unwrap());
        assert_eq!(back.treatment_name(), Some("t"));
    }

    #[test]
    fn select_rows_reorders() {
        let d = toy();
        let s = d.select_rows(&[2, 0]);
        assert_eq!(s.values("x").unwrap(), &[3.0, 1.0]);
    }
}
