use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::features::{CatalogId, Category, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    /// Known when the column comes from a built-in catalog.
    pub category: Option<Category>,
}

/// Dense labeled training data. Rows are finite; labels are `< n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub catalog: String,
    pub features: Vec<FeatureInfo>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(
        catalog: impl Into<String>,
        features: Vec<FeatureInfo>,
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, ClassifierError> {
        let bad = |m: String| Err(ClassifierError::InvalidDataset(m));
        if x.len() != y.len() {
            return bad(format!("{} rows but {} labels", x.len(), y.len()));
        }
        if n_classes == 0 {
            return bad("class count must be positive".into());
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != features.len() {
                return bad(format!("row {i} has {} values, expected {}", row.len(), features.len()));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return bad(format!("row {i} contains non-finite value {v}"));
            }
        }
        if let Some(&l) = y.iter().find(|&&l| l >= n_classes) {
            return bad(format!("label {l} out of range for {n_classes} classes"));
        }
        Ok(Self { catalog: catalog.into(), features, x, y, n_classes })
    }

    /// Anonymous dataset with features named `f0, f1, ...`.
    pub fn from_rows(x: Vec<Vec<f64>>, y: Vec<usize>, n_classes: usize) -> Result<Self, ClassifierError> {
        let d = x.first().map_or(0, Vec::len);
        let features = (0..d).map(|i| FeatureInfo { name: format!("f{i}"), category: None }).collect();
        Self::new(format!("anon-{d}"), features, x, y, n_classes)
    }

    /// Builds a dataset from the labeled rows of a feature matrix; unlabeled
    /// rows are skipped. `label_of` maps label strings to class indices.
    pub fn from_matrix(
        m: &FeatureMatrix,
        n_classes: usize,
        label_of: impl Fn(&str) -> Option<usize>,
    ) -> Result<Self, ClassifierError> {
        let catalog = m.catalog.parse::<CatalogId>().ok().map(CatalogId::catalog);
        let features = m
            .feature_names
            .iter()
            .map(|name| FeatureInfo {
                name: name.clone(),
                category: catalog.and_then(|c| c.index_of(name).map(|i| c.entries[i].category)),
            })
            .collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for row in &m.rows {
            let Some(label) = &row.label else { continue };
            let class = label_of(label).ok_or_else(|| {
                ClassifierError::InvalidDataset(format!("session {}: unknown label {label:?}", row.session_id))
            })?;
            x.push(row.values.clone());
            y.push(class);
        }
        Self::new(m.catalog.clone(), features, x, y, n_classes)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &l in &self.y {
            c[l] += 1;
        }
        c
    }

    /// Rows at `idx` (repeats allowed), same columns.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            catalog: self.catalog.clone(),
            features: self.features.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// Keeps the given columns in the given order. The catalog name records
    /// the selection so models trained on it reject full-catalog vectors.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let list: Vec<String> = cols.iter().map(usize::to_string).collect();
        Self {
            catalog: format!("{}[{}]", self.catalog, list.join(",")),
            features: cols.iter().map(|&c| self.features[c].clone()).collect(),
            x: self.x.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect(),
            y: self.y.clone(),
            n_classes: self.n_classes,
        }
    }

    /// Values of one column.
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[c]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Dataset::from_rows(vec![vec![1.0]], vec![0, 1], 2).is_err());
        assert!(Dataset::from_rows(vec![vec![f64::NAN]], vec![0], 2).is_err());
        assert!(Dataset::from_rows(vec![vec![1.0]], vec![3], 2).is_err());
        assert!(Dataset::from_rows(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 0], 2).is_err());
    }

    #[test]
    fn column_selection() {
        let d = Dataset::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], vec![0, 1], 2).unwrap();
        let s = d.select_columns(&[2, 0]);
        assert_eq!(s.x, vec![vec![3.0, 1.0], vec![6.0, 4.0]]);
        assert_eq!(s.catalog, "anon-3[2,0]");
        assert_eq!(s.features[0].name, "f2");
        assert_eq!(d.subset(&[1, 1]).y, vec![1, 1]);
    }
}
