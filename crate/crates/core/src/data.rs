use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A named numeric column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Paired responses with optional covariates and component labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    #[serde(default)]
    pub covariates: Vec<Column>,
    #[serde(default)]
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self {
            y1: pairs.iter().map(|p| p.0).collect(),
            y2: pairs.iter().map(|p| p.1).collect(),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.y1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y1.is_empty()
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.y1.iter().copied().zip(self.y2.iter().copied()).collect()
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    /// Checks that every column has the same length.
    pub fn validate(&self) -> Result<()> {
        let n = self.y1.len();
        let mismatch = self.y2.len() != n
            || self.covariates.iter().any(|c| c.values.len() != n)
            || self.labels.as_ref().is_some_and(|l| l.len() != n);
        if mismatch {
            return Err(Error::Argument("dataset columns have unequal lengths".into()));
        }
        Ok(())
    }

    /// Design matrix rows `[1, x_1, …, x_p]` for the named covariates.
    pub fn design(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let cols = names
            .iter()
            .map(|n| {
                self.covariate(n)
                    .ok_or_else(|| Error::Argument(format!("unknown covariate column '{n}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..self.len())
            .map(|i| std::iter::once(1.0).chain(cols.iter().map(|c| c[i])).collect())
            .collect())
    }

    /// Keeps the rows where `keep` is true.
    pub fn subset(&self, keep: &[bool]) -> Self {
        let pick = |v: &[f64]| v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect();
        Self {
            y1: pick(&self.y1),
            y2: pick(&self.y2),
            covariates: self
                .covariates
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: pick(&c.values),
                })
                .collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| l.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| *x).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_has_intercept_column() {
        let d = Dataset {
            y1: vec![1.0, 2.0],
            y2: vec![3.0, 4.0],
            covariates: vec![Column {
                name: "x".into(),
                values: vec![0.5, -1.0],
            }],
            labels: None,
        };
        let x = d.design(&["x".to_string()]).unwrap();
        assert_eq!(x, vec![vec![1.0, 0.5], vec![1.0, -1.0]]);
        assert!(d.design(&["z".to_string()]).is_err());
        assert_eq!(d.design(&[]).unwrap(), vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn subset_keeps_alignment() {
        let d = Dataset {
            y1: vec![1.0, 2.0, 3.0],
            y2: vec![4.0, 5.0, 6.0],
            covariates: vec![],
            labels: Some(vec![0, 1, 0]),
        };
        let s = d.subset(&[true, false, true]);
        assert_eq!(s.y2, vec![4.0, 6.0]);
        assert_eq!(s.labels, Some(vec![0, 0]));
    }
}
