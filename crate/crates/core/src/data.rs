//! Two-level data: one row per group for group-level variables, one row per
//! unit for unit-level variables.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Level, NodeCounts, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierDataset {
    /// Group-level columns `Z1..Zq`, each of length `m`.
    pub z: Vec<Vec<f64>>,
    /// Second grouping factor columns `W1..`, each of length `m`.
    pub w: Option<Vec<Vec<f64>>>,
    /// Unit-level columns `X1..Xp`, each of length `N = sum_j n_j`.
    pub x: Vec<Vec<f64>>,
    /// 0-based group of every unit row.
    pub group: Vec<usize>,
    /// External identifier of each group, in row order of `z`.
    pub group_labels: Vec<i64>,
}

impl HierDataset {
    pub fn new(
        z: Vec<Vec<f64>>,
        w: Option<Vec<Vec<f64>>>,
        x: Vec<Vec<f64>>,
        group: Vec<usize>,
        n_groups: usize,
    ) -> Result<Self> {
        let ds = HierDataset {
            z,
            w,
            x,
            group,
            group_labels: (1..=n_groups as i64).collect(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.m() {
            return Err(Error::usage("one label per group required"));
        }
        self.group_labels = labels;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.group_labels.len();
        if m == 0 {
            return Err(Error::usage("dataset has no groups"));
        }
        for (k, col) in self.z.iter().enumerate() {
            if col.len() != m {
                return Err(Error::usage(format!(
                    "Z{} has {} values for {m} groups",
                    k + 1,
                    col.len()
                )));
            }
        }
        if let Some(w) = &self.w {
            for (k, col) in w.iter().enumerate() {
                if col.len() != m {
                    return Err(Error::usage(format!(
                        "W{} has {} values for {m} groups",
                        k + 1,
                        col.len()
                    )));
                }
            }
        }
        let n = self.group.len();
        for (k, col) in self.x.iter().enumerate() {
            if col.len() != n {
                return Err(Error::usage(format!(
                    "X{} has {} values for {n} units",
                    k + 1,
                    col.len()
                )));
            }
        }
        if let Some(&g) = self.group.iter().find(|&&g| g >= m) {
            return Err(Error::usage(format!("unit group index {g} out of range (m = {m})")));
        }
        let sizes = self.group_sizes();
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::usage(format!("group {} has no units", self.group_labels[j])));
        }
        let all = self.z.iter().chain(self.w.iter().flatten()).chain(self.x.iter());
        if all.flatten().any(|v| !v.is_finite()) {
            return Err(Error::usage("dataset contains non-finite values"));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.group_labels.len()
    }
    pub fn q(&self) -> usize {
        self.z.len()
    }
    pub fn q_w(&self) -> usize {
        self.w.as_ref().map_or(0, Vec::len)
    }
    pub fn p(&self) -> usize {
        self.x.len()
    }
    pub fn n_units(&self) -> usize {
        self.group.len()
    }

    pub fn counts(&self) -> NodeCounts {
        NodeCounts {
            z: self.q(),
            w: self.q_w(),
            x: self.p(),
            u: 0,
        }
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.m()];
        for &g in &self.group {
            s[g] += 1;
        }
        s
    }

    /// Largest group; ties go to the lowest group index.
    pub fn largest_group(&self) -> usize {
        let sizes = self.group_sizes();
        let mut best = 0;
        for (j, &s) in sizes.iter().enumerate() {
            if s > sizes[best] {
                best = j;
            }
        }
        best
    }

    pub fn rows_of_group(&self, g: usize) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.group[i] == g).collect()
    }

    /// The observed column of a group-level or unit-level node.
    pub fn column(&self, node: NodeId) -> Result<&[f64]> {
        let cols = match node.level {
            Level::GroupZ => &self.z,
            Level::GroupW => self
                .w
                .as_ref()
                .ok_or_else(|| Error::usage("dataset has no second grouping factor"))?,
            Level::Unit => &self.x,
            Level::LatentU => return Err(Error::usage("latent variables are not observed")),
        };
        cols.get(node.idx())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::usage(format!("no variable {node} in dataset")))
    }

    /// A group-level column repeated onto unit rows.
    pub fn expand_to_units(&self, values: &[f64]) -> Vec<f64> {
        self.group.iter().map(|&g| values[g]).collect()
    }

    /// Values of `node` aligned with unit rows.
    pub fn unit_aligned(&self, node: NodeId) -> Result<Vec<f64>> {
        let col = self.column(node)?;
        Ok(if node.level == Level::Unit {
            col.to_vec()
        } else {
            self.expand_to_units(col)
        })
    }

    /// Unit rows restricted to one group, as columns.
    pub fn units_in_group(&self, g: usize) -> Vec<Vec<f64>> {
        let rows = self.rows_of_group(g);
        self.x
            .iter()
            .map(|col| rows.iter().map(|&i| col[i]).collect())
            .collect()
    }
}
