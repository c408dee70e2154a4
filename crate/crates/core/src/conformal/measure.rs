use std::fmt::Write as _;
use std::path::Path;

use super::dilation::{apply_dilation, ConformalDilation};
use super::{norm, Vec3};
use crate::error::{LabError, Result};
use crate::exec::{sum_range, Execution};

/// Nodes must have unit norm to within this.
pub const UNIT_TOL: f64 = 1e-12;

/// Positive weights on unit vectors of S².
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
}

impl WeightedMeasure {
    pub fn new(nodes: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(LabError::DegenerateMeasure("no nodes".into()));
        }
        if nodes.len() != weights.len() {
            return Err(LabError::InvalidParameter(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        for (i, (p, &w)) in nodes.iter().zip(&weights).enumerate() {
            let r = norm(*p);
            if !((r - 1.0).abs() <= UNIT_TOL) {
                return Err(LabError::InvalidParameter(format!("node {i} has norm {r}, not 1")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(LabError::InvalidParameter(format!("weight {i} = {w} is not positive")));
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Largest mass carried by a single point, merging coincident nodes.
    pub fn max_atom(&self) -> f64 {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let key = |i: usize| self.nodes[i].map(f64::to_bits);
        order.sort_by_key(|&i| key(i));
        let mut best = 0.0f64;
        let mut k = 0;
        while k < order.len() {
            let mut mass = 0.0;
            let mut j = k;
            while j < order.len() && key(order[j]) == key(order[k]) {
                mass += self.weights[order[j]];
                j += 1;
            }
            best = best.max(mass);
            k = j;
        }
        best
    }

    /// Push-forward under `d`, with the same weights.
    pub fn dilated(&self, d: &ConformalDilation) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|&p| {
                let q = apply_dilation(p, d);
                let r = norm(q);
                [q[0] / r, q[1] / r, q[2] / r]
            })
            .collect();
        Self {
            nodes,
            weights: self.weights.clone(),
        }
    }

    /// Measure file text: header `nx,ny,nz,weight`, then one row per node.
    pub fn csv_string(&self) -> String {
        let mut s = String::from("nx,ny,nz,weight\n");
        for (p, w) in self.nodes.iter().zip(&self.weights) {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], p[2], w);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv_string())?;
        Ok(())
    }

    /// Parses a measure file. The header row is optional; lines starting
    /// with `#` are ignored.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let line = |r: &csv::StringRecord| r.position().map_or(k + 1, |p| p.line() as usize);
            let record = record.map_err(|e| LabError::Parse {
                line: e.position().map_or(k + 1, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            if k == 0 && record.get(0) == Some("nx") {
                continue;
            }
            if record.len() != 4 {
                return Err(LabError::Parse {
                    line: line(&record),
                    message: format!("expected 4 fields nx,ny,nz,weight, found {}", record.len()),
                });
            }
            let mut v = [0.0; 4];
            for (slot, field) in v.iter_mut().zip(record.iter()) {
                *slot = field.parse().map_err(|_| LabError::Parse {
                    line: line(&record),
                    message: format!("`{field}` is not a number"),
                })?;
            }
            nodes.push([v[0], v[1], v[2]]);
            weights.push(v[3]);
        }
        Self::new(nodes, weights)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }
}

/// Weight-normalised mean of the dilated nodes.
pub fn center_of_mass(m: &WeightedMeasure, d: &ConformalDilation) -> Vec3 {
    center_of_mass_with(Execution::best(), m, d)
}

pub fn center_of_mass_with(exec: Execution, m: &WeightedMeasure, d: &ConformalDilation) -> Vec3 {
    let s = sum_range::<4, _>(exec, m.len(), |i| {
        let q = apply_dilation(m.nodes[i], d);
        let w = m.weights[i];
        [w * q[0], w * q[1], w * q[2], w]
    });
    [s[0] / s[3], s[1] / s[3], s[2] / s[3]]
}
