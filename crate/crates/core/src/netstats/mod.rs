//! Directed binary and weighted node statistics: degrees, strengths,
//! average nearest-neighbour degree/strength and clustering coefficients.

mod kinds;
mod stats;

pub use kinds::{Direction, Motif, NeighborVariant, NodeStatKind};
pub use stats::{
    annd, anns, clustering_binary, clustering_weighted, degrees, node_stat, reciprocal_degree,
    strengths, NodeStats,
};

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::CrossSection;

/// How link weights are mapped before weighted statistics are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightTransform {
    #[default]
    Identity,
    /// `ln w` on links, 0 elsewhere. Links keep their place in the adjacency
    /// even when the log is negative.
    LogPositive,
}

/// A directed network on `n` nodes with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeNetwork {
    pub n: usize,
    pub weights: DMatrix<f64>,
    pub adjacency: DMatrix<f64>,
}

impl TradeNetwork {
    /// Network from non-negative weights in levels; `a_ij = 1 ⇔ w_ij > 0`.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        check_square(&weights)?;
        for ((i, j), &w) in indexed(&weights) {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::validation(
                    None,
                    format!("weight ({i}, {j}) must be finite and non-negative, got {w}"),
                ));
            }
            if i == j && w != 0.0 {
                return Err(Error::validation(None, format!("diagonal weight ({i}, {i}) is {w}")));
            }
        }
        let adjacency = weights.map(|w| if w > 0.0 { 1.0 } else { 0.0 });
        Ok(Self {
            n: weights.nrows(),
            weights,
            adjacency,
        })
    }

    /// Network from level weights after applying `transform`.
    pub fn transformed(levels: DMatrix<f64>, transform: WeightTransform) -> Result<Self> {
        let net = Self::from_weights(levels)?;
        Ok(match transform {
            WeightTransform::Identity => net,
            WeightTransform::LogPositive => Self {
                weights: net.weights.map(|w| if w > 0.0 { w.ln() } else { 0.0 }),
                ..net
            },
        })
    }

    /// Network with an explicit binary structure; weights may be any finite
    /// reals on links and must vanish off links.
    pub fn with_adjacency(weights: DMatrix<f64>, adjacency: DMatrix<f64>) -> Result<Self> {
        check_square(&weights)?;
        if weights.shape() != adjacency.shape() {
            return Err(Error::Schema(format!(
                "weights are {:?} but adjacency is {:?}",
                weights.shape(),
                adjacency.shape()
            )));
        }
        for ((i, j), &a) in indexed(&adjacency) {
            let w = weights[(i, j)];
            if a != 0.0 && a != 1.0 {
                return Err(Error::validation(None, format!("adjacency ({i}, {j}) is {a}, not 0/1")));
            }
            if i == j && a != 0.0 {
                return Err(Error::validation(None, format!("adjacency has a self-loop at {i}")));
            }
            if !w.is_finite() || (a == 0.0 && w != 0.0) {
                return Err(Error::validation(
                    None,
                    format!("weight ({i}, {j}) = {w} is inconsistent with adjacency {a}"),
                ));
            }
        }
        Ok(Self {
            n: weights.nrows(),
            weights,
            adjacency,
        })
    }

    /// Binary network; weights equal the adjacency.
    pub fn binary(adjacency: DMatrix<f64>) -> Result<Self> {
        Self::with_adjacency(adjacency.clone(), adjacency)
    }

    pub fn from_cross_section(cs: &CrossSection, transform: WeightTransform) -> Result<Self> {
        Self::transformed(cs.weights.clone(), transform)
    }

    pub fn n_links(&self) -> usize {
        self.adjacency.iter().filter(|a| **a > 0.0).count()
    }

    pub fn density(&self) -> f64 {
        density_from_counts(self.n_links(), self.n)
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Schema(format!("network matrix is {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

fn indexed(m: &DMatrix<f64>) -> impl Iterator<Item = ((usize, usize), &f64)> {
    let n = m.nrows();
    m.iter().enumerate().map(move |(k, v)| ((k % n, k / n), v))
}

/// `links / (n(n−1))`; 0 for fewer than two nodes.
pub fn density_from_counts(links: usize, n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        links as f64 / (n * (n - 1)) as f64
    }
}

pub fn density(net: &TradeNetwork) -> f64 {
    net.density()
}

/// Per-node values of one statistic; `None` marks an undefined entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStatVector {
    pub kind: NodeStatKind,
    pub values: Vec<Option<f64>>,
}

impl NodeStatVector {
    pub fn n_defined(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn defined(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationAverage {
    pub mean: f64,
    pub n_defined: usize,
    pub n_excluded: usize,
}

/// Mean over the defined nodes.
pub fn population_average(x: &NodeStatVector) -> Result<PopulationAverage> {
    let vals = x.defined();
    if vals.is_empty() {
        return Err(Error::Undefined(format!("{} is undefined at every node", x.kind)));
    }
    Ok(PopulationAverage {
        mean: vals.iter().sum::<f64>() / vals.len() as f64,
        n_defined: vals.len(),
        n_excluded: x.values.len() - vals.len(),
    })
}

/// Pearson correlation over nodes where both statistics are defined.
pub fn stat_correlation(x: &NodeStatVector, y: &NodeStatVector) -> Result<f64> {
    if x.values.len() != y.values.len() {
        return Err(Error::Schema(format!(
            "{} has {} nodes but {} has {}",
            x.kind,
            x.values.len(),
            y.kind,
            y.values.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = x
        .values
        .iter()
        .zip(&y.values)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation of {} and {} needs 3 jointly defined nodes, found {}",
            x.kind,
            y.kind,
            pairs.len()
        )));
    }
    pearson(&pairs).ok_or_else(|| {
        Error::Undefined(format!("correlation of {} and {}: zero variance", x.kind, y.kind))
    })
}

pub(crate) fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(a, b) in pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let scale = mx.abs().max(my.abs()).max(1.0);
    if sxx <= 1e-24 * scale * scale * n || syy <= 1e-24 * scale * scale * n {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Writes `country,kind,value,defined` rows; undefined values are empty.
pub fn write_node_stats_csv<W: Write>(countries: &[String], stats: &[NodeStatVector], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["country", "kind", "value", "defined"])?;
    for s in stats {
        if s.values.len() != countries.len() {
            return Err(Error::Schema(format!(
                "{} has {} values for {} countries",
                s.kind,
                s.values.len(),
                countries.len()
            )));
        }
        for (c, v) in countries.iter().zip(&s.values) {
            let value = v.map(|x| x.to_string()).unwrap_or_default();
            let defined = if v.is_some() { "1" } else { "0" };
            wtr.write_record([c.as_str(), s.kind.name(), &value, defined])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
