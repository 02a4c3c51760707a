use nalgebra::DMatrix;

use super::LinkProbabilityMatrix;
use crate::error::{Error, Result};
use crate::netstats::density_from_counts;

/// Deterministic binary prediction with the threshold that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryPrediction {
    pub adjacency: DMatrix<f64>,
    pub threshold: f64,
    pub realized_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManhattanThreshold {
    pub threshold: f64,
    /// `Σ|â_ij − a_ij|` at the chosen threshold.
    pub distance: usize,
    pub adjacency: DMatrix<f64>,
}

fn above(xi: &LinkProbabilityMatrix, s: f64) -> (DMatrix<f64>, usize) {
    let n = xi.n();
    let mut links = 0;
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i != j && xi.xi[(i, j)] > s {
            links += 1;
            1.0
        } else {
            0.0
        }
    });
    (a, links)
}

/// `â_ij = 1 ⇔ ξ_ij > ρ`.
pub fn density_induced_binary(xi: &LinkProbabilityMatrix, rho: f64) -> Result<BinaryPrediction> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Precondition(format!("density must lie in (0, 1), got {rho}")));
    }
    let (adjacency, links) = above(xi, rho);
    Ok(BinaryPrediction {
        adjacency,
        threshold: rho,
        realized_density: density_from_counts(links, xi.n()),
    })
}

/// Threshold `s` minimizing `Σ|1{ξ_ij > s} − a_ij|` over `{0} ∪ {ξ_ij}`;
/// ties go to the smallest `s`.
pub fn threshold_by_manhattan(xi: &LinkProbabilityMatrix, observed: &DMatrix<f64>) -> Result<ManhattanThreshold> {
    let n = xi.n();
    if observed.shape() != (n, n) {
        return Err(Error::Schema(format!(
            "observed adjacency is {:?}, probabilities are {n}x{n}",
            observed.shape()
        )));
    }
    let mut entries: Vec<(f64, bool)> = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                entries.push((xi.xi[(i, j)], observed[(i, j)] > 0.0));
            }
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ones = entries.iter().filter(|e| e.1).count();

    // At s = 0 every entry with ξ > 0 is predicted present.
    let zeros_at_zero = entries.iter().filter(|e| e.0 <= 0.0).count();
    let mut off_ones = entries[..zeros_at_zero].iter().filter(|e| e.1).count();
    let mut off_zeros = zeros_at_zero - off_ones;
    let distance = |off_ones: usize, off_zeros: usize| {
        let on_zeros = entries.len() - ones - off_zeros;
        off_ones + on_zeros
    };
    let mut best = (distance(off_ones, off_zeros), 0.0);

    let mut k = zeros_at_zero;
    while k < entries.len() {
        let s = entries[k].0;
        while k < entries.len() && entries[k].0 == s {
            if entries[k].1 {
                off_ones += 1;
            } else {
                off_zeros += 1;
            }
            k += 1;
        }
        let d = distance(off_ones, off_zeros);
        if d < best.0 {
            best = (d, s);
        }
    }
    let (adjacency, _) = above(xi, best.1);
    Ok(ManhattanThreshold {
        threshold: best.1,
        distance: best.0,
        adjacency,
    })
}

/// Threshold whose induced link count is closest to `ρ·N(N−1)`, searched
/// over `{0} ∪ {ξ_ij}`; ties go to the smallest threshold. Unlike
/// [`density_induced_binary`] the realized density tracks `ρ` up to ties in
/// `ξ`.
pub fn density_matched_binary(xi: &LinkProbabilityMatrix, rho: f64) -> Result<BinaryPrediction> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Precondition(format!("density must lie in (0, 1), got {rho}")));
    }
    let n = xi.n();
    let cells = n * n.saturating_sub(1);
    let target = rho * cells as f64;
    let mut values: Vec<f64> = Vec::with_capacity(cells);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                values.push(xi.xi[(i, j)]);
            }
        }
    }
    values.sort_by(|a, b| b.total_cmp(a));
    // Walking down the sorted values, the count above `s = values[k]` is the
    // number of strictly larger entries.
    let mut best = (f64::INFINITY, 0.0);
    let mut consider = |count: usize, s: f64| {
        let gap = (count as f64 - target).abs();
        if gap < best.0 || (gap == best.0 && s < best.1) {
            best = (gap, s);
        }
    };
    let mut k = 0;
    while k < values.len() {
        let s = values[k];
        consider(k, s);
        while k < values.len() && values[k] == s {
            k += 1;
        }
    }
    consider(values.iter().filter(|v| **v > 0.0).count(), 0.0);
    let (adjacency, links) = above(xi, best.1);
    Ok(BinaryPrediction {
        adjacency,
        threshold: best.1,
        realized_density: density_from_counts(links, n),
    })
}
