//! Literal loop implementations of the node statistics, written straight
//! from the formula table with no shared intermediates.

use gravnet::netstats::{Direction, Motif, NeighborVariant, NodeStatKind};
use nalgebra::DMatrix;

pub struct Oracle {
    n: usize,
    a: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

impl Oracle {
    pub fn new(weights: &DMatrix<f64>, adjacency: &DMatrix<f64>) -> Self {
        let n = weights.nrows();
        let a = (0..n).map(|i| (0..n).map(|j| adjacency[(i, j)]).collect()).collect();
        let w = (0..n).map(|i| (0..n).map(|j| weights[(i, j)]).collect()).collect();
        Self { n, a, w }
    }

    fn k_in(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.a[j][i]).sum()
    }

    fn k_out(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.a[i][j]).sum()
    }

    fn k_tot(&self, i: usize) -> f64 {
        self.k_in(i) + self.k_out(i)
    }

    fn k_rec(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.a[i][j] * self.a[j][i]).sum()
    }

    fn s_in(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.w[j][i]).sum()
    }

    fn s_out(&self, i: usize) -> f64 {
        (0..self.n).map(|j| self.w[i][j]).sum()
    }

    fn s_tot(&self, i: usize) -> f64 {
        self.s_in(i) + self.s_out(i)
    }

    fn neighbour(&self, i: usize, v: NeighborVariant, strength: bool) -> Option<f64> {
        let n = self.n;
        let deg = |j: usize, d: Direction| -> f64 {
            match (d, strength) {
                (Direction::In, false) => self.k_in(j),
                (Direction::Out, false) => self.k_out(j),
                (Direction::Tot, false) => self.k_tot(j),
                (Direction::In, true) => self.s_in(j),
                (Direction::Out, true) => self.s_out(j),
                (Direction::Tot, true) => self.s_tot(j),
            }
        };
        let mut num = 0.0;
        for j in 0..n {
            num += match v {
                NeighborVariant::InIn => self.a[j][i] * deg(j, Direction::In),
                NeighborVariant::InOut => self.a[j][i] * deg(j, Direction::Out),
                NeighborVariant::OutIn => self.a[i][j] * deg(j, Direction::In),
                NeighborVariant::OutOut => self.a[i][j] * deg(j, Direction::Out),
                NeighborVariant::Tot => (self.a[i][j] + self.a[j][i]) * deg(j, Direction::Tot),
            };
        }
        let den = match v {
            NeighborVariant::InIn | NeighborVariant::InOut => self.k_in(i),
            NeighborVariant::OutIn | NeighborVariant::OutOut => self.k_out(i),
            NeighborVariant::Tot => self.k_tot(i),
        };
        ratio(num, den)
    }

    fn clustering(&self, i: usize, m: Motif, weighted: bool) -> Option<f64> {
        let n = self.n;
        let x = |p: usize, q: usize| if weighted { self.w[p][q].cbrt() } else { self.a[p][q] };
        let mut num = 0.0;
        for j in 0..n {
            for k in 0..n {
                num += match m {
                    Motif::Cyc => x(i, j) * x(j, k) * x(k, i),
                    Motif::Mid => x(i, k) * x(j, i) * x(j, k),
                    Motif::In => x(k, i) * x(j, i) * x(j, k),
                    Motif::Out => x(i, k) * x(j, k) * x(i, j),
                    Motif::Tot => (x(i, j) + x(j, i)) * (x(j, k) + x(k, j)) * (x(k, i) + x(i, k)),
                };
            }
        }
        let (kin, kout, ktot, krec) = (self.k_in(i), self.k_out(i), self.k_tot(i), self.k_rec(i));
        let den = match m {
            Motif::Cyc | Motif::Mid => kin * kout - krec,
            Motif::In => kin * (kin - 1.0),
            Motif::Out => kout * (kout - 1.0),
            Motif::Tot => 2.0 * (ktot * (ktot - 1.0) - 2.0 * krec),
        };
        ratio(num, den)
    }

    pub fn value(&self, kind: NodeStatKind, i: usize) -> Option<f64> {
        match kind {
            NodeStatKind::Nd(Direction::In) => Some(self.k_in(i)),
            NodeStatKind::Nd(Direction::Out) => Some(self.k_out(i)),
            NodeStatKind::Nd(Direction::Tot) => Some(self.k_tot(i)),
            NodeStatKind::Ns(Direction::In) => Some(self.s_in(i)),
            NodeStatKind::Ns(Direction::Out) => Some(self.s_out(i)),
            NodeStatKind::Ns(Direction::Tot) => Some(self.s_tot(i)),
            NodeStatKind::Annd(v) => self.neighbour(i, v, false),
            NodeStatKind::Anns(v) => self.neighbour(i, v, true),
            NodeStatKind::Bcc(m) => self.clustering(i, m, false),
            NodeStatKind::Wcc(m) => self.clustering(i, m, true),
        }
    }

    pub fn values(&self, kind: NodeStatKind) -> Vec<Option<f64>> {
        (0..self.n).map(|i| self.value(kind, i)).collect()
    }
}

/// Largest absolute difference between two statistic vectors, or `None`
/// when their defined entries differ.
pub fn max_abs_diff(a: &[Option<f64>], b: &[Option<f64>]) -> Option<f64> {
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        match (x, y) {
            (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
            (None, None) => {}
            _ => return None,
        }
    }
    Some(worst)
}
