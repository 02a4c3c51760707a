use nalgebra::{DMatrix, DVector};

use super::kinds::{Direction, Motif, NeighborVariant, NodeStatKind};
use super::{NodeStatVector, TradeNetwork};

/// Node statistics of one network, computed for a chosen set of kinds.
#[derive(Debug, Clone)]
pub struct NodeStats {
    slots: Vec<Option<NodeStatVector>>,
}

impl NodeStats {
    pub fn compute(net: &TradeNetwork) -> Self {
        Self::compute_kinds(net, &NodeStatKind::all())
    }

    /// Computes only `kinds`, sharing intermediate products between them.
    pub fn compute_kinds(net: &TradeNetwork, kinds: &[NodeStatKind]) -> Self {
        let mut ctx = Context::new(net);
        let mut slots = vec![None; NodeStatKind::COUNT];
        for &kind in kinds {
            if slots[kind.index()].is_none() {
                slots[kind.index()] = Some(NodeStatVector {
                    kind,
                    values: ctx.values(kind),
                });
            }
        }
        Self { slots }
    }

    pub fn get(&self, kind: NodeStatKind) -> Option<&NodeStatVector> {
        self.slots[kind.index()].as_ref()
    }

    pub fn into_vec(self) -> Vec<NodeStatVector> {
        self.slots.into_iter().flatten().collect()
    }
}

struct Context<'a> {
    net: &'a TradeNetwork,
    k_in: DVector<f64>,
    k_out: DVector<f64>,
    k_rec: DVector<f64>,
    s_in: DVector<f64>,
    s_out: DVector<f64>,
    binary: Option<Motifs>,
    weighted: Option<Motifs>,
}

/// Diagonals of the triangle-counting matrix products.
struct Motifs {
    cyc: Vec<f64>,
    mid: Vec<f64>,
    inn: Vec<f64>,
    out: Vec<f64>,
    tot: Vec<f64>,
}

impl Motifs {
    fn new(b: &DMatrix<f64>) -> Self {
        let bt = b.transpose();
        let b2 = b * b;
        let bbt = b * &bt;
        let s = b + &bt;
        let s2 = &s * &s;
        Self {
            cyc: diag_of_product(&b2, b),
            mid: diag_of_product(&bbt, b),
            inn: diag_of_product(&bt, &b2),
            out: diag_of_product(&b2, &bt),
            tot: diag_of_product(&s2, &s),
        }
    }

    fn get(&self, m: Motif) -> &[f64] {
        match m {
            Motif::Cyc => &self.cyc,
            Motif::Mid => &self.mid,
            Motif::In => &self.inn,
            Motif::Out => &self.out,
            Motif::Tot => &self.tot,
        }
    }
}

/// `diag(P·Q)_i = Σ_j P_ij Q_ji`.
fn diag_of_product(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    (0..n)
        .map(|i| (0..n).map(|j| p[(i, j)] * q[(j, i)]).sum())
        .collect()
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

impl<'a> Context<'a> {
    fn new(net: &'a TradeNetwork) -> Self {
        let a = &net.adjacency;
        let w = &net.weights;
        let n = net.n;
        let k_rec = DVector::from_fn(n, |i, _| (0..n).map(|j| a[(i, j)] * a[(j, i)]).sum());
        Self {
            net,
            k_in: row_vector_to_col(a.row_sum()),
            k_out: a.column_sum(),
            k_rec,
            s_in: row_vector_to_col(w.row_sum()),
            s_out: w.column_sum(),
            binary: None,
            weighted: None,
        }
    }

    fn degree(&self, d: Direction) -> DVector<f64> {
        match d {
            Direction::In => self.k_in.clone(),
            Direction::Out => self.k_out.clone(),
            Direction::Tot => &self.k_in + &self.k_out,
        }
    }

    fn strength(&self, d: Direction) -> DVector<f64> {
        match d {
            Direction::In => self.s_in.clone(),
            Direction::Out => self.s_out.clone(),
            Direction::Tot => &self.s_in + &self.s_out,
        }
    }

    /// Neighbour averages of `x_in`/`x_out` (degrees or strengths).
    fn neighbor_average(&self, v: NeighborVariant, x_in: &DVector<f64>, x_out: &DVector<f64>) -> Vec<Option<f64>> {
        let a = &self.net.adjacency;
        let (num, den) = match v {
            NeighborVariant::InIn => (a.tr_mul(x_in), self.k_in.clone()),
            NeighborVariant::InOut => (a.tr_mul(x_out), self.k_in.clone()),
            NeighborVariant::OutIn => (a * x_in, self.k_out.clone()),
            NeighborVariant::OutOut => (a * x_out, self.k_out.clone()),
            NeighborVariant::Tot => {
                let x_tot = x_in + x_out;
                (a * &x_tot + a.tr_mul(&x_tot), &self.k_in + &self.k_out)
            }
        };
        num.iter().zip(den.iter()).map(|(&n, &d)| ratio(n, d)).collect()
    }

    fn clustering(&mut self, m: Motif, weighted: bool) -> Vec<Option<f64>> {
        let net = self.net;
        let motifs = if weighted {
            self.weighted
                .get_or_insert_with(|| Motifs::new(&net.weights.map(f64::cbrt)))
        } else {
            self.binary.get_or_insert_with(|| Motifs::new(&net.adjacency))
        };
        let num = motifs.get(m).to_vec();
        (0..net.n)
            .map(|i| {
                let (kin, kout, krec) = (self.k_in[i], self.k_out[i], self.k_rec[i]);
                let ktot = kin + kout;
                let den = match m {
                    Motif::Cyc | Motif::Mid => kin * kout - krec,
                    Motif::In => kin * (kin - 1.0),
                    Motif::Out => kout * (kout - 1.0),
                    Motif::Tot => 2.0 * (ktot * (ktot - 1.0) - 2.0 * krec),
                };
                ratio(num[i], den)
            })
            .collect()
    }

    fn values(&mut self, kind: NodeStatKind) -> Vec<Option<f64>> {
        match kind {
            NodeStatKind::Nd(d) => self.degree(d).iter().map(|v| Some(*v)).collect(),
            NodeStatKind::Ns(d) => self.strength(d).iter().map(|v| Some(*v)).collect(),
            NodeStatKind::Annd(v) => {
                let (x_in, x_out) = (self.k_in.clone(), self.k_out.clone());
                self.neighbor_average(v, &x_in, &x_out)
            }
            NodeStatKind::Anns(v) => {
                let (x_in, x_out) = (self.s_in.clone(), self.s_out.clone());
                self.neighbor_average(v, &x_in, &x_out)
            }
            NodeStatKind::Bcc(m) => self.clustering(m, false),
            NodeStatKind::Wcc(m) => self.clustering(m, true),
        }
    }
}

fn row_vector_to_col(r: nalgebra::RowDVector<f64>) -> DVector<f64> {
    r.transpose()
}

pub fn node_stat(net: &TradeNetwork, kind: NodeStatKind) -> NodeStatVector {
    NodeStats::compute_kinds(net, &[kind])
        .into_vec()
        .pop()
        .expect("requested kind is computed")
}

/// `k_in = Σ_j a_ji`, `k_out = Σ_j a_ij`, `k_tot = k_in + k_out`.
pub fn degrees(net: &TradeNetwork, d: Direction) -> NodeStatVector {
    node_stat(net, NodeStatKind::Nd(d))
}

pub fn strengths(net: &TradeNetwork, d: Direction) -> NodeStatVector {
    node_stat(net, NodeStatKind::Ns(d))
}

/// Number of reciprocated partners, `Σ_j a_ij a_ji`.
pub fn reciprocal_degree(net: &TradeNetwork) -> Vec<f64> {
    Context::new(net).k_rec.iter().copied().collect()
}

pub fn annd(net: &TradeNetwork, v: NeighborVariant) -> NodeStatVector {
    node_stat(net, NodeStatKind::Annd(v))
}

pub fn anns(net: &TradeNetwork, v: NeighborVariant) -> NodeStatVector {
    node_stat(net, NodeStatKind::Anns(v))
}

pub fn clustering_binary(net: &TradeNetwork, m: Motif) -> NodeStatVector {
    node_stat(net, NodeStatKind::Bcc(m))
}

/// Clustering on cube-rooted weights, without rescaling them.
pub fn clustering_weighted(net: &TradeNetwork, m: Motif) -> NodeStatVector {
    node_stat(net, NodeStatKind::Wcc(m))
}
