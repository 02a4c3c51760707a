use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    In,
    Out,
    Tot,
}

/// Which link of node `i` to follow and which degree (strength) of the
/// neighbour to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NeighborVariant {
    InIn,
    InOut,
    OutIn,
    OutOut,
    Tot,
}

/// Directed triangle shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Motif {
    Cyc,
    Mid,
    In,
    Out,
    Tot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum NodeStatKind {
    Nd(Direction),
    Ns(Direction),
    Annd(NeighborVariant),
    Anns(NeighborVariant),
    Bcc(Motif),
    Wcc(Motif),
}

const DIRECTIONS: [Direction; 3] = [Direction::In, Direction::Out, Direction::Tot];
const VARIANTS: [NeighborVariant; 5] = [
    NeighborVariant::InIn,
    NeighborVariant::InOut,
    NeighborVariant::OutIn,
    NeighborVariant::OutOut,
    NeighborVariant::Tot,
];
const MOTIFS: [Motif; 5] = [Motif::Cyc, Motif::Mid, Motif::In, Motif::Out, Motif::Tot];

impl NodeStatKind {
    pub const COUNT: usize = 26;

    /// Every kind, in table order.
    pub fn all() -> Vec<NodeStatKind> {
        let mut v = Vec::with_capacity(Self::COUNT);
        v.extend(DIRECTIONS.map(NodeStatKind::Nd));
        v.extend(DIRECTIONS.map(NodeStatKind::Ns));
        v.extend(VARIANTS.map(NodeStatKind::Annd));
        v.extend(VARIANTS.map(NodeStatKind::Anns));
        v.extend(MOTIFS.map(NodeStatKind::Bcc));
        v.extend(MOTIFS.map(NodeStatKind::Wcc));
        v
    }

    /// Kinds that depend on the adjacency only.
    pub fn binary() -> Vec<NodeStatKind> {
        Self::all().into_iter().filter(|k| !k.is_weighted()).collect()
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, NodeStatKind::Ns(_) | NodeStatKind::Anns(_) | NodeStatKind::Wcc(_))
    }

    /// Position in [`NodeStatKind::all`].
    pub fn index(self) -> usize {
        let d = |d: Direction| DIRECTIONS.iter().position(|x| *x == d).unwrap();
        let v = |v: NeighborVariant| VARIANTS.iter().position(|x| *x == v).unwrap();
        let m = |m: Motif| MOTIFS.iter().position(|x| *x == m).unwrap();
        match self {
            NodeStatKind::Nd(x) => d(x),
            NodeStatKind::Ns(x) => 3 + d(x),
            NodeStatKind::Annd(x) => 6 + v(x),
            NodeStatKind::Anns(x) => 11 + v(x),
            NodeStatKind::Bcc(x) => 16 + m(x),
            NodeStatKind::Wcc(x) => 21 + m(x),
        }
    }

    pub fn name(self) -> &'static str {
        const NAMES: [&str; NodeStatKind::COUNT] = [
            "ND_in", "ND_out", "ND_tot", "NS_in", "NS_out", "NS_tot", "ANND_in_in", "ANND_in_out",
            "ANND_out_in", "ANND_out_out", "ANND_tot", "ANNS_in_in", "ANNS_in_out", "ANNS_out_in",
            "ANNS_out_out", "ANNS_tot", "BCC_cyc", "BCC_mid", "BCC_in", "BCC_out", "BCC_tot",
            "WCC_cyc", "WCC_mid", "WCC_in", "WCC_out", "WCC_tot",
        ];
        NAMES[self.index()]
    }
}

impl fmt::Display for NodeStatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NodeStatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Schema(format!("unknown node statistic `{s}`")))
    }
}

impl From<NodeStatKind> for String {
    fn from(k: NodeStatKind) -> Self {
        k.name().to_string()
    }
}

impl TryFrom<String> for NodeStatKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip_and_index_matches_order() {
        let all = NodeStatKind::all();
        assert_eq!(all.len(), NodeStatKind::COUNT);
        for (k, kind) in all.iter().enumerate() {
            assert_eq!(kind.index(), k);
            assert_eq!(kind.name().parse::<NodeStatKind>().unwrap(), *kind);
        }
        assert_eq!(NodeStatKind::binary().len(), 13);
        let json = serde_json::to_string(&NodeStatKind::Anns(NeighborVariant::OutIn)).unwrap();
        assert_eq!(json, "\"ANNS_out_in\"");
    }
}
