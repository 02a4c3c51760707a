use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netstats::{population_average, stat_correlation, NodeStatKind, NodeStats, TradeNetwork, WeightTransform};
use crate::prediction::NetworkEnsemble;

/// Network-level quantity tracked across ensemble replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EnsembleStatistic {
    Density,
    /// Population average over the nodes where the statistic is defined.
    Average(NodeStatKind),
    /// Pearson correlation across nodes.
    Correlation(NodeStatKind, NodeStatKind),
}

impl EnsembleStatistic {
    fn kinds(&self) -> Vec<NodeStatKind> {
        match *self {
            Self::Density => vec![],
            Self::Average(k) => vec![k],
            Self::Correlation(a, b) => vec![a, b],
        }
    }

    /// Value on a single network; `None` when undefined there.
    pub fn evaluate(&self, net: &TradeNetwork, stats: &NodeStats) -> Option<f64> {
        match *self {
            Self::Density => Some(net.density()),
            Self::Average(k) => population_average(stats.get(k)?).ok().map(|a| a.mean),
            Self::Correlation(a, b) => stat_correlation(stats.get(a)?, stats.get(b)?).ok(),
        }
    }
}

impl fmt::Display for EnsembleStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Density => f.write_str("density"),
            Self::Average(k) => write!(f, "avg:{k}"),
            Self::Correlation(a, b) => write!(f, "corr:{a}:{b}"),
        }
    }
}

impl FromStr for EnsembleStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["density"] => Ok(Self::Density),
            ["avg", k] => Ok(Self::Average(k.parse()?)),
            ["corr", a, b] => Ok(Self::Correlation(a.parse()?, b.parse()?)),
            _ => Err(Error::Schema(format!("unknown ensemble statistic {s:?}"))),
        }
    }
}

impl From<EnsembleStatistic> for String {
    fn from(s: EnsembleStatistic) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for EnsembleStatistic {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub statistic: EnsembleStatistic,
    pub mean: f64,
    pub sd: f64,
    /// 2.5th and 97.5th empirical percentiles.
    pub ci_low: f64,
    pub ci_high: f64,
    /// `mean ± 1.96·sd`.
    pub ci_normal_low: f64,
    pub ci_normal_high: f64,
    pub m: usize,
    /// Replications where the statistic was undefined.
    pub n_undefined: usize,
}

/// Neumaier-compensated sum; order-dependent only through the input order.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Percentile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of one statistic from its per-replication values.
pub fn summarize(statistic: EnsembleStatistic, values: &[Option<f64>]) -> Result<EnsembleSummary> {
    let m = values.len();
    if m < 2 {
        return Err(Error::Precondition(format!("ensemble summary needs at least 2 replications, got {m}")));
    }
    let mut defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::Undefined(format!("{statistic} is undefined in every replication")));
    }
    defined.sort_by(f64::total_cmp);
    let k = defined.len() as f64;
    let (min, max) = (defined[0], defined[defined.len() - 1]);
    let mean = (compensated_sum(values.iter().flatten().copied()) / k).clamp(min, max);
    let sd = if defined.len() < 2 {
        0.0
    } else {
        (compensated_sum(values.iter().flatten().map(|v| (v - mean).powi(2))) / (k - 1.0)).sqrt()
    };
    Ok(EnsembleSummary {
        statistic,
        mean,
        sd,
        ci_low: percentile(&defined, 0.025),
        ci_high: percentile(&defined, 0.975),
        ci_normal_low: mean - 1.96 * sd,
        ci_normal_high: mean + 1.96 * sd,
        m,
        n_undefined: m - defined.len(),
    })
}

/// Per-replication values of every statistic, indexed `[statistic][r]`.
/// Replications are evaluated in parallel; the output order is fixed.
pub fn replicate_values(
    ens: &NetworkEnsemble,
    statistics: &[EnsembleStatistic],
    transform: WeightTransform,
) -> Result<Vec<Vec<Option<f64>>>> {
    let mut kinds: Vec<NodeStatKind> = statistics.iter().flat_map(|s| s.kinds()).collect();
    kinds.sort();
    kinds.dedup();
    let rows: Vec<Vec<Option<f64>>> = (0..ens.replications)
        .into_par_iter()
        .map(|r| {
            let net = ens.network(r, transform)?;
            let stats = NodeStats::compute_kinds(&net, &kinds);
            Ok(statistics.iter().map(|s| s.evaluate(&net, &stats)).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..statistics.len())
        .map(|s| rows.iter().map(|row| row[s]).collect())
        .collect())
}

pub fn ensemble_summaries(
    ens: &NetworkEnsemble,
    statistics: &[EnsembleStatistic],
    transform: WeightTransform,
) -> Result<Vec<EnsembleSummary>> {
    if ens.replications < 2 {
        return Err(Error::Precondition(format!(
            "ensemble summary needs at least 2 replications, got {}",
            ens.replications
        )));
    }
    let values = replicate_values(ens, statistics, transform)?;
    statistics.iter().zip(&values).map(|(s, v)| summarize(*s, v)).collect()
}

pub fn ensemble_summary(
    ens: &NetworkEnsemble,
    statistic: EnsembleStatistic,
    transform: WeightTransform,
) -> Result<EnsembleSummary> {
    Ok(ensemble_summaries(ens, &[statistic], transform)?.remove(0))
}
