use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::{LinkProbabilityMatrix, PredictedWeights};
use crate::error::{Error, Result};
use crate::glm::ModelTag;
use crate::netstats::{TradeNetwork, WeightTransform};

/// Per-dyad Poisson laws, `None` where the mean is zero.
#[derive(Debug, Clone)]
pub struct PoissonGrid {
    n: usize,
    laws: Vec<Option<Poisson<f64>>>,
}

impl PoissonGrid {
    fn new(mu: &DMatrix<f64>) -> Result<Self> {
        let n = mu.nrows();
        let mut laws = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let m = mu[(i, j)];
                laws.push(if i == j || m == 0.0 {
                    None
                } else {
                    Some(Poisson::new(m).map_err(|e| {
                        Error::validation(None, format!("Poisson mean {m} at ({i}, {j}): {e}"))
                    })?)
                });
            }
        }
        Ok(Self { n, laws })
    }

    fn draw<R: Rng>(&self, i: usize, j: usize, rng: &mut R) -> f64 {
        self.laws[i * self.n + j].as_ref().map_or(0.0, |p| p.sample(rng))
    }
}

/// Distribution of one replication.
#[derive(Debug, Clone)]
pub enum Sampler {
    /// Independent links with probability `ξ_ij`.
    Bernoulli { xi: DMatrix<f64> },
    /// Log weights `Normal(ω̂_ij, σ)` on the mask.
    Normal {
        mean: DMatrix<f64>,
        sd: f64,
        mask: DMatrix<f64>,
    },
    /// Counts `Poisson(μ_ij)`.
    Poisson(PoissonGrid),
    /// A Bernoulli(`ξ_ij`) link times a Poisson(`μ_ij`) count.
    Zip { xi: DMatrix<f64>, mu: PoissonGrid },
}

/// A lazily generated Monte-Carlo ensemble. Replication `r` depends only on
/// `(seed, r)`, so replications can be produced in any order or in parallel.
#[derive(Debug, Clone)]
pub struct NetworkEnsemble {
    pub model: ModelTag,
    pub seed: u64,
    pub replications: usize,
    n: usize,
    sampler: Sampler,
}

impl NetworkEnsemble {
    pub fn new(model: ModelTag, sampler: Sampler, replications: usize, seed: u64) -> Result<Self> {
        if replications == 0 {
            return Err(Error::Precondition("an ensemble needs at least one replication".into()));
        }
        let n = match &sampler {
            Sampler::Bernoulli { xi } => xi.nrows(),
            Sampler::Normal { mean, .. } => mean.nrows(),
            Sampler::Poisson(g) => g.n,
            Sampler::Zip { mu, .. } => mu.n,
        };
        Ok(Self {
            model,
            seed,
            replications,
            n,
            sampler,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_binary(&self) -> bool {
        matches!(self.sampler, Sampler::Bernoulli { .. })
    }

    fn rng(&self, r: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(r as u64);
        rng
    }

    /// Raw draws of replication `r`: 0/1 links, log weights (OLS) or counts.
    /// Dyads are visited row-major, skipping the diagonal.
    pub fn draw(&self, r: usize) -> DMatrix<f64> {
        assert!(r < self.replications, "replication {r} out of range");
        let mut rng = self.rng(r);
        let n = self.n;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                out[(i, j)] = match &self.sampler {
                    Sampler::Bernoulli { xi } => bernoulli(&mut rng, xi[(i, j)]),
                    Sampler::Normal { mean, sd, mask } => {
                        if mask[(i, j)] > 0.0 {
                            mean[(i, j)] + sd * rng.sample::<f64, _>(StandardNormal)
                        } else {
                            0.0
                        }
                    }
                    Sampler::Poisson(g) => g.draw(i, j, &mut rng),
                    Sampler::Zip { xi, mu } => {
                        if bernoulli(&mut rng, xi[(i, j)]) > 0.0 {
                            mu.draw(i, j, &mut rng)
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
        out
    }

    /// Replication `r` as a network. OLS draws are log weights on the mask:
    /// `LogPositive` keeps them, `Identity` exponentiates them.
    pub fn network(&self, r: usize, transform: WeightTransform) -> Result<TradeNetwork> {
        let w = self.draw(r);
        match &self.sampler {
            Sampler::Bernoulli { .. } => TradeNetwork::binary(w),
            Sampler::Normal { mask, .. } => {
                let w = match transform {
                    WeightTransform::LogPositive => w,
                    WeightTransform::Identity => {
                        w.zip_map(mask, |v, m| if m > 0.0 { v.exp() } else { 0.0 })
                    }
                };
                TradeNetwork::with_adjacency(w, mask.clone())
            }
            Sampler::Poisson(_) | Sampler::Zip { .. } => TradeNetwork::transformed(w, transform),
        }
    }
}

fn bernoulli<R: Rng>(rng: &mut R, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Ensemble of binary networks with independent links `Bernoulli(ξ_ij)`.
pub fn sample_bernoulli_ensemble(
    xi: &LinkProbabilityMatrix,
    model: ModelTag,
    replications: usize,
    seed: u64,
) -> Result<NetworkEnsemble> {
    NetworkEnsemble::new(model, Sampler::Bernoulli { xi: xi.xi.clone() }, replications, seed)
}

/// Weighted ensemble matching the prediction's model: Normal log weights on
/// the OLS mask, Poisson counts for PPML, Bernoulli-times-Poisson for ZIP.
pub fn sample_weighted_ensemble(pred: &PredictedWeights, replications: usize, seed: u64) -> Result<NetworkEnsemble> {
    let sampler = match pred.model {
        ModelTag::Ols => {
            let sigma2 = pred
                .sigma2
                .ok_or_else(|| Error::Schema("OLS prediction without sigma2".into()))?;
            Sampler::Normal {
                mean: pred.value.clone(),
                sd: sigma2.sqrt(),
                mask: pred.mask.clone(),
            }
        }
        ModelTag::Ppml => Sampler::Poisson(PoissonGrid::new(&pred.value)?),
        ModelTag::Zip => {
            let parts = pred
                .zip_parts
                .as_ref()
                .ok_or_else(|| Error::Schema("ZIP prediction without psi/mu".into()))?;
            let xi = parts.psi.zip_map(&pred.mask, |p, m| if m > 0.0 { 1.0 - p } else { 0.0 });
            Sampler::Zip {
                xi,
                mu: PoissonGrid::new(&parts.mu)?,
            }
        }
        ModelTag::Logit => {
            return Err(Error::Unsupported(
                "LOGIT has no weighted ensemble; use a Bernoulli ensemble".into(),
            ))
        }
    };
    if let Sampler::Normal { sd, .. } = &sampler {
        if !sd.is_finite() {
            return Err(Error::validation(None, format!("OLS residual sd is {sd}")));
        }
    }
    NetworkEnsemble::new(pred.model, sampler, replications, seed)
}
