//! Synthetic experiment data: graph topologies, noisy linear-model datasets,
//! sampling masks, the Gaussian Wasserstein similarity graph and error
//! metrics.
//!
//! All randomness flows through [`ExperimentRng`] (ChaCha8 seeded with a
//! `u64`), so a spec and seed pin every generated artifact.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::Partition;
use crate::error::{GtvError, Result};
use crate::graph::{EmpiricalGraph, NodeField};
use crate::linalg;
use crate::losses::{LocalDataset, LocalLoss};

pub type ExperimentRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> ExperimentRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weight given to pairs at Wasserstein distance zero (and the cap for
/// near-zero distances) in [`build_threshold_graph`].
pub const MAX_THRESHOLD_WEIGHT: f64 = 1e9;
/// Fraction of each local dataset held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.3;
/// Covariance eigenvalues below this are treated as zero.
const PSD_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    /// Stochastic block model with unit edge weights.
    Sbm { sizes: Vec<usize>, p_in: f64, p_out: f64 },
    /// Path over two clusters of `cluster_size` nodes; the bridging edge has
    /// weight `epsilon` and is left out when `epsilon = 0`.
    Chain { cluster_size: usize, epsilon: f64 },
    /// Node 0 joined to `leaves` peripheral nodes.
    Star { leaves: usize },
}

impl TopologySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GtvError::InvalidArgument(msg));
        match self {
            TopologySpec::Sbm { sizes, p_in, p_out } => {
                if sizes.is_empty() || sizes.contains(&0) {
                    return bad(format!("SBM cluster sizes must be positive, got {sizes:?}"));
                }
                for p in [p_in, p_out] {
                    if !(0.0..=1.0).contains(p) {
                        return bad(format!("edge probability {p} outside [0, 1]"));
                    }
                }
            }
            TopologySpec::Chain { cluster_size, epsilon } => {
                if *cluster_size == 0 {
                    return bad("chain cluster size must be positive".into());
                }
                if !(*epsilon >= 0.0 && epsilon.is_finite()) {
                    return bad(format!("bridge weight must be finite and nonnegative, got {epsilon}"));
                }
            }
            TopologySpec::Star { leaves } => {
                if *leaves == 0 {
                    return bad("star needs at least one leaf".into());
                }
            }
        }
        Ok(())
    }
}

/// Graph and its planted partition. Star graphs form a single cluster.
pub fn gen_graph(spec: &TopologySpec, seed: u64) -> Result<(EmpiricalGraph, Partition)> {
    spec.validate()?;
    match spec {
        TopologySpec::Sbm { sizes, p_in, p_out } => {
            let mut rng = seeded_rng(seed);
            let assignment: Vec<usize> = sizes
                .iter()
                .enumerate()
                .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
                .collect();
            let n = assignment.len();
            let mut records = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let p = if assignment[i] == assignment[j] { *p_in } else { *p_out };
                    if rng.random::<f64>() < p {
                        records.push((i, j, 1.0));
                    }
                }
            }
            Ok((
                EmpiricalGraph::new(n, &records)?,
                Partition::from_assignment(&assignment)?,
            ))
        }
        TopologySpec::Chain { cluster_size, epsilon } => {
            let n = 2 * cluster_size;
            let records: Vec<_> = (0..n - 1)
                .filter_map(|i| match i + 1 == *cluster_size {
                    true if *epsilon == 0.0 => None,
                    true => Some((i, i + 1, *epsilon)),
                    false => Some((i, i + 1, 1.0)),
                })
                .collect();
            let clusters = vec![(0..*cluster_size).collect(), (*cluster_size..n).collect()];
            Ok((EmpiricalGraph::new(n, &records)?, Partition::new(n, clusters)?))
        }
        TopologySpec::Star { leaves } => {
            let records: Vec<_> = (1..=*leaves).map(|j| (0, j, 1.0)).collect();
            let n = leaves + 1;
            Ok((
                EmpiricalGraph::new(n, &records)?,
                Partition::new(n, vec![(0..n).collect()])?,
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum GroundTruth {
    /// One vector per cluster with iid entries in `{0, value}`, each with
    /// probability one half.
    Bernoulli { value: f64 },
    /// Given per-cluster vectors.
    Fixed { vectors: Vec<Vec<f64>> },
    /// An iid standard normal vector per node.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModelSpec {
    pub d: usize,
    /// Label noise standard deviation.
    pub sigma: f64,
    pub samples_per_node: usize,
    pub truth: GroundTruth,
}

impl LabelModelSpec {
    pub fn validate(&self, clusters: usize) -> Result<()> {
        let bad = |msg: String| Err(GtvError::InvalidArgument(msg));
        if self.d == 0 || self.samples_per_node == 0 {
            return bad("feature dimension and sample count must be positive".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!(
                "noise level must be finite and nonnegative, got {}",
                self.sigma
            ));
        }
        if let GroundTruth::Fixed { vectors } = &self.truth {
            if vectors.len() != clusters {
                return bad(format!(
                    "{} ground-truth vectors for {clusters} clusters",
                    vectors.len()
                ));
            }
            if let Some(v) = vectors.iter().find(|v| v.len() != self.d) {
                return Err(GtvError::DimensionMismatch {
                    expected: self.d,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

fn normal_vec(rng: &mut ExperimentRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Local datasets `y = w̄ᵢᵀx + σ·noise` with standard normal features, and
/// the ground truth `w̄`.
pub fn gen_labels(p: &Partition, spec: &LabelModelSpec, seed: u64) -> Result<(Vec<LocalDataset>, NodeField)> {
    spec.validate(p.cluster_count())?;
    let mut rng = seeded_rng(seed);
    let n = p.node_count();
    let d = spec.d;
    let truth = match &spec.truth {
        GroundTruth::Bernoulli { value } => {
            let per_cluster: Vec<Vec<f64>> = (0..p.cluster_count())
                .map(|_| {
                    (0..d)
                        .map(|_| if rng.random_bool(0.5) { *value } else { 0.0 })
                        .collect()
                })
                .collect();
            (0..n).flat_map(|i| per_cluster[p.cluster_of(i)].clone()).collect()
        }
        GroundTruth::Fixed { vectors } => (0..n).flat_map(|i| vectors[p.cluster_of(i)].clone()).collect(),
        GroundTruth::Gaussian => normal_vec(&mut rng, n * d),
    };
    let truth = NodeField::from_flat(d, truth)?;

    let m = spec.samples_per_node;
    let datasets = (0..n)
        .map(|i| {
            let x = DMatrix::from_row_slice(m, d, &normal_vec(&mut rng, m * d));
            let w = DVector::from_column_slice(truth.row(i));
            let noise = DVector::from_vec(normal_vec(&mut rng, m));
            let y = &x * w + noise * spec.sigma;
            LocalDataset::new(x, y.as_slice().to_vec())
        })
        .collect::<Result<_>>()?;
    Ok((datasets, truth))
}

/// `⌈ρn⌉` nodes drawn uniformly without replacement, sorted.
pub fn sample_nodes(n: usize, rho: f64, rng: &mut ExperimentRng) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(GtvError::InvalidArgument(format!(
            "sampling ratio {rho} outside [0, 1]"
        )));
    }
    let count = ((rho * n as f64).ceil() as usize).min(n);
    let mut picked = index::sample(rng, n, count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Replaces the losses of nodes outside `sampled` by the trivial loss.
/// Returns the masked losses and the sampling ratio `|sampled|/n`.
pub fn apply_sampling_mask(losses: &[LocalLoss], sampled: &[usize]) -> Result<(Vec<LocalLoss>, f64)> {
    let n = losses.len();
    let mut keep = vec![false; n];
    for &i in sampled {
        if i >= n {
            return Err(GtvError::NodeOutOfRange { index: 0, node: i, n });
        }
        keep[i] = true;
    }
    let masked = losses
        .iter()
        .zip(&keep)
        .map(|(l, &k)| if k { l.clone() } else { LocalLoss::trivial(l.dim()) })
        .collect();
    let kept = keep.iter().filter(|&&k| k).count();
    Ok((masked, if n == 0 { 0.0 } else { kept as f64 / n as f64 }))
}

/// Squared 2-Wasserstein distance between two Gaussians,
/// `‖μ₁ − μ₂‖² + tr(Σ₁ + Σ₂ − 2(Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2})`.
pub fn gaussian_wasserstein(mu1: &[f64], sigma1: &DMatrix<f64>, mu2: &[f64], sigma2: &DMatrix<f64>) -> Result<f64> {
    let d = mu1.len();
    for (what, m) in [("first covariance", sigma1), ("second covariance", sigma2)] {
        linalg::check_symmetric(m, what)?;
        if m.nrows() != d {
            return Err(GtvError::DimensionMismatch {
                expected: d,
                got: m.nrows(),
            });
        }
    }
    if mu2.len() != d {
        return Err(GtvError::DimensionMismatch {
            expected: d,
            got: mu2.len(),
        });
    }
    let root1 = linalg::psd_sqrt(sigma1, PSD_CLAMP);
    let cross = linalg::psd_sqrt(&(&root1 * sigma2 * &root1), PSD_CLAMP);
    let mean_term: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(mean_term + (sigma1 + sigma2 - cross * 2.0).trace())
}

/// Mean and (biased, `1/m`) covariance of the rows of `points`.
pub fn gaussian_stats(points: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let m = points.nrows();
    if m == 0 {
        return Err(GtvError::InvalidArgument("statistics of an empty sample".into()));
    }
    let mean = points.row_mean();
    let centered = DMatrix::from_fn(m, points.ncols(), |r, c| points[(r, c)] - mean[c]);
    let cov = centered.tr_mul(&centered) / m as f64;
    Ok((mean.iter().copied().collect(), cov))
}

/// Similarity graph over Gaussian summaries: nodes `i, j` are joined with
/// weight `1/W_ij` when `W_ij ≤ eta`, weights capped at
/// [`MAX_THRESHOLD_WEIGHT`].
pub fn build_threshold_graph(stats: &[(Vec<f64>, DMatrix<f64>)], eta: f64) -> Result<EmpiricalGraph> {
    if !(eta > 0.0) {
        return Err(GtvError::InvalidArgument(format!(
            "threshold must be positive, got {eta}"
        )));
    }
    let n = stats.len();
    let mut records = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let dist = gaussian_wasserstein(&stats[i].0, &stats[i].1, &stats[j].0, &stats[j].1)?.max(0.0);
            if dist <= eta {
                let weight = if dist > 0.0 {
                    (1.0 / dist).min(MAX_THRESHOLD_WEIGHT)
                } else {
                    MAX_THRESHOLD_WEIGHT
                };
                records.push((i, j, weight));
            }
        }
    }
    EmpiricalGraph::new(n, &records)
}

/// `(1/n) Σᵢ ‖ŵᵢ − w̄ᵢ‖²`
pub fn mse(w_hat: &NodeField, w_true: &NodeField) -> Result<f64> {
    if w_hat.len() != w_true.len() || w_hat.dim() != w_true.dim() {
        return Err(GtvError::DimensionMismatch {
            expected: w_true.as_slice().len(),
            got: w_hat.as_slice().len(),
        });
    }
    if w_hat.is_empty() {
        return Err(GtvError::InvalidArgument("mean squared error over zero nodes".into()));
    }
    let total: f64 = w_hat
        .rows()
        .zip(w_true.rows())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .sum();
    Ok(total / w_hat.len() as f64)
}

/// Node average of the mean squared prediction error on held-out data.
pub fn validation_error(w_hat: &NodeField, validation: &[LocalDataset]) -> Result<f64> {
    if validation.len() != w_hat.len() {
        return Err(GtvError::DimensionMismatch {
            expected: w_hat.len(),
            got: validation.len(),
        });
    }
    if let Some(i) = validation.iter().position(LocalDataset::is_empty) {
        return Err(GtvError::InvalidArgument(format!(
            "node {i} has an empty validation set"
        )));
    }
    if validation.is_empty() {
        return Err(GtvError::InvalidArgument("validation error over zero nodes".into()));
    }
    let total: f64 = validation
        .iter()
        .enumerate()
        .map(|(i, ds)| ds.mean_squared_error(w_hat.row(i)))
        .sum();
    Ok(total / validation.len() as f64)
}

/// Shuffled split holding out `round(0.3 m)` samples (at least one, and at
/// least one left for training).
pub fn train_validation_split(ds: &LocalDataset, rng: &mut ExperimentRng) -> Result<(LocalDataset, LocalDataset)> {
    let m = ds.len();
    if m < 2 {
        return Err(GtvError::InvalidArgument(format!(
            "splitting needs at least two samples, got {m}"
        )));
    }
    let held = ((VALIDATION_FRACTION * m as f64).round() as usize).clamp(1, m - 1);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut holdout = order[..held].to_vec();
    holdout.sort_unstable();
    Ok(ds.split(&holdout))
}

/// Weather-station stand-in: stations in a few climate groups. Each group
/// has its own feature mean and spread and its own linear model relating
/// features to the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationSpec {
    pub stations_per_group: usize,
    pub samples_per_station: usize,
    /// Per-group feature mean.
    pub feature_means: Vec<Vec<f64>>,
    /// Per-group standard deviation of every feature.
    pub feature_scales: Vec<f64>,
    /// Per-group regression vector.
    pub models: Vec<Vec<f64>>,
    pub noise: f64,
}

impl StationSpec {
    fn validate(&self) -> Result<()> {
        let groups = self.feature_means.len();
        if groups == 0 || self.feature_scales.len() != groups || self.models.len() != groups {
            return Err(GtvError::InvalidArgument(
                "station groups need matching means, scales and models".into(),
            ));
        }
        let d = self.feature_means[0].len();
        if d == 0 || self.feature_means.iter().chain(&self.models).any(|v| v.len() != d) {
            return Err(GtvError::InvalidArgument(
                "inconsistent station feature dimension".into(),
            ));
        }
        if self.stations_per_group == 0 || self.samples_per_station < 2 {
            return Err(GtvError::InvalidArgument(
                "need at least one station per group and two samples per station".into(),
            ));
        }
        Ok(())
    }
}

/// Station datasets and the group partition.
pub fn gen_stations(spec: &StationSpec, seed: u64) -> Result<(Vec<LocalDataset>, Partition)> {
    spec.validate()?;
    let mut rng = seeded_rng(seed);
    let d = spec.models[0].len();
    let m = spec.samples_per_station;
    let mut datasets = Vec::new();
    let mut assignment = Vec::new();
    for (g, model) in spec.models.iter().enumerate() {
        let w = DVector::from_column_slice(model);
        for _ in 0..spec.stations_per_group {
            let x = DMatrix::from_fn(m, d, |_, c| {
                spec.feature_means[g][c] + spec.feature_scales[g] * rng.sample::<f64, _>(StandardNormal)
            });
            let noise = DVector::from_vec(normal_vec(&mut rng, m));
            let y = &x * &w + noise * spec.noise;
            datasets.push(LocalDataset::new(x, y.as_slice().to_vec())?);
            assignment.push(g);
        }
    }
    Ok((datasets, Partition::from_assignment(&assignment)?))
}

/// Gaussian summary of a dataset's points `(x, y)`.
pub fn dataset_stats(ds: &LocalDataset) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let points = DMatrix::from_fn(ds.len(), ds.dim() + 1, |r, c| {
        if c < ds.dim() {
            ds.features()[(r, c)]
        } else {
            ds.labels()[r]
        }
    });
    gaussian_stats(&points)
}
