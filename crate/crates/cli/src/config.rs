//! Experiment configuration and the shipped presets.

use std::path::{Path, PathBuf};

use gtv::datagen::{GroundTruth, LabelModelSpec, StationSpec, TopologySpec};
use gtv::io::parse_penalty;
use gtv::GtvPenalty;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const PRESETS: [&str; 5] = [
    "sbm-table1",
    "chain-noiseless",
    "chain-noisy",
    "star-consensus",
    "synthetic-fmi",
];

/// Where the local datasets come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Workload {
    /// Random topology with linear-model labels; scored against the ground
    /// truth.
    Recovery {
        topology: TopologySpec,
        labels: LabelModelSpec,
        /// Fraction of nodes whose datasets are accessible.
        #[serde(default = "one")]
        rho: f64,
    },
    /// Station datasets linked by a Wasserstein threshold graph; scored by
    /// validation error. Every seed is one random train/validation split of
    /// the same stations.
    Stations {
        stations: StationSpec,
        eta: f64,
        data_seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

/// Score recorded for each (point, seed) run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Mean squared parameter error against the ground truth.
    Mse,
    /// Largest distance between the parameters of two nodes.
    Spread,
    ValErr,
}

impl Metric {
    pub fn column(self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Spread => "spread",
            Metric::ValErr => "val_err",
        }
    }
}

/// Scalar settings that a sweep or a series may override.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    Lambda,
    Rho,
    Sigma,
    Epsilon,
    Eta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub knob: Knob,
    pub values: Vec<f64>,
}

/// One curve of the output: a named set of overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    #[serde(default)]
    pub set: Vec<(Knob, f64)>,
    #[serde(default)]
    pub penalty: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub workload: Workload,
    pub metric: Metric,
    pub penalty: String,
    pub lambda: f64,
    pub iters: usize,
    pub seeds: Vec<u64>,
    /// Without a sweep the single output row has `param = lambda`.
    #[serde(default)]
    pub sweep: Option<Sweep>,
    /// Empty means one unnamed series with columns `<metric>_mean,<metric>_std`;
    /// otherwise each series contributes `<name>_<metric>_mean,<name>_<metric>_std`.
    #[serde(default)]
    pub series: Vec<Series>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// A preset name, or else a path to a JSON config.
    pub fn resolve(name_or_path: &str) -> Result<Self, CliError> {
        match preset(name_or_path) {
            Some(cfg) => Ok(cfg),
            None => Self::load(Path::new(name_or_path)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.iters == 0 {
            return bad("iters must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        self.base_penalty()?;
        for s in &self.series {
            if let Some(token) = &s.penalty {
                parse_penalty(token).map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return bad("sweep has no values".into());
            }
        }
        let mut names: Vec<&str> = self.series.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("series names must be distinct".into());
        }
        let scored_by_truth = matches!(self.workload, Workload::Recovery { .. });
        if scored_by_truth == (self.metric == Metric::ValErr) {
            return bad(format!(
                "metric {} does not fit the {} workload",
                self.metric.column(),
                if scored_by_truth { "recovery" } else { "stations" }
            ));
        }
        // Every point must produce a valid workload.
        for point in crate::experiment::points(self)? {
            point.check()?;
        }
        Ok(())
    }

    pub(crate) fn base_penalty(&self) -> Result<GtvPenalty, CliError> {
        parse_penalty(&self.penalty).map_err(|e| CliError::Config(e.to_string()))
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let chain = |name: &str, series: Vec<Series>, sigma: f64| ExperimentConfig {
        name: name.into(),
        workload: Workload::Recovery {
            topology: TopologySpec::Chain {
                cluster_size: 50,
                epsilon: 0.0,
            },
            labels: LabelModelSpec {
                d: 2,
                sigma,
                samples_per_node: 5,
                truth: GroundTruth::Fixed {
                    vectors: vec![vec![2.0, 2.0], vec![-2.0, 2.0]],
                },
            },
            rho: 0.6,
        },
        metric: Metric::Mse,
        penalty: "norm2".into(),
        lambda: 0.1,
        iters: 2000,
        seeds: (0..5).collect(),
        sweep: Some(Sweep {
            knob: Knob::Epsilon,
            values: (0..=10).map(|k| k as f64 / 10.0).collect(),
        }),
        series,
        output: None,
    };
    let knob_series = |knob: Knob, prefix: &str, values: &[(f64, &str)]| -> Vec<Series> {
        values
            .iter()
            .map(|&(v, tag)| Series {
                name: format!("{prefix}{tag}"),
                set: vec![(knob, v)],
                penalty: None,
            })
            .collect()
    };
    let cfg = match name {
        "sbm-table1" => ExperimentConfig {
            name: name.into(),
            workload: Workload::Recovery {
                topology: TopologySpec::Sbm {
                    sizes: vec![100, 100],
                    p_in: 0.5,
                    p_out: 1e-2,
                },
                labels: LabelModelSpec {
                    d: 100,
                    sigma: 1e-3,
                    samples_per_node: 10,
                    truth: GroundTruth::Bernoulli { value: 0.5 },
                },
                rho: 1.0,
            },
            metric: Metric::Mse,
            penalty: "norm2".into(),
            lambda: 1e-2,
            iters: 1000,
            seeds: vec![0, 1, 2],
            sweep: None,
            series: Vec::new(),
            output: None,
        },
        "chain-noiseless" => chain(
            name,
            knob_series(Knob::Rho, "rho", &[(0.2, "02"), (0.4, "04"), (0.6, "06")]),
            0.0,
        ),
        "chain-noisy" => chain(
            name,
            knob_series(Knob::Sigma, "sigma", &[(0.01, "001"), (0.1, "01"), (1.0, "1")]),
            0.0,
        ),
        "star-consensus" => ExperimentConfig {
            name: name.into(),
            workload: Workload::Recovery {
                topology: TopologySpec::Star { leaves: 49 },
                labels: LabelModelSpec {
                    d: 2,
                    sigma: 0.0,
                    samples_per_node: 5,
                    truth: GroundTruth::Gaussian,
                },
                rho: 1.0,
            },
            metric: Metric::Spread,
            penalty: "norm2".into(),
            lambda: 0.0,
            iters: 1000,
            seeds: (0..5).collect(),
            sweep: Some(Sweep {
                knob: Knob::Lambda,
                values: vec![0.0, 0.4, 0.5, 5.0],
            }),
            series: Vec::new(),
            output: None,
        },
        "synthetic-fmi" => ExperimentConfig {
            name: name.into(),
            workload: Workload::Stations {
                stations: fmi_stations(),
                eta: 5.0,
                data_seed: 2024,
            },
            metric: Metric::ValErr,
            penalty: "norm2".into(),
            lambda: 0.0,
            iters: 1000,
            seeds: (0..5).collect(),
            sweep: Some(Sweep {
                knob: Knob::Lambda,
                values: vec![0.0, 0.5],
            }),
            series: Vec::new(),
            output: None,
        },
        _ => return None,
    };
    Some(cfg)
}

/// Three climate groups of temperature-like stations: features are the
/// day's minimum and the previous day's maximum, the label is the day's
/// maximum.
fn fmi_stations() -> StationSpec {
    StationSpec {
        stations_per_group: 20,
        samples_per_station: 28,
        feature_means: vec![vec![-12.0, -6.0], vec![0.0, 6.0], vec![10.0, 18.0]],
        feature_scales: vec![1.0, 1.0, 1.0],
        models: vec![vec![0.3, 0.6], vec![0.5, 0.5], vec![0.2, 0.9]],
        noise: 2.0,
    }
}
