//! Experiment runner: generate, mask, solve and score every (point, seed)
//! pair, then aggregate per point.

use std::io::Write;

use gtv::datagen::{
    apply_sampling_mask, build_threshold_graph, dataset_stats, gen_graph, gen_labels, gen_stations, mse, sample_nodes,
    seeded_rng, train_validation_split, validation_error, LabelModelSpec, StationSpec, TopologySpec,
};
use gtv::io::parse_penalty;
use gtv::{solve, LocalLoss, NodeField, SolverConfig, StopReason};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Knob, Metric, Workload};
use crate::plots::format_number;
use crate::CliError;

/// Offsets separating the random streams derived from one seed.
pub const LABEL_STREAM: u64 = 1000;
pub const MASK_STREAM: u64 = 2000;

/// A fully resolved parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub param: f64,
    pub series: Option<usize>,
    pub workload: Workload,
    pub lambda: f64,
    pub penalty: String,
}

impl Point {
    pub fn check(&self) -> Result<(), CliError> {
        let cfg = |e: gtv::GtvError| CliError::Config(e.to_string());
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CliError::Config(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        parse_penalty(&self.penalty).map_err(cfg)?;
        match &self.workload {
            Workload::Recovery { topology, labels, rho } => {
                topology.validate().map_err(cfg)?;
                if !(0.0..=1.0).contains(rho) {
                    return Err(CliError::Config(format!("rho must lie in [0, 1], got {rho}")));
                }
                if !(labels.sigma >= 0.0 && labels.sigma.is_finite()) {
                    return Err(CliError::Config(format!(
                        "sigma must be nonnegative, got {}",
                        labels.sigma
                    )));
                }
            }
            Workload::Stations { eta, .. } => {
                if !(*eta > 0.0 && eta.is_finite()) {
                    return Err(CliError::Config(format!("eta must be positive, got {eta}")));
                }
            }
        }
        Ok(())
    }

    fn set(&mut self, knob: Knob, value: f64) -> Result<(), CliError> {
        let unsupported = || CliError::Config(format!("{knob:?} does not apply to this workload").to_lowercase());
        match (knob, &mut self.workload) {
            (Knob::Lambda, _) => self.lambda = value,
            (Knob::Rho, Workload::Recovery { rho, .. }) => *rho = value,
            (Knob::Sigma, Workload::Recovery { labels, .. }) => labels.sigma = value,
            (Knob::Sigma, Workload::Stations { stations, .. }) => stations.noise = value,
            (
                Knob::Epsilon,
                Workload::Recovery {
                    topology: TopologySpec::Chain { epsilon, .. },
                    ..
                },
            ) => *epsilon = value,
            (Knob::Eta, Workload::Stations { eta, .. }) => *eta = value,
            _ => return Err(unsupported()),
        }
        Ok(())
    }
}

/// Every (sweep value, series) point of a config, sweep-major.
pub fn points(cfg: &ExperimentConfig) -> Result<Vec<Point>, CliError> {
    let base = Point {
        param: cfg.lambda,
        series: None,
        workload: cfg.workload.clone(),
        lambda: cfg.lambda,
        penalty: cfg.penalty.clone(),
    };
    let params: Vec<Option<f64>> = match &cfg.sweep {
        Some(s) => s.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut out = Vec::new();
    for value in params {
        let series: Vec<Option<usize>> = if cfg.series.is_empty() {
            vec![None]
        } else {
            (0..cfg.series.len()).map(Some).collect()
        };
        for s in series {
            let mut p = base.clone();
            p.series = s;
            if let Some(s) = s {
                let spec = &cfg.series[s];
                for &(knob, v) in &spec.set {
                    p.set(knob, v)?;
                }
                if let Some(token) = &spec.penalty {
                    p.penalty = token.clone();
                }
            }
            if let (Some(v), Some(sweep)) = (value, &cfg.sweep) {
                p.set(sweep.knob, v)?;
                p.param = v;
            } else {
                p.param = p.lambda;
            }
            out.push(p);
        }
    }
    Ok(out)
}

/// Aggregated results: one row per sweep value, a mean and standard
/// deviation column per series.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ExperimentTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut wr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        wr.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            wr.write_record(row.iter().map(|&v| format_number(v))).map_err(io)?;
        }
        wr.flush().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentTable, CliError> {
    cfg.validate()?;
    let points = points(cfg)?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let scores: Vec<Result<f64, CliError>> = jobs
        .par_iter()
        .map(|&(p, seed)| run_point(&points[p], cfg.metric, cfg.iters, seed))
        .collect();
    let mut per_point = vec![Vec::with_capacity(seeds.len()); points.len()];
    for (&(p, seed), score) in jobs.iter().zip(scores) {
        let score = score.map_err(|source| CliError::Run {
            param: points[p].param,
            series: points[p].series.map(|s| cfg.series[s].name.clone()),
            seed,
            source: Box::new(source),
        })?;
        per_point[p].push(score);
    }

    let metric = cfg.metric.column();
    let mut header = vec!["param".to_string()];
    if cfg.series.is_empty() {
        header.extend([format!("{metric}_mean"), format!("{metric}_std")]);
    } else {
        for s in &cfg.series {
            header.extend([format!("{}_{metric}_mean", s.name), format!("{}_{metric}_std", s.name)]);
        }
    }
    let width = cfg.series.len().max(1);
    let rows = points
        .chunks(width)
        .zip(per_point.chunks(width))
        .map(|(pts, scores)| {
            let mut row = vec![pts[0].param];
            for s in scores {
                let (m, sd) = mean_std(s);
                row.extend([m, sd]);
            }
            row
        })
        .collect();
    Ok(ExperimentTable { header, rows })
}

/// Largest distance between the parameter vectors of two nodes.
pub fn max_spread(w: &NodeField) -> f64 {
    let mut spread: f64 = 0.0;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            spread = spread.max(gtv::linalg::dist2(w.row(i), w.row(j)));
        }
    }
    spread
}

fn solve_checked(
    g: &gtv::EmpiricalGraph,
    losses: &[LocalLoss],
    lambda: f64,
    penalty: &str,
    iters: usize,
) -> Result<NodeField, CliError> {
    let penalty = parse_penalty(penalty)?;
    let config = SolverConfig::new(lambda, penalty).with_max_iters(iters);
    let result = solve(g, losses, &config)?;
    if result.stop_reason == StopReason::NonFinite {
        return Err(CliError::Numerical(format!(
            "iterates became non-finite after {} iterations",
            result.iterations
        )));
    }
    Ok(result.w)
}

/// Generated instance of a recovery workload: graph, masked losses and the
/// ground truth.
pub fn recovery_instance(
    topology: &TopologySpec,
    labels: &LabelModelSpec,
    rho: f64,
    seed: u64,
) -> Result<(gtv::EmpiricalGraph, gtv::Partition, Vec<LocalLoss>, NodeField), CliError> {
    let (g, p) = gen_graph(topology, seed)?;
    let (data, truth) = gen_labels(&p, labels, seed.wrapping_add(LABEL_STREAM))?;
    let losses = data
        .into_iter()
        .map(LocalLoss::squared)
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = seeded_rng(seed.wrapping_add(MASK_STREAM));
    let sampled = sample_nodes(g.node_count(), rho, &mut rng)?;
    let (losses, _) = apply_sampling_mask(&losses, &sampled)?;
    Ok((g, p, losses, truth))
}

/// Station instance for one split: threshold graph over the training
/// statistics, training losses, validation sets.
pub fn station_instance(
    stations: &StationSpec,
    eta: f64,
    data_seed: u64,
    split_seed: u64,
) -> Result<(gtv::EmpiricalGraph, Vec<LocalLoss>, Vec<gtv::LocalDataset>), CliError> {
    let (data, _) = gen_stations(stations, data_seed)?;
    let mut rng = seeded_rng(split_seed);
    let mut losses = Vec::with_capacity(data.len());
    let mut stats = Vec::with_capacity(data.len());
    let mut validation = Vec::with_capacity(data.len());
    for ds in &data {
        let (train, val) = train_validation_split(ds, &mut rng)?;
        stats.push(dataset_stats(&train)?);
        losses.push(LocalLoss::squared(train)?);
        validation.push(val);
    }
    let g = build_threshold_graph(&stats, eta)?;
    Ok((g, losses, validation))
}

pub fn run_point(point: &Point, metric: Metric, iters: usize, seed: u64) -> Result<f64, CliError> {
    match &point.workload {
        Workload::Recovery { topology, labels, rho } => {
            let (g, _, losses, truth) = recovery_instance(topology, labels, *rho, seed)?;
            let w = solve_checked(&g, &losses, point.lambda, &point.penalty, iters)?;
            match metric {
                Metric::Mse => Ok(mse(&w, &truth)?),
                Metric::Spread => Ok(max_spread(&w)),
                Metric::ValErr => Err(CliError::Config("recovery workloads have no validation sets".into())),
            }
        }
        Workload::Stations {
            stations,
            eta,
            data_seed,
        } => {
            let (g, losses, validation) = station_instance(stations, *eta, *data_seed, seed)?;
            let w = solve_checked(&g, &losses, point.lambda, &point.penalty, iters)?;
            match metric {
                Metric::ValErr => Ok(validation_error(&w, &validation)?),
                Metric::Spread => Ok(max_spread(&w)),
                Metric::Mse => Err(CliError::Config("station workloads have no ground truth".into())),
            }
        }
    }
}
