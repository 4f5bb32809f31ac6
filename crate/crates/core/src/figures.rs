//! Data series behind the monotonicity, switching and iid-quantile plots.
//! Nothing is drawn here; every figure becomes a long-format CSV plus a small
//! JSON summary.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::datagen::SequenceSpec;
use crate::error::{Error, Result};
use crate::predictor::{Algorithm, PredictorConfig};
use crate::runner::{csv_err, run_episode, EpisodeReport};

/// Level pairs compared in the monotonicity figure.
pub const MONOTONICITY_PAIRS: [[f64; 2]; 2] = [[0.75, 0.8], [0.85, 0.9]];
pub const MONOTONICITY_ALGORITHMS: [Algorithm; 3] =
    [Algorithm::MultiOgd, Algorithm::Erm, Algorithm::Bayesian];
pub const SWITCHING_LEVELS: [f64; 2] = [0.5, 0.7];
pub const SWITCHING_ALGORITHMS: [Algorithm; 3] =
    [Algorithm::Ogd, Algorithm::Erm, Algorithm::Quantized];
pub const IID_LEVELS: [f64; 3] = [0.5, 0.7, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Monotonicity,
    Switching,
    IidQuantiles,
}

impl Figure {
    pub const ALL: [Figure; 3] = [
        Figure::Monotonicity,
        Figure::Switching,
        Figure::IidQuantiles,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Monotonicity => "monotonicity",
            Figure::Switching => "switching",
            Figure::IidQuantiles => "iid_quantiles",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown figure '{s}'")))
    }

    pub fn default_horizon(self) -> usize {
        match self {
            Figure::Monotonicity | Figure::IidQuantiles => 2000,
            Figure::Switching => 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FigureOptions {
    pub horizon: Option<usize>,
    pub seed: u64,
    /// 0 uses rayon's default.
    pub workers: usize,
}

/// One episode of a figure, identified by algorithm and level set.
#[derive(Debug, Clone, Serialize)]
pub struct PanelSummary {
    pub algorithm: String,
    pub levels: Vec<f64>,
    pub final_regret: Vec<f64>,
    pub monotonicity_violations: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FigureSummary {
    pub figure: &'static str,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
    pub panels: Vec<PanelSummary>,
}

/// Runs the episodes of `figure` in parallel; panel order is fixed.
pub fn episodes(figure: Figure, opts: &FigureOptions) -> Result<Vec<EpisodeReport>> {
    let t = opts.horizon.unwrap_or(figure.default_horizon());
    let jobs: Vec<(Algorithm, Vec<f64>, SequenceSpec)> = match figure {
        Figure::Monotonicity => MONOTONICITY_PAIRS
            .iter()
            .flat_map(|pair| {
                MONOTONICITY_ALGORITHMS.iter().map(move |&a| {
                    (
                        a,
                        pair.to_vec(),
                        SequenceSpec::iid_uniform(t, opts.seed, 1.0),
                    )
                })
            })
            .collect(),
        Figure::Switching => SWITCHING_ALGORITHMS
            .iter()
            .map(|&a| {
                (
                    a,
                    SWITCHING_LEVELS.to_vec(),
                    SequenceSpec::alternating(t, 1.0),
                )
            })
            .collect(),
        Figure::IidQuantiles => vec![(
            Algorithm::Bayesian,
            IID_LEVELS.to_vec(),
            SequenceSpec::iid_uniform(t, opts.seed, 1.0),
        )],
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|(a, levels, spec)| run_episode(&PredictorConfig::new(*a), spec, levels))
            .collect()
    })
}

/// Writes `<figure>.csv` and `<figure>_summary.json` into `dir`.
pub fn render(figure: Figure, opts: &FigureOptions, dir: &Path) -> Result<Vec<PathBuf>> {
    let reports = episodes(figure, opts)?;
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", figure.as_str()));
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&csv_path)?));
    match figure {
        Figure::Monotonicity => {
            w.write_record(["pair", "algorithm", "t", "alpha", "threshold"])
                .map_err(csv_err)?;
            for rep in &reports {
                let pair = format!("{}-{}", rep.levels[0], rep.levels[1]);
                for r in &rep.records {
                    w.serialize((&pair, &rep.algorithm, r.t, r.alpha, r.threshold))
                        .map_err(csv_err)?;
                }
            }
        }
        Figure::Switching => {
            w.write_record(["algorithm", "t", "alpha", "regret"])
                .map_err(csv_err)?;
            for rep in &reports {
                for (i, &alpha) in rep.levels.iter().enumerate() {
                    for (k, reg) in rep.regret_curves[i].iter().enumerate() {
                        w.serialize((&rep.algorithm, k + 1, alpha, reg))
                            .map_err(csv_err)?;
                    }
                }
            }
        }
        Figure::IidQuantiles => {
            w.write_record(["t", "alpha", "threshold", "r_star"])
                .map_err(csv_err)?;
            for rep in &reports {
                for r in &rep.records {
                    w.serialize((r.t, r.alpha, r.threshold, r.r_star))
                        .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;

    let summary = FigureSummary {
        figure: figure.as_str(),
        horizon: opts.horizon.unwrap_or(figure.default_horizon()),
        seed: opts.seed,
        panels: reports
            .iter()
            .map(|rep| PanelSummary {
                algorithm: rep.algorithm.clone(),
                levels: rep.levels.clone(),
                final_regret: rep
                    .regret_curves
                    .iter()
                    .map(|c| c.last().copied().unwrap_or(0.0))
                    .collect(),
                monotonicity_violations: rep.monotonicity_violations,
            })
            .collect(),
    };
    let json_path = dir.join(format!("{}_summary.json", figure.as_str()));
    let mut f = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut f, &summary).map_err(|e| Error::Io(e.into()))?;
    Ok(vec![csv_path, json_path])
}
