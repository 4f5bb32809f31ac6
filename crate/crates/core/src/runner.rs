//! Episode driver: feeds a score sequence through a predictor, queries every
//! configured level each round, and accumulates regret and coverage curves.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::SequenceSpec;
use crate::error::{Error, Result};
use crate::predictor::{Predictor, PredictorConfig, PredictorRecord};
use crate::stream::ScoreStream;
use crate::types::{order_index, ConfidenceLevel};

/// Query levels used when none are configured.
pub const DEFAULT_LEVELS: [f64; 3] = [0.5, 0.7, 0.9];

/// Everything recorded for one predictor over one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub algorithm: String,
    pub horizon: usize,
    pub levels: Vec<f64>,
    /// Round-major: all levels of round 1, then round 2, ...
    pub records: Vec<PredictorRecord>,
    /// `regret_curves[i][t-1]` is `Reg_t(levels[i])`.
    pub regret_curves: Vec<Vec<f64>>,
    pub coverage_error_curves: Vec<Vec<f64>>,
    /// `None` for single-level episodes.
    pub monotonicity_violations: Option<usize>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Final per-level numbers of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub alpha: f64,
    pub regret: f64,
    pub coverage: f64,
    pub coverage_error: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub algorithm: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub levels: Vec<LevelSummary>,
    pub monotonicity_violations: Option<usize>,
}

/// Comparator loss `sum_{s <= t} l(q_alpha(r*_{1:t}), r*_s)` from an ordered prefix.
fn comparator_loss(stream: &ScoreStream, alpha: f64) -> f64 {
    let n = stream.len();
    let q = stream
        .select(order_index(alpha, n as usize) as u64)
        .expect("nonempty prefix");
    let (c, s_le) = stream.count_sum_le(q);
    let total = stream.sum();
    (1.0 - alpha) * (q * c as f64 - s_le) + alpha * ((total - s_le) - q * (n - c) as f64)
}

fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidConfig("no query levels".into()));
    }
    for &a in levels {
        ConfidenceLevel::new(a)?;
    }
    Ok(())
}

/// Builds the predictor from `config`, generates the sequence and runs it.
pub fn run_episode(
    config: &PredictorConfig,
    spec: &SequenceSpec,
    levels: &[f64],
) -> Result<EpisodeReport> {
    let scores = spec.generate()?;
    if config.upper != spec.upper {
        return Err(Error::InvalidConfig(format!(
            "predictor R = {} does not match sequence R = {}",
            config.upper, spec.upper
        )));
    }
    let predictor = config.build(Some(scores.len() as u64))?;
    run_on_scores(predictor, &scores, levels)
}

/// Runs the predict-then-update loop over `scores`, querying all `levels` each round.
pub fn run_on_scores(
    mut predictor: Predictor,
    scores: &[f64],
    levels: &[f64],
) -> Result<EpisodeReport> {
    validate_levels(levels)?;
    let start = Instant::now();
    let big_t = scores.len();
    let k = levels.len();
    let mut records = Vec::with_capacity(big_t * k);
    let mut regret_curves = vec![Vec::with_capacity(big_t); k];
    let mut coverage_error_curves = vec![Vec::with_capacity(big_t); k];
    let mut cum_loss = vec![0.0; k];
    let mut covered = vec![0u64; k];
    let mut prefix = ScoreStream::new();

    for &r_star in scores {
        for &alpha in levels {
            predictor.predict(alpha)?;
        }
        let round = predictor.update(r_star)?;
        prefix.insert(r_star);
        let t = prefix.len() as f64;
        for (i, rec) in round.iter().enumerate() {
            cum_loss[i] += rec.loss;
            covered[i] += rec.covered as u64;
            regret_curves[i].push(cum_loss[i] - comparator_loss(&prefix, rec.alpha));
            coverage_error_curves[i].push((rec.alpha - covered[i] as f64 / t).abs());
        }
        records.extend(round);
    }

    let monotonicity_violations = if k >= 2 {
        Some(monotonicity_scan(&records)?)
    } else {
        None
    };
    Ok(EpisodeReport {
        algorithm: predictor.label().to_owned(),
        horizon: big_t,
        levels: levels.to_vec(),
        records,
        regret_curves,
        coverage_error_curves,
        monotonicity_violations,
        wall_time: start.elapsed(),
    })
}

/// Counts rounds in which a higher level got a strictly smaller threshold.
///
/// Records must be grouped by round, as produced by [`run_on_scores`].
pub fn monotonicity_scan(records: &[PredictorRecord]) -> Result<usize> {
    let mut distinct: Vec<f64> = records.iter().map(|r| r.alpha).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::TooFewLevels);
    }
    let mut violations = 0;
    let mut round: Vec<(f64, f64)> = Vec::new();
    for chunk in records.chunk_by(|a, b| a.t == b.t) {
        round.clear();
        round.extend(chunk.iter().map(|r| (r.alpha, r.threshold)));
        round.sort_by(|a, b| a.0.total_cmp(&b.0));
        if round.windows(2).any(|w| w[0].0 < w[1].0 && w[0].1 > w[1].1) {
            violations += 1;
        }
    }
    Ok(violations)
}

impl EpisodeReport {
    /// Records at one level, in round order.
    pub fn records_at(&self, alpha: f64) -> impl Iterator<Item = &PredictorRecord> {
        self.records.iter().filter(move |r| r.alpha == alpha)
    }

    pub fn final_regret(&self, alpha: f64) -> Option<f64> {
        let i = self.levels.iter().position(|&a| a == alpha)?;
        self.regret_curves[i].last().copied()
    }

    pub fn summary(&self) -> EpisodeSummary {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, &alpha)| {
                let (mut n, mut cov, mut loss) = (0usize, 0usize, 0.0);
                for r in self.records_at(alpha) {
                    n += 1;
                    cov += r.covered as usize;
                    loss += r.loss;
                }
                let nf = n.max(1) as f64;
                LevelSummary {
                    alpha,
                    regret: self.regret_curves[i].last().copied().unwrap_or(0.0),
                    coverage: cov as f64 / nf,
                    coverage_error: self.coverage_error_curves[i].last().copied().unwrap_or(0.0),
                    mean_loss: loss / nf,
                }
            })
            .collect();
        EpisodeSummary {
            algorithm: self.algorithm.clone(),
            horizon: self.horizon,
            levels,
            monotonicity_violations: self.monotonicity_violations,
        }
    }

    /// Columns `t,alpha,threshold,r_star,loss,covered`.
    pub fn write_records_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "alpha", "threshold", "r_star", "loss", "covered"])
            .map_err(csv_err)?;
        for r in &self.records {
            out.serialize((r.t, r.alpha, r.threshold, r.r_star, r.loss, r.covered as u8))
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Columns `t,alpha,regret,coverage_error`.
    pub fn write_curves_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "alpha", "regret", "coverage_error"])
            .map_err(csv_err)?;
        for t in 0..self.horizon {
            for (i, &alpha) in self.levels.iter().enumerate() {
                out.serialize((
                    t + 1,
                    alpha,
                    self.regret_curves[i][t],
                    self.coverage_error_curves[i][t],
                ))
                .map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Default levels plus any extra ones, ascending and deduplicated.
pub fn resolve_levels(extra: &[f64]) -> Vec<f64> {
    let mut levels: Vec<f64> = DEFAULT_LEVELS.iter().chain(extra).copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// A batch of predictors run against one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithms: Vec<PredictorConfig>,
    pub sequence: SequenceSpec,
    /// Extra query levels on top of [`DEFAULT_LEVELS`].
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Output stem per algorithm; repeated labels get `_2`, `_3`, ...
    pub fn stems(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        self.algorithms
            .iter()
            .map(|a| {
                let base = a.label();
                let mut stem = base.clone();
                let mut k = 1;
                while seen.contains(&stem) {
                    k += 1;
                    stem = format!("{base}_{k}");
                }
                seen.push(stem.clone());
                stem
            })
            .collect()
    }

    /// Runs every algorithm on the sequence, in parallel across algorithms.
    pub fn run(&self, workers: usize) -> Result<Vec<EpisodeReport>> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms configured".into()));
        }
        let levels = resolve_levels(&self.levels);
        validate_levels(&levels)?;
        let scores = self.sequence.generate()?;
        let predictors = self
            .algorithms
            .iter()
            .map(|a| {
                if a.upper != self.sequence.upper {
                    return Err(Error::InvalidConfig(format!(
                        "{}: R = {} does not match sequence R = {}",
                        a.label(),
                        a.upper,
                        self.sequence.upper
                    )));
                }
                a.build(Some(scores.len() as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
        pool.install(|| {
            predictors
                .into_par_iter()
                .map(|p| run_on_scores(p, &scores, &levels))
                .collect()
        })
    }

    /// Writes the resolved `config.json` (seed included), then
    /// `<stem>.csv`, `<stem>_curves.csv` and `<stem>_summary.json` per report.
    pub fn write_outputs(&self, reports: &[EpisodeReport]) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join("config.json");
        let mut f = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut f, self).map_err(|e| Error::Io(e.into()))?;
        f.flush()?;
        let mut files = vec![path];
        for (stem, rep) in self.stems().iter().zip(reports) {
            let path = self.out.join(format!("{stem}.csv"));
            rep.write_records_csv(BufWriter::new(File::create(&path)?))?;
            files.push(path);
            let path = self.out.join(format!("{stem}_curves.csv"));
            rep.write_curves_csv(BufWriter::new(File::create(&path)?))?;
            files.push(path);
            let path = self.out.join(format!("{stem}_summary.json"));
            let mut f = BufWriter::new(File::create(&path)?);
            serde_json::to_writer_pretty(&mut f, &rep.summary())
                .map_err(|e| Error::Io(e.into()))?;
            f.flush()?;
            files.push(path);
        }
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::predictor::Algorithm;

    fn cfg(algo: Algorithm) -> PredictorConfig {
        PredictorConfig::new(algo)
    }

    #[test]
    fn regret_curve_matches_direct_computation() {
        let spec = SequenceSpec::iid_uniform(500, 5, 1.0);
        let rep = run_episode(&cfg(Algorithm::Bayesian), &spec, &[0.2, 0.9]).unwrap();
        for (i, &alpha) in rep.levels.iter().enumerate() {
            let direct = oracle::regret(&rep.records, alpha);
            assert!((rep.regret_curves[i][499] - direct).abs() < 1e-9);
            // a prefix too
            let prefix: Vec<_> = rep.records_at(alpha).take(123).copied().collect();
            assert!((rep.regret_curves[i][122] - oracle::regret(&prefix, alpha)).abs() < 1e-9);
            let ce = oracle::coverage_error(&rep.records, alpha).unwrap();
            assert!((rep.coverage_error_curves[i][499] - ce).abs() < 1e-12);
        }
        assert_eq!(rep.records.len(), 1000);
        assert_eq!(rep.regret_curves[0].len(), 500);
    }

    #[test]
    fn bayesian_alternating_regret_small_erm_large() {
        let spec = SequenceSpec::alternating(1000, 1.0);
        let b = run_episode(&cfg(Algorithm::Bayesian), &spec, &[0.5]).unwrap();
        let e = run_episode(&cfg(Algorithm::Erm), &spec, &[0.5]).unwrap();
        assert!(b.final_regret(0.5).unwrap() <= 5.0 * 1000f64.sqrt());
        assert!(e.final_regret(0.5).unwrap() >= 200.0);
        assert_eq!(b.monotonicity_violations, None);
    }

    #[test]
    fn bayesian_iid_coverage() {
        let spec = SequenceSpec::iid_uniform(10_000, 1, 1.0);
        let rep = run_episode(&cfg(Algorithm::Bayesian), &spec, &[0.9]).unwrap();
        assert!(rep.coverage_error_curves[0][9_999] < 0.02);
    }

    #[test]
    fn monotonicity_scan_cases() {
        let recs = vec![
            PredictorRecord::new(1, 0.5, 0.4, 0.1),
            PredictorRecord::new(1, 0.9, 0.3, 0.1),
            PredictorRecord::new(2, 0.5, 0.4, 0.1),
            PredictorRecord::new(2, 0.9, 0.6, 0.1),
        ];
        assert_eq!(monotonicity_scan(&recs).unwrap(), 1);
        assert!(matches!(
            monotonicity_scan(&recs[..1]),
            Err(Error::TooFewLevels)
        ));
        let spec = SequenceSpec::iid_uniform(300, 2, 1.0);
        let rep = run_episode(&cfg(Algorithm::Bayesian), &spec, &[0.75, 0.8]).unwrap();
        assert_eq!(rep.monotonicity_violations, Some(0));
    }

    #[test]
    fn replay_is_byte_identical() {
        let spec = SequenceSpec::iid_uniform(200, 9, 1.0);
        let mut c = cfg(Algorithm::Quantized);
        c.grid_size = Some(15);
        let render = || {
            let rep = run_episode(&c, &spec, &DEFAULT_LEVELS).unwrap();
            let mut a = Vec::new();
            rep.write_records_csv(&mut a).unwrap();
            rep.write_curves_csv(&mut a).unwrap();
            a.extend(serde_json::to_vec(&rep.summary()).unwrap());
            a
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn records_csv_layout() {
        let spec = SequenceSpec::alternating(2, 1.0);
        let rep = run_episode(&cfg(Algorithm::Bayesian), &spec, &[0.5]).unwrap();
        let mut buf = Vec::new();
        rep.write_records_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,alpha,threshold,r_star,loss,covered");
        assert_eq!(lines[1], "1,0.5,0.5,1.0,0.25,0");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn rejects_bad_levels_and_mismatched_domain() {
        let spec = SequenceSpec::alternating(4, 1.0);
        assert!(run_episode(&cfg(Algorithm::Bayesian), &spec, &[]).is_err());
        assert!(run_episode(&cfg(Algorithm::Bayesian), &spec, &[1.2]).is_err());
        let spec2 = SequenceSpec::alternating(4, 2.0);
        assert!(run_episode(&cfg(Algorithm::Bayesian), &spec2, &[0.5]).is_err());
    }

    #[test]
    fn levels_merge_with_defaults() {
        assert_eq!(resolve_levels(&[]), vec![0.5, 0.7, 0.9]);
        assert_eq!(resolve_levels(&[0.9, 0.1]), vec![0.1, 0.5, 0.7, 0.9]);
    }

    #[test]
    fn run_config_stems_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            r#"{{"algorithms": [{{"algorithm": "bayesian"}}, {{"algorithm": "erm"}}, {{"algorithm": "bayesian"}}],
                "sequence": {{"kind": "alternating", "T": 20}},
                "out": {:?}}}"#,
            dir.path()
        );
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.stems(), vec!["bayesian", "erm", "bayesian_2"]);
        let reports = cfg.run(2).unwrap();
        assert_eq!(reports[0].records, reports[2].records);
        let files = cfg.write_outputs(&reports).unwrap();
        assert_eq!(files.len(), 10);
        let again = std::fs::read_to_string(dir.path().join("config.json")).unwrap();
        assert_eq!(RunConfig::from_json(&again).unwrap(), cfg);
        let rows = std::fs::read_to_string(dir.path().join("erm.csv")).unwrap();
        assert_eq!(rows.lines().count(), 1 + 20 * 3);
        assert!(RunConfig::from_json(
            r#"{"algorithms": [], "sequence": {"kind": "alternating", "T": 2}}"#
        )
        .unwrap()
        .run(1)
        .is_err());
        assert!(RunConfig::from_json(r#"{"sequence": {"kind": "alternating"}}"#).is_err());
    }
}
