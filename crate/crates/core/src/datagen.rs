//! Synthetic score sequences and CSV ingestion.

use std::io::Read;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ScoreDomain;

/// One iid-uniform segment of a scripted shift, on `[lo * R, hi * R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub len: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceKind {
    IidUniform,
    /// `R, 0, R, 0, ...`
    Alternating,
    /// Piecewise-iid segments; four alternating low/high quarters when empty.
    ScriptedShift {
        #[serde(default)]
        segments: Vec<Segment>,
    },
    Csv {
        path: PathBuf,
    },
}

fn default_upper() -> f64 {
    1.0
}

/// Description of a score sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(flatten)]
    pub kind: SequenceKind,
    /// Number of rounds; for CSV input, an optional truncation.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "R", default = "default_upper")]
    pub upper: f64,
}

impl SequenceSpec {
    pub fn iid_uniform(length: usize, seed: u64, upper: f64) -> Self {
        Self {
            kind: SequenceKind::IidUniform,
            length: Some(length),
            seed,
            upper,
        }
    }

    pub fn alternating(length: usize, upper: f64) -> Self {
        Self {
            kind: SequenceKind::Alternating,
            length: Some(length),
            seed: 0,
            upper,
        }
    }

    pub fn scripted_shift(segments: Vec<Segment>, seed: u64, upper: f64) -> Self {
        let length = segments.iter().map(|s| s.len).sum();
        Self {
            kind: SequenceKind::ScriptedShift { segments },
            length: Some(length),
            seed,
            upper,
        }
    }

    fn synthetic_length(&self) -> Result<usize> {
        match self.length {
            Some(t) if t >= 1 => Ok(t),
            _ => Err(Error::InvalidConfig(
                "sequence length T must be at least 1".into(),
            )),
        }
    }

    /// Materializes the sequence; identical specs give identical output.
    pub fn generate(&self) -> Result<Vec<f64>> {
        let domain = ScoreDomain::new(self.upper)?;
        let upper = domain.upper();
        match &self.kind {
            SequenceKind::IidUniform => {
                let t = self.synthetic_length()?;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok((0..t).map(|_| upper * rng.random::<f64>()).collect())
            }
            SequenceKind::Alternating => {
                let t = self.synthetic_length()?;
                Ok((0..t)
                    .map(|i| if i % 2 == 0 { upper } else { 0.0 })
                    .collect())
            }
            SequenceKind::ScriptedShift { segments } => {
                let t = self.synthetic_length()?;
                let segments = if segments.is_empty() {
                    default_segments(t)
                } else {
                    segments.clone()
                };
                for s in &segments {
                    if !(0.0 <= s.lo && s.lo <= s.hi && s.hi <= 1.0) {
                        return Err(Error::InvalidConfig(format!(
                            "segment bounds [{}, {}] must satisfy 0 <= lo <= hi <= 1",
                            s.lo, s.hi
                        )));
                    }
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut out = Vec::with_capacity(t);
                for s in segments.iter().cycle() {
                    for _ in 0..s.len {
                        if out.len() == t {
                            return Ok(out);
                        }
                        let u: f64 = rng.random();
                        out.push(upper * (s.lo + (s.hi - s.lo) * u));
                    }
                    if segments.iter().all(|s| s.len == 0) {
                        return Err(Error::InvalidConfig("all segments are empty".into()));
                    }
                }
                Ok(out)
            }
            SequenceKind::Csv { path } => {
                let file = std::fs::File::open(path)?;
                let mut scores = read_scores(file, upper)?;
                if let Some(t) = self.length {
                    scores.truncate(t);
                }
                Ok(scores)
            }
        }
    }
}

fn default_segments(t: usize) -> Vec<Segment> {
    let q = t.div_ceil(4).max(1);
    vec![
        Segment {
            len: q,
            lo: 0.0,
            hi: 0.5,
        },
        Segment {
            len: q,
            lo: 0.5,
            hi: 1.0,
        },
        Segment {
            len: q,
            lo: 0.0,
            hi: 0.5,
        },
        Segment {
            len: q,
            lo: 0.5,
            hi: 1.0,
        },
    ]
}

/// Parses one score per line. A non-numeric first line is taken as a header.
/// Every value must lie in `[0, upper]`.
pub fn read_scores(reader: impl Read, upper: f64) -> Result<Vec<f64>> {
    let domain = ScoreDomain::new(upper)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            line: e.position().map_or(i as u64 + 1, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        let field = rec.get(0).unwrap_or("").trim();
        if rec.len() > 1 {
            return Err(Error::Csv {
                line,
                msg: format!("expected one value, found {}", rec.len()),
            });
        }
        match field.parse::<f64>() {
            Ok(v) => {
                let v = domain.check(v).map_err(|e| Error::Csv {
                    line,
                    msg: e.to_string(),
                })?;
                out.push(v);
            }
            Err(_) if i == 0 => continue,
            Err(_) if field.is_empty() => continue,
            Err(_) => {
                return Err(Error::Csv {
                    line,
                    msg: format!("cannot parse '{field}' as a number"),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_starts_high() {
        assert_eq!(
            SequenceSpec::alternating(4, 1.0).generate().unwrap(),
            vec![1.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(
            SequenceSpec::alternating(3, 2.5).generate().unwrap(),
            vec![2.5, 0.0, 2.5]
        );
    }

    #[test]
    fn iid_uniform_in_range_and_deterministic() {
        let a = SequenceSpec::iid_uniform(1000, 7, 1.0).generate().unwrap();
        assert!(a.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(
            a,
            SequenceSpec::iid_uniform(1000, 7, 1.0).generate().unwrap()
        );
        assert_ne!(
            a,
            SequenceSpec::iid_uniform(1000, 8, 1.0).generate().unwrap()
        );
    }

    #[test]
    fn iid_uniform_within_dkw_band() {
        let t = 20_000;
        let mut xs = SequenceSpec::iid_uniform(t, 2024, 1.0).generate().unwrap();
        xs.sort_by(f64::total_cmp);
        let eps = ((2.0f64 / 0.01).ln() / (2.0 * t as f64)).sqrt();
        let n = t as f64;
        let sup = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        assert!(sup <= eps, "KS distance {sup} > {eps}");
    }

    #[test]
    fn scripted_shift_segments() {
        let spec = SequenceSpec::scripted_shift(
            vec![
                Segment {
                    len: 50,
                    lo: 0.0,
                    hi: 0.1,
                },
                Segment {
                    len: 50,
                    lo: 0.9,
                    hi: 1.0,
                },
            ],
            1,
            2.0,
        );
        let xs = spec.generate().unwrap();
        assert_eq!(xs.len(), 100);
        assert!(xs[..50].iter().all(|&x| x <= 0.2));
        assert!(xs[50..].iter().all(|&x| x >= 1.8));
        let default = SequenceSpec {
            kind: SequenceKind::ScriptedShift { segments: vec![] },
            length: Some(10),
            seed: 3,
            upper: 1.0,
        };
        assert_eq!(default.generate().unwrap().len(), 10);
    }

    #[test]
    fn csv_parsing() {
        assert_eq!(
            read_scores("0.25\n0.75".as_bytes(), 1.0).unwrap(),
            vec![0.25, 0.75]
        );
        assert_eq!(
            read_scores("score\n0.5\n".as_bytes(), 1.0).unwrap(),
            vec![0.5]
        );
        match read_scores("0.1\n0.2\nabc\n".as_bytes(), 1.0) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match read_scores("0.1\n1.5\n".as_bytes(), 1.0) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sequence_json() {
        let s: SequenceSpec = serde_json::from_str(r#"{"kind":"alternating","T":6}"#).unwrap();
        assert_eq!(s.generate().unwrap().len(), 6);
        let s: SequenceSpec = serde_json::from_str(r#"{"kind":"iid_uniform"}"#).unwrap();
        assert!(s.generate().is_err());
    }
}
