//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bayescp::belief::{ExactBelief, Grid, QuantizedBelief, Schedule};
use bayescp::datagen::SequenceSpec;
use bayescp::oracle;
use bayescp::runner::run_episode;
use bayescp::verify::{run_suite, Suite, VerifyOptions};
use bayescp::{Algorithm, PredictorConfig, Prior};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn battery(suite: Suite) -> Outcome {
    let opts = VerifyOptions::new(suite.default_instances(), 2024);
    let rep = run_suite(suite, &opts).map_err(|e| e.to_string())?;
    let fast = rep.elapsed < Duration::from_secs(30);
    ensure(rep.passed() && fast, rep.to_string())
}

fn regret_scaling() -> Outcome {
    let levels = [0.1, 0.5, 0.9];
    let t = 100_000;
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for (name, spec) in [
        ("iid", SequenceSpec::iid_uniform(t, 17, 1.0)),
        ("alternating", SequenceSpec::alternating(t, 1.0)),
    ] {
        let rep = run_episode(&PredictorConfig::new(Algorithm::Bayesian), &spec, &levels)
            .map_err(|e| e.to_string())?;
        for (i, &a) in levels.iter().enumerate() {
            let reg = *rep.regret_curves[i].last().unwrap();
            // cross-check the incremental comparator against a full sort
            let records: Vec<_> = rep.records_at(a).cloned().collect();
            let direct = oracle::regret(&records, a);
            if (reg - direct).abs() > 1e-6 * t as f64 {
                return Err(format!("{name} alpha={a}: curve {reg} vs direct {direct}"));
            }
            let ratio = reg / (t as f64).sqrt();
            worst = worst.max(ratio);
            notes.push(format!("{name}/{a}:{ratio:.3}"));
        }
    }
    ensure(
        worst <= 5.0,
        format!("max Reg/sqrt(T) = {worst:.3} <= 5 [{}]", notes.join(" ")),
    )
}

fn erm_failure() -> Outcome {
    let start = Instant::now();
    let spec = SequenceSpec::alternating(1000, 1.0);
    let erm = run_episode(&PredictorConfig::new(Algorithm::Erm), &spec, &[0.5])
        .map_err(|e| e.to_string())?;
    let bayes = run_episode(&PredictorConfig::new(Algorithm::Bayesian), &spec, &[0.5])
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (re, rb) = (
        erm.final_regret(0.5).unwrap(),
        bayes.final_regret(0.5).unwrap(),
    );
    ensure(
        re >= 200.0 && rb <= 158.0 && elapsed < Duration::from_secs(1),
        format!("ERM regret {re:.2} >= 200, Bayesian regret {rb:.2} <= 158 ({elapsed:.2?})"),
    )
}

fn monotonicity() -> Outcome {
    let pairs = [[0.75, 0.8], [0.85, 0.9]];
    let seeds = [1u64, 2, 3, 4, 5];
    let t = 10_000;
    let mut discounted = PredictorConfig::new(Algorithm::Discounted);
    discounted.beta = Some(0.99);
    let monotone = [
        PredictorConfig::new(Algorithm::Bayesian),
        PredictorConfig::new(Algorithm::Quantized),
        discounted,
        PredictorConfig::new(Algorithm::Erm),
    ];
    let mut multi_total = 0;
    let mut multi_cells = Vec::new();
    for seed in seeds {
        let spec = SequenceSpec::iid_uniform(t, seed, 1.0);
        for pair in pairs {
            for cfg in &monotone {
                let rep = run_episode(cfg, &spec, &pair).map_err(|e| e.to_string())?;
                let v = rep.monotonicity_violations.unwrap();
                if v != 0 {
                    return Err(format!(
                        "{} seed {seed} pair {pair:?}: {v} violations",
                        cfg.label()
                    ));
                }
            }
            let rep = run_episode(&PredictorConfig::new(Algorithm::MultiOgd), &spec, &pair)
                .map_err(|e| e.to_string())?;
            let v = rep.monotonicity_violations.unwrap();
            multi_total += v;
            multi_cells.push(format!("s{seed}{pair:?}:{v}"));
        }
    }
    ensure(
        multi_total > 0,
        format!(
            "Bayesian/Quantized/Discounted/ERM: 0 violations; MultiOGD violations {}",
            multi_cells.join(" ")
        ),
    )
}

fn coverage() -> Outcome {
    let levels = [0.5, 0.7, 0.9];
    let spec = SequenceSpec::iid_uniform(10_000, 99, 1.0);
    let rep = run_episode(&PredictorConfig::new(Algorithm::Bayesian), &spec, &levels)
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut notes = Vec::new();
    for a in levels {
        let window: Vec<_> = rep.records_at(a).filter(|r| r.t >= 5000).collect();
        let freq = window.iter().filter(|r| r.covered).count() as f64 / window.len() as f64;
        ok &= (freq - a).abs() <= 0.02;
        notes.push(format!("{a}:{freq:.4}"));
    }
    ensure(
        ok,
        format!("coverage over rounds 5000..=10000 [{}]", notes.join(" ")),
    )
}

fn random_prior(rng: &mut ChaCha8Rng, upper: f64) -> Prior {
    if rng.random_bool(0.5) {
        Prior::uniform(upper).unwrap()
    } else {
        let c = upper * rng.random_range(0.1..0.9);
        Prior::from_knots(vec![
            (0.0, 0.0),
            (c, rng.random_range(0.05..0.95)),
            (upper, 1.0),
        ])
        .unwrap()
    }
}

fn quantized_consistency() -> Outcome {
    let mut compared = 0usize;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        rng.set_stream(i);
        let upper = if i % 2 == 0 {
            1.0
        } else {
            rng.random_range(0.5..5.0)
        };
        let m = rng.random_range(2..=200usize);
        let t_max = rng.random_range(1..=300usize);
        let prior = random_prior(&mut rng, upper);
        let grid = Grid::new(m, upper).unwrap();
        let mut q = QuantizedBelief::new(prior.clone(), m).unwrap();
        let mut e = ExactBelief::new(prior);
        let mut levels: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        levels.extend((0..5).map(|_| rng.random::<f64>()));
        for t in 1..=t_max as u64 {
            let lambda = Schedule::Sqrt.step_size(t);
            for &a in &levels {
                let (x, y) = (q.quantile(lambda, a), e.quantile(lambda, a));
                if x.to_bits() != y.to_bits() {
                    return Err(format!("sequence {i} round {t} alpha {a}: {x} vs {y}"));
                }
                compared += 1;
            }
            // mix in exact grid points and cell midpoints
            let s = match rng.random_range(0..5) {
                0 => grid.point(rng.random_range(0..m)),
                1 => {
                    let j = rng.random_range(0..m - 1);
                    0.5 * (grid.point(j) + grid.point(j + 1))
                }
                _ => upper * rng.random::<f64>(),
            };
            q.observe(s).unwrap();
            e.observe(grid.round(s)).unwrap();
        }
    }

    let t = 10_000;
    let spec = SequenceSpec::iid_uniform(t, 5, 1.0);
    let levels = [0.1, 0.5, 0.9];
    let exact = run_episode(&PredictorConfig::new(Algorithm::Bayesian), &spec, &levels)
        .map_err(|e| e.to_string())?;
    let quant = run_episode(&PredictorConfig::new(Algorithm::Quantized), &spec, &levels)
        .map_err(|e| e.to_string())?;
    let bound = 2.0 * (t as f64).sqrt();
    let mut gap = 0.0f64;
    for a in levels {
        gap = gap.max((quant.final_regret(a).unwrap() - exact.final_regret(a).unwrap()).abs());
    }
    ensure(
        gap <= bound,
        format!("{compared} quantile pairs bit-identical; max regret gap {gap:.3} <= {bound}"),
    )
}

fn memory_contract() -> Outcome {
    let m = 1000;
    let t = 1_000_000;
    let scores = SequenceSpec::iid_uniform(t, 8, 1.0)
        .generate()
        .map_err(|e| e.to_string())?;
    let mut q = QuantizedBelief::new(Prior::uniform(1.0).unwrap(), m).unwrap();
    let mut e = ExactBelief::new(Prior::uniform(1.0).unwrap());
    for &s in &scores {
        q.observe(s).unwrap();
        e.observe(s).unwrap();
    }
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let cells = q.cell_counts().len();
    ensure(
        cells == m
            && q.observed() == t as u64
            && e.observed() == t as u64
            && e.stream().distinct() == sorted.len(),
        format!(
            "quantized cells {cells} == m after {t} observations; exact keeps {} distinct values",
            e.stream().distinct()
        ),
    )
}

fn snapshot_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for entry in walk(dir) {
        let rel = entry
            .strip_prefix(dir)
            .unwrap()
            .to_string_lossy()
            .into_owned();
        files.push((rel, std::fs::read(&entry).unwrap()));
    }
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let invocations: &[&[&str]] = &[
        &[
            "run",
            "--algo",
            "bayesian",
            "--algo",
            "quantized",
            "--algo",
            "discounted",
            "--beta",
            "0.9",
            "--algo",
            "erm",
            "--algo",
            "ogd",
            "--algo",
            "multi_ogd",
            "--seq",
            "iid_uniform",
            "--T",
            "2000",
            "--alpha",
            "0.8",
            "--seed",
            "31",
            "--workers",
            "4",
            "--out",
            "run",
        ],
        &[
            "run",
            "--seq",
            "scripted_shift",
            "--T",
            "1000",
            "--seed",
            "2",
            "--out",
            "shift",
        ],
        &[
            "figure",
            "monotonicity",
            "--T",
            "500",
            "--seed",
            "3",
            "--out",
            "figs",
        ],
        &["figure", "switching", "--T", "500", "--out", "figs"],
        &[
            "figure",
            "iid_quantiles",
            "--T",
            "500",
            "--seed",
            "3",
            "--out",
            "figs",
        ],
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        for args in invocations {
            let out = Command::new(env!("CARGO_BIN_EXE_bayescp"))
                .args(*args)
                .current_dir(dir)
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(format!(
                    "{args:?}: {}",
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
        }
    }
    let (fa, fb) = (snapshot_dir(a.path()), snapshot_dir(b.path()));
    ensure(
        !fa.is_empty() && fa == fb,
        format!(
            "{} output files byte-identical across two invocations",
            fa.len()
        ),
    )
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (
            "exact belief quantile matches regularized-leader argmin",
            || battery(Suite::Ftrl),
        ),
        (
            "discounted belief quantile matches discounted objective argmin",
            || battery(Suite::Discounted),
        ),
        (
            "pre-coverage sandwich holds for every round and level",
            || battery(Suite::Sandwich),
        ),
        ("regret scaling at T = 1e5", regret_scaling),
        ("ERM linear regret on alternating scores", erm_failure),
        ("threshold monotonicity across levels", monotonicity),
        ("long-run coverage on iid scores", coverage),
        ("quantized engine consistency", quantized_consistency),
        ("memory contract", memory_contract),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({elapsed:.2?})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
