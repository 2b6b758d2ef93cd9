//! Acceptance checks. Prints one PASS/FAIL line per criterion; exits
//! non-zero on a failure only when STOCHACT_STRICT=1. Criteria 4 and 5 train
//! several hundred networks and take the better part of an hour on one core.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use stochact::activations::suite::{gradient_suite, relu_equivalent_at_init};
use stochact::activations::{act_forward, act_init, ActivationKind};
use stochact::ensemble::{rank_by_average, sum_rule_fuse};
use stochact::experiment::{emit_report, run_experiment, ExperimentConfig, ExperimentReport, RunOptions};
use stochact::model::{predict, ModelSpec};
use stochact::stats::wilcoxon_signed_rank;
use stochact::tensor::conv2d;
use stochact::trainer::{argmax, train_model, TrainConfig};
use stochact::{Rng, Tensor};

const GRAD_POINTS: usize = 1000;
const GRAD_PARAM_CONFIGS: usize = 1000;
const GRAD_TOLERANCE: f64 = 1e-4;
const RELU_GRID: usize = 10_000;
const CONV_INSTANCES: usize = 100;
const CONV_TOLERANCE: f64 = 1e-10;
const WILCOXON_TRIALS_PER_N: usize = 300;
const PDELU_T: f64 = 1.0 - 1e-6;
const PDELU_TOLERANCE: f64 = 1e-4;
const DESK_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const SINGLE: &str = "relu";
const FUSED_RELU: &str = "FusRelu10";
const STOCHASTIC: &str = "StoFullAS10";
const FUSE_COPIES: [usize; 3] = [2, 5, 15];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

fn gradient_fidelity() -> Outcome {
    let rows = gradient_suite(GRAD_POINTS, GRAD_PARAM_CONFIGS, 2024).expect("suite runs");
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for r in &rows {
        let enough = r.input.checked >= GRAD_POINTS && r.params.is_none_or(|p| p.checked >= GRAD_POINTS);
        worst = worst.max(r.input.max_rel_error);
        if let Some(p) = &r.params {
            worst = worst.max(p.max_rel_error);
        }
        if !enough || !r.passes(GRAD_TOLERANCE) {
            failures.push(format!("{}@{}", r.kind, r.max_input));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} variants, >= {GRAD_POINTS} points each, worst relative error {worst:.2e} (tolerance {GRAD_TOLERANCE:e}){}",
            rows.len(),
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(" ")) }
        ),
    )
}

fn relu_equivalence() -> Outcome {
    use ActivationKind as K;
    let mut checked = Vec::new();
    let mut bad = Vec::new();
    for kind in [K::MeluK4, K::MeluK8, K::GaluK4, K::GaluK2, K::Srelu, K::Prelu, K::Aplu] {
        let inputs: &[f64] = if kind.uses_max_input() { &[1.0, 255.0] } else { &[1.0] };
        for &m in inputs {
            let ok = relu_equivalent_at_init(kind, m, RELU_GRID, 7).expect("init");
            checked.push(format!("{kind}@{m}"));
            if !ok {
                bad.push(format!("{kind}@{m}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} variants equal ReLU exactly on a {RELU_GRID}-point grid{}",
            checked.len() - bad.len(),
            if bad.is_empty() { String::new() } else { format!("; differing: {}", bad.join(" ")) }
        ),
    )
}

/// Quadruple-loop cross-correlation straight from the definition.
fn reference_conv(x: &Tensor, k: &Tensor, stride: usize, pad: usize) -> Vec<f64> {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (o, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = Vec::with_capacity(n * o * oh * ow);
    for b in 0..n {
        for f in 0..o {
            for i in 0..oh {
                for j in 0..ow {
                    let mut s = 0.0;
                    for ch in 0..c {
                        for u in 0..kh {
                            for v in 0..kw {
                                let (y, xx) = ((i * stride + u) as isize - pad as isize, (j * stride + v) as isize - pad as isize);
                                if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                                    continue;
                                }
                                s += x.data()[((b * c + ch) * h + y as usize) * w + xx as usize]
                                    * k.data()[((f * c + ch) * kh + u) * kw + v];
                            }
                        }
                    }
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Exact two-sided signed-rank p by listing all 2^n sign patterns, in integer
/// arithmetic on doubled ranks.
fn enumerated_p(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    let doubled: Vec<u64> = (0..n)
        .map(|i| {
            let below = d.iter().filter(|v| v.abs() < d[i].abs()).count() as u64;
            let tied = d.iter().filter(|v| v.abs() == d[i].abs()).count() as u64;
            2 * below + tied + 1
        })
        .collect();
    let observed: u64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| doubled[i]).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..1 << n {
        let w: u64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| doubled[i]).sum();
        le += u64::from(w <= observed);
        ge += u64::from(w >= observed);
    }
    let total = (1u64 << n) as f64;
    (2.0 * (le as f64 / total).min(ge as f64 / total)).min(1.0)
}

fn oracle_equivalences() -> Outcome {
    let mut rng = Rng::new(99);
    let mut conv_err = 0.0f64;
    for _ in 0..CONV_INSTANCES {
        let (n, c, o) = (1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(4));
        let (h, w) = (3 + rng.below(7), 3 + rng.below(7));
        let (stride, pad) = (1 + rng.below(2), rng.below(2));
        let (kh, kw) = (1 + rng.below(3.min(h)), 1 + rng.below(3.min(w)));
        let x = Tensor::new(vec![n, c, h, w], (0..n * c * h * w).map(|_| rng.normal()).collect()).unwrap();
        let k = Tensor::new(vec![o, c, kh, kw], (0..o * c * kh * kw).map(|_| rng.normal()).collect()).unwrap();
        let got = conv2d(&x, &k, stride, pad).expect("conv");
        let want = reference_conv(&x, &k, stride, pad);
        assert_eq!(got.len(), want.len());
        for (a, b) in got.data().iter().zip(&want) {
            conv_err = conv_err.max((a - b).abs());
        }
    }

    let mut wilcoxon_cases = 0;
    let mut wilcoxon_mismatch = 0;
    for n in 5..=10usize {
        for trial in 0..WILCOXON_TRIALS_PER_N {
            // half the trials on a coarse grid so that ties and zeros occur
            let (a, b): (Vec<f64>, Vec<f64>) = (0..n)
                .map(|_| {
                    if trial % 2 == 0 {
                        (rng.below(6) as f64, rng.below(6) as f64)
                    } else {
                        (rng.normal(), rng.normal())
                    }
                })
                .unzip();
            let Ok(w) = wilcoxon_signed_rank(&a, &b) else { continue };
            let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            wilcoxon_cases += 1;
            if w.p_two_sided.to_bits() != enumerated_p(&diffs).to_bits() {
                wilcoxon_mismatch += 1;
            }
        }
    }

    let mut pdelu = act_init(ActivationKind::Pdelu, 1.0, 1, &mut Rng::new(0)).unwrap();
    pdelu.fixed.iter_mut().find(|p| p.name == "t").expect("t").values[0] = PDELU_T;
    let elu = act_init(ActivationKind::Elu, 1.0, 1, &mut Rng::new(0)).unwrap();
    let grid = Tensor::new(vec![1, 1, 10_001], (0..10_001).map(|i| -5.0 + i as f64 * 1e-3).collect()).unwrap();
    let (yp, ye) = (act_forward(&pdelu, &grid).unwrap(), act_forward(&elu, &grid).unwrap());
    let pdelu_err = yp.data().iter().zip(ye.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let pass = conv_err < CONV_TOLERANCE && wilcoxon_mismatch == 0 && wilcoxon_cases > 0 && pdelu_err < PDELU_TOLERANCE;
    outcome(
        pass,
        format!(
            "conv max abs error {conv_err:.1e} over {CONV_INSTANCES} instances (< {CONV_TOLERANCE:e}); \
             signed-rank p bit-exact in {}/{wilcoxon_cases} cases with n <= 10; \
             PDELU(t = 1 - 1e-6) vs ELU max abs difference {pdelu_err:.1e} on [-5, 5] (< {PDELU_TOLERANCE:e})",
            wilcoxon_cases - wilcoxon_mismatch
        ),
    )
}

fn desk_config() -> ExperimentConfig {
    ExperimentConfig::from_file(&fixtures().join("desk.cfg")).expect("desk config parses")
}

/// One full desk run per seed, reports written under `dir/seed-<s>`.
fn desk_runs(dir: &Path) -> Vec<ExperimentReport> {
    let jobs = std::env::var("STOCHACT_JOBS").ok().and_then(|j| j.parse().ok()).unwrap_or(1);
    DESK_SEEDS
        .iter()
        .map(|&seed| {
            let mut cfg = desk_config();
            cfg.seed = seed;
            let start = Instant::now();
            let report = run_experiment(&cfg, &RunOptions { jobs, progress: None }).expect("desk experiment");
            emit_report(&report, &dir.join(format!("seed-{seed}"))).expect("write report");
            eprintln!("  seed {seed} finished in {:.0} s", start.elapsed().as_secs_f64());
            report
        })
        .collect()
}

fn ensembles_beat_single(reports: &[ExperimentReport]) -> Outcome {
    let datasets = reports[0].datasets.clone();
    let mean = |method: &str, dataset: &str| -> f64 {
        reports.iter().map(|r| r.accuracy(method, dataset).expect("result")).sum::<f64>() / reports.len() as f64
    };
    let mut lines = Vec::new();
    let (mut all_a, mut wins_b) = (true, 0);
    for d in &datasets {
        let (s, f, st) = (mean(SINGLE, d), mean(FUSED_RELU, d), mean(STOCHASTIC, d));
        all_a &= st >= s;
        wins_b += usize::from(st >= f);
        lines.push(format!("{d}: {SINGLE} {s:.2}, {FUSED_RELU} {f:.2}, {STOCHASTIC} {st:.2}"));
    }
    let (mut sto, mut fus) = (Vec::new(), Vec::new());
    for r in reports {
        for d in &datasets {
            sto.push(r.accuracy(STOCHASTIC, d).unwrap());
            fus.push(r.accuracy(FUSED_RELU, d).unwrap());
        }
    }
    let p = match wilcoxon_signed_rank(&sto, &fus) {
        Ok(w) => format!("two-sided p = {:.4}, one-sided p = {:.4}", w.p_two_sided, w.p_greater),
        Err(e) => format!("not computable ({e})"),
    };
    let pass = all_a && wins_b >= 2;
    outcome(
        pass,
        format!(
            "mean accuracy over {} seeds [{}]; (a) {STOCHASTIC} >= {SINGLE} on all datasets: {}; \
             (b) {STOCHASTIC} >= {FUSED_RELU} on {wins_b}/{} datasets; signed-rank over {} pairs: {p}",
            reports.len(),
            lines.join("; "),
            if all_a { "yes" } else { "no" },
            datasets.len(),
            sto.len()
        ),
    )
}

fn runs_identical(a: &Path, b: &Path) -> Outcome {
    let mut compared = 0;
    let mut differing = Vec::new();
    for seed in DESK_SEEDS {
        let (da, db) = (a.join(format!("seed-{seed}")), b.join(format!("seed-{seed}")));
        let mut names: Vec<_> = fs::read_dir(&da).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            compared += 1;
            if fs::read(da.join(&name)).ok() != fs::read(db.join(&name)).ok() {
                differing.push(format!("seed-{seed}/{}", name.to_string_lossy()));
            }
        }
    }
    outcome(
        differing.is_empty() && compared > 0,
        format!(
            "{compared} report files compared across two runs{}",
            if differing.is_empty() { ", all byte-identical".to_string() } else { format!("; differing: {}", differing.join(" ")) }
        ),
    )
}

fn fusing_copies() -> Outcome {
    let train = stochact::data::synth_dataset(stochact::data::Recipe::Blobs, 300, 4, 12, 11).unwrap();
    let test = stochact::data::synth_dataset(stochact::data::Recipe::Blobs, 300, 4, 12, 12).unwrap();
    let spec = ModelSpec::default_backbone([1, 12, 12], 4);
    let cfg = TrainConfig {
        max_epochs: 5,
        learning_rate: 1e-2,
        seed: 3,
        ..TrainConfig::default()
    };
    let state = train_model(&spec, &train, &cfg).expect("train").state;
    let probs = predict(&state, test.images()).unwrap();
    let mut mismatches = 0;
    for k in FUSE_COPIES {
        for i in 0..test.len() {
            let single = probs.row(i);
            let (_, decision) = sum_rule_fuse(&vec![Tensor::vector(single.to_vec()); k]).unwrap();
            mismatches += usize::from(decision != argmax(single));
        }
    }
    outcome(
        mismatches == 0,
        format!("K in {FUSE_COPIES:?}, {} test samples each: {mismatches} decision changes", test.len()),
    )
}

fn rank_reproduction() -> Outcome {
    let text = fs::read_to_string(fixtures().join("activation_ranking.csv")).expect("fixture");
    let rows: Vec<(String, f64, usize)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let ranks = rank_by_average(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let wrong: Vec<&str> = rows
        .iter()
        .zip(&ranks)
        .filter(|(r, got)| r.2 != **got)
        .map(|(r, _)| r.0.as_str())
        .collect();
    let top: Vec<String> = {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by_key(|&i| ranks[i]);
        order.iter().take(3).map(|&i| format!("{}={}", rows[i].0, ranks[i])).collect()
    };
    outcome(
        wrong.is_empty(),
        format!(
            "{} of {} printed ranks reproduced ({}, ...){}",
            rows.len() - wrong.len(),
            rows.len(),
            top.join(", "),
            if wrong.is_empty() { String::new() } else { format!("; wrong: {}", wrong.join(" ")) }
        ),
    )
}

fn main() -> ExitCode {
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&out);
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut timed = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        eprintln!("criterion {id} took {:.1} s", start.elapsed().as_secs_f64());
        results.push((id, name, o));
    };
    timed(1, "gradient fidelity", &mut gradient_fidelity);
    timed(2, "ReLU equivalence at initialisation", &mut relu_equivalence);
    timed(3, "oracle equivalences", &mut oracle_equivalences);
    let first_dir = out.join("run-1");
    let mut first = Vec::new();
    timed(4, "ensembles beat a single network", &mut || {
        first = desk_runs(&first_dir);
        ensembles_beat_single(&first)
    });
    let second_dir = out.join("run-2");
    timed(5, "determinism", &mut || {
        desk_runs(&second_dir);
        runs_identical(&first_dir, &second_dir)
    });
    timed(6, "sum rule on identical members", &mut fusing_copies);
    timed(7, "rank reproduction", &mut rank_reproduction);

    let mut failed = 0;
    for (id, name, o) in &results {
        println!("criterion {id} ({name}): {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("reports: {}", out.display());
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    // a failing criterion is reported above; STOCHACT_STRICT=1 also fails the run
    if failed == 0 || std::env::var("STOCHACT_STRICT").map_or(true, |v| v != "1") {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
