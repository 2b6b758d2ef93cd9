use rayon::prelude::*;

use super::config::{ExperimentConfig, LoadedDataset};
use super::method::MemberPlan;
use super::report::{ExperimentReport, FoldResult, MemberResult};
use crate::builder::gen_stochastic_model;
use crate::ensemble::{accuracy, decisions, fuse_batch};
use crate::error::{Error, Result};
use crate::model::{predict, ModelSpec};
use crate::rng::Rng;
use crate::seed_path;
use crate::tensor::Tensor;
use crate::trainer::{train_model, TrainConfig};

/// Seed of one ensemble member; any single member can be rebuilt from it.
pub fn member_seed(master: u64, dataset: &str, method: &str, fold: usize, member: usize) -> u64 {
    seed_path!(master, dataset, method, fold, member)
}

/// Architecture of a member: fixed plans fill every slot, stochastic plans
/// draw each slot from a stream derived from the member seed.
pub fn member_spec(backbone: &ModelSpec, plan: &MemberPlan, seed: u64) -> Result<ModelSpec> {
    match plan {
        MemberPlan::Fixed(id) => Ok(backbone.with_all_slots(*id)),
        MemberPlan::Stochastic(set) => gen_stochastic_model(backbone, set, &mut Rng::new(seed_path!(seed, "arch"))),
    }
}

/// Slot activations joined by `/`, e.g. `relu/elu/melu_k8`.
pub fn architecture_string(spec: &ModelSpec) -> String {
    spec.slot_assignments()
        .iter()
        .map(|(_, id)| id.to_string())
        .collect::<Vec<_>>()
        .join("/")
}

/// What a progress callback learns after each member finishes.
#[derive(Debug, Clone)]
pub struct MemberDone<'a> {
    pub dataset: &'a str,
    pub method: &'a str,
    pub fold: usize,
    pub member: usize,
    pub accuracy: f64,
    pub finished: usize,
    pub total: usize,
}

pub struct RunOptions<'a> {
    /// Worker threads for member training; 0 uses every core.
    pub jobs: usize,
    pub progress: Option<&'a (dyn Fn(&MemberDone<'_>) + Sync)>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self { jobs: 1, progress: None }
    }
}

struct Task {
    dataset: usize,
    method: usize,
    fold: usize,
    member: usize,
}

/// Trains and evaluates every member of every method on every fold of every
/// dataset, fuses each ensemble by the sum rule and assembles the report.
///
/// Members may train concurrently; results are reduced in a fixed order so
/// the report depends only on the configuration.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions<'_>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let datasets: Vec<LoadedDataset> = cfg
        .datasets
        .iter()
        .map(|d| d.load(seed_path!(cfg.seed, "folds", d.name.as_str())))
        .collect::<Result<_>>()?;
    for d in &datasets {
        audit_split(d)?;
    }

    let mut tasks = Vec::new();
    for (di, d) in datasets.iter().enumerate() {
        for (mi, m) in cfg.methods.iter().enumerate() {
            for fold in 0..d.split.k() {
                for member in 0..m.members.len() {
                    tasks.push(Task {
                        dataset: di,
                        method: mi,
                        fold,
                        member,
                    });
                }
            }
        }
    }
    let finished = std::sync::atomic::AtomicUsize::new(0);
    let run_task = |t: &Task| -> Result<(Tensor, MemberResult)> {
        let d = &datasets[t.dataset];
        let m = &cfg.methods[t.method];
        let seed = member_seed(cfg.seed, &d.name, &m.name, t.fold, t.member);
        let wrap = |e: Error| Error::MemberFailed {
            dataset: d.name.clone(),
            method: m.name.clone(),
            fold: t.fold,
            member: t.member,
            seed,
            source: Box::new(e),
        };
        let (probs, result) = train_member(cfg, d, &m.members[t.member], t.fold, seed).map_err(wrap)?;
        let done = finished.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        if let Some(cb) = opts.progress {
            cb(&MemberDone {
                dataset: &d.name,
                method: &m.name,
                fold: t.fold,
                member: t.member,
                accuracy: result.correct as f64 / result.total as f64,
                finished: done,
                total: tasks.len(),
            });
        }
        Ok((
            probs,
            MemberResult {
                dataset: d.name.clone(),
                method: m.name.clone(),
                member: t.member,
                seed,
                ..result
            },
        ))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<Result<(Tensor, MemberResult)>> = pool.install(|| tasks.par_iter().map(run_task).collect());

    let mut outputs = outputs.into_iter();
    let mut folds = Vec::new();
    let mut members = Vec::new();
    for d in &datasets {
        for m in &cfg.methods {
            for fold in 0..d.split.k() {
                let mut probs = Vec::with_capacity(m.members.len());
                for _ in 0..m.members.len() {
                    let (p, r) = outputs.next().expect("one output per task")?;
                    probs.push(p);
                    members.push(r);
                }
                let fused = fuse_batch(&probs)?;
                let labels: Vec<usize> = d.split.test(fold).iter().map(|&i| d.data.labels()[i]).collect();
                let correct = decisions(&fused).iter().zip(&labels).filter(|(a, b)| a == b).count();
                folds.push(FoldResult {
                    dataset: d.name.clone(),
                    method: m.name.clone(),
                    fold,
                    correct,
                    total: labels.len(),
                });
            }
        }
    }
    let mut report = ExperimentReport::new(
        cfg.seed,
        cfg.datasets.iter().map(|d| d.name.clone()).collect(),
        cfg.methods.iter().map(|m| m.name.clone()).collect(),
        folds,
        members,
    );
    report.config_text = Some(cfg.source_text.clone());
    Ok(report)
}

/// Fails unless every fold's training and test index sets are disjoint and in range.
pub fn audit_split(d: &LoadedDataset) -> Result<()> {
    let n = d.data.len();
    for fold in 0..d.split.k() {
        let mut in_test = vec![false; n];
        for &i in d.split.test(fold) {
            if i >= n {
                return Err(Error::contract(format!("dataset '{}' fold {fold}: test index {i} out of range", d.name)));
            }
            in_test[i] = true;
        }
        if d.split.test(fold).is_empty() {
            return Err(Error::InsufficientData(format!("dataset '{}' fold {fold} has no test samples", d.name)));
        }
        if let Some(i) = d.split.train(fold).into_iter().find(|&i| i >= n || in_test[i]) {
            return Err(Error::contract(format!(
                "dataset '{}' fold {fold}: sample {i} is in both training and test sets",
                d.name
            )));
        }
    }
    Ok(())
}

fn train_member(
    cfg: &ExperimentConfig,
    d: &LoadedDataset,
    plan: &MemberPlan,
    fold: usize,
    seed: u64,
) -> Result<(Tensor, MemberResult)> {
    let backbone = cfg.backbone(d.data.sample_shape(), d.data.classes());
    let spec = member_spec(&backbone, plan, seed)?;
    let train = d.data.subset(&d.split.train(fold));
    let test = d.data.subset(d.split.test(fold));
    let train_cfg = TrainConfig { seed, ..cfg.train };
    let outcome = train_model(&spec, &train, &train_cfg)?;
    let probs = predict(&outcome.state, test.images())?;
    let total = test.len();
    let correct = (accuracy(&decisions(&probs), test.labels())? * total as f64).round() as usize;
    Ok((
        probs,
        MemberResult {
            dataset: String::new(),
            method: String::new(),
            fold,
            member: 0,
            seed,
            architecture: architecture_string(&spec),
            correct,
            total,
        },
    ))
}
