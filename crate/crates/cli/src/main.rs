use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use stochact::activations::suite::gradient_suite;
use stochact::data::{save_idx, synth_dataset_with_noise, Recipe};
use stochact::ensemble::{accuracy, decisions};
use stochact::experiment::{
    emit_report, member_spec, parse_method, read_report, run_experiment, DatasetSpec, ExperimentConfig, MemberDone,
    RunOptions,
};
use stochact::model::{list_activation_slots, load_model, predict, save_model, ModelSpec};
use stochact::trainer::{train_model, write_loss_csv, AugmentConfig, TrainConfig};

#[derive(Parser)]
#[command(name = "stochact", version, about = "Learnable activations, stochastic activation ensembles and their evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check analytic activation gradients against finite differences.
    Gradcheck {
        /// Random inputs per activation variant.
        #[arg(long, default_value_t = 1000)]
        points: usize,
        /// Random parameter configurations per learnable variant.
        #[arg(long, default_value_t = 1000)]
        configs: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a single model and save it.
    Train(TrainArgs),
    /// Run a full experiment from a configuration file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed of the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        quiet: bool,
    },
    /// Re-render the tables of a finished experiment from its raw results.
    Report {
        /// Directory holding raw.csv (and optionally members.csv, manifest.txt).
        results: PathBuf,
        /// Output directory; defaults to the results directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset as an IDX image/label pair.
    Synth {
        #[arg(long)]
        recipe: Recipe,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix; writes <prefix>-images.idx and <prefix>-labels.idx.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the architecture and activation slots of a saved model.
    Inspect { model: PathBuf },
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset descriptor, as on a `dataset =` configuration line,
    /// e.g. "blobs synth recipe=blobs n=600 test=600 classes=4 size=12".
    #[arg(long)]
    dataset: String,
    /// Activation choice: an activation id such as relu or melu_k8_255, or S<set>[(255)].
    #[arg(long, default_value = "relu")]
    activation: String,
    /// Model description file; defaults to the built-in backbone.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    batch_size: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long)]
    no_augment: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for model.sact, model.txt and loss.csv.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gradcheck {
            points,
            configs,
            tolerance,
            seed,
        } => gradcheck(points, configs, tolerance, seed),
        Command::Train(args) => train(args).map(|_| ExitCode::SUCCESS),
        Command::Experiment {
            config,
            seed,
            out,
            jobs,
            quiet,
        } => experiment(&config, seed, &out, jobs, quiet).map(|_| ExitCode::SUCCESS),
        Command::Report { results, out } => {
            let report = read_report(&results)?;
            let out = out.unwrap_or(results);
            emit_report(&report, &out)?;
            print!("{}", fs::read_to_string(out.join(stochact::experiment::REPORT_FILE))?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            recipe,
            n,
            classes,
            size,
            noise,
            seed,
            out,
        } => {
            let ds = synth_dataset_with_noise(recipe, n, classes, size, seed, noise)?;
            save_idx(&ds, &out)?;
            println!("wrote {n} {recipe} samples of {size}x{size} to {}-*.idx", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect { model } => {
            let state = load_model(&model)?;
            print!("{}", state.spec().to_text());
            println!("# parameters: {}", state.param_count());
            println!("# activation slots: {:?}", list_activation_slots(state.spec()));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn gradcheck(points: usize, configs: usize, tolerance: f64, seed: u64) -> Result<ExitCode> {
    let rows = gradient_suite(points, configs, seed)?;
    println!(
        "{:<18} {:>8} {:>9} {:>12} {:>9} {:>12}  result",
        "activation", "maxInput", "inputs", "max rel err", "params", "max rel err"
    );
    let mut failed = 0;
    for r in &rows {
        let (pc, pe) = match &r.params {
            Some(p) => (p.checked.to_string(), format!("{:.3e}", p.max_rel_error)),
            None => ("-".into(), "-".into()),
        };
        let ok = r.passes(tolerance);
        failed += usize::from(!ok);
        println!(
            "{:<18} {:>8} {:>9} {:>12.3e} {:>9} {:>12}  {}",
            r.kind.name(),
            r.max_input,
            r.input.checked,
            r.input.max_rel_error,
            pc,
            pe,
            if ok { "ok" } else { "FAIL" }
        );
    }
    println!("{} of {} variants within {tolerance:e}", rows.len() - failed, rows.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn train(a: TrainArgs) -> Result<()> {
    let spec = DatasetSpec::parse(&a.dataset, Path::new(".")).context("parsing --dataset")?;
    let loaded = spec.load(a.seed)?;
    let method = parse_method(&a.activation)?;
    if method.members.len() != 1 {
        bail!("--activation must name a single model, '{}' has {} members", a.activation, method.members.len());
    }
    let [c, h, w] = loaded.data.sample_shape();
    let backbone = match &a.model {
        Some(p) => ModelSpec::parse(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => ModelSpec::default_backbone([c, h, w], loaded.data.classes()),
    };
    let model_spec = member_spec(&backbone, &method.members[0], a.seed)?;
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        learning_rate: a.learning_rate,
        momentum: a.momentum,
        seed: a.seed,
        augmentation: (!a.no_augment).then(AugmentConfig::default),
    };
    let train_set = loaded.data.subset(&loaded.split.train(0));
    let outcome = train_model(&model_spec, &train_set, &cfg)?;

    fs::create_dir_all(&a.out)?;
    save_model(&outcome.state, &a.out.join("model.sact"))?;
    fs::write(a.out.join("model.txt"), model_spec.to_text())?;
    write_loss_csv(&outcome.curve, fs::File::create(a.out.join("loss.csv"))?)?;
    if let Some(last) = outcome.curve.last() {
        println!("epoch {}: mean loss {:.4}, train accuracy {:.4}", last.epoch + 1, last.mean_loss, last.train_acc);
    }
    let test = loaded.data.subset(loaded.split.test(0));
    let acc = accuracy(&decisions(&predict(&outcome.state, test.images())?), test.labels())?;
    println!("held-out accuracy {acc:.4} on {} samples", test.len());
    println!("saved to {}", a.out.display());
    Ok(())
}

fn experiment(config: &Path, seed: Option<u64>, out: &Path, jobs: usize, quiet: bool) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let progress = |d: &MemberDone<'_>| {
        let mut err = std::io::stderr().lock();
        let _ = writeln!(
            err,
            "[{}/{}] {} {} fold {} member {}: accuracy {:.4}",
            d.finished, d.total, d.dataset, d.method, d.fold, d.member, d.accuracy
        );
    };
    let opts = RunOptions {
        jobs,
        progress: (!quiet).then_some(&progress as &(dyn Fn(&MemberDone<'_>) + Sync)),
    };
    let report = run_experiment(&cfg, &opts)?;
    emit_report(&report, out)?;
    print!("{}", fs::read_to_string(out.join(stochact::experiment::REPORT_FILE))?);
    Ok(())
}
