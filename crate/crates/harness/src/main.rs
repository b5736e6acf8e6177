use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use harness::config::{parse_number, RunConfig};
use harness::data::{bar_streams, bars, blobs, model_input, Dataset};
use harness::eval::{aggregate_report, evaluate_attack, AttackSpec, SampleOutcome, ITERATION_CAP};
use harness::oracle::{bruteforce_sparse_oracle, gradcheck_oracle, mc_zeroth_order_oracle, GradcheckConfig};
use harness::presets::{build, Arch};
use harness::train::{train_minimal, TrainConfig};
use harness::{Error, Result};
use spikeattack::attack::AttackConfig;
use spikeattack::coding::{
    aggregate_events, binarize_frames, encode_direct, encode_poisson, read_events, write_events, Slicing,
};
use spikeattack::sda::SdaConfig;
use spikeattack::snn::{load_model, save_model};
use spikeattack::stbp::ResetPath;
use spikeattack::tensor::{read_tensor, write_tensor, AnyTensor};
use spikeattack::{BinaryTensor, LossKind, Surrogate, Tensor};

/// Spiking-network training, adversarial attacks and verification oracles.
#[derive(Parser)]
#[command(name = "spikeattack", version)]
struct Cli {
    /// Worker threads for sample-level parallelism.
    #[arg(long, global = true, env = "SPIKEATTACK_THREADS")]
    threads: Option<usize>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Dataset(DatasetArgs),
    /// Encode an image (.snnt) or event stream (.snne) into network input.
    Encode(EncodeArgs),
    /// Train a preset architecture.
    Train(TrainArgs),
    /// Attack correctly classified samples and report.
    Attack(AttackArgs),
    /// Aggregate a report from per-sample records.
    Eval(EvalArgs),
    /// Compare backpropagated gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Independent reference computations.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Blobs,
    Bars,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long, value_enum)]
    kind: DatasetKind,
    #[arg(long, default_value_t = 600)]
    count: usize,
    /// Peak bump intensity above the background (blobs).
    #[arg(long, default_value_t = 0.08)]
    contrast: f64,
    /// Frames per sample (bars).
    #[arg(long, default_value_t = 10)]
    timesteps: usize,
    /// Also write each raw event stream here (bars).
    #[arg(long)]
    events_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Coding {
    Direct,
    Poisson,
    Frames,
    Binary,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    coding: Coding,
    #[arg(long)]
    timesteps: usize,
    /// Equal-count instead of equal-duration event slicing.
    #[arg(long)]
    equal_count: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    arch: Arch,
    #[arg(long)]
    data: PathBuf,
    /// Trailing samples held out for testing.
    #[arg(long, default_value_t = 200)]
    test_split: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Training surrogate, e.g. `atan:alpha=2`.
    #[arg(long)]
    sg: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fgsm,
    Pgd,
    Sda,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Attack only the trailing N samples, i.e. the split `train` holds out.
    #[arg(long)]
    test_split: Option<usize>,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// ℓ∞ radius, e.g. `8/255`.
    #[arg(long)]
    eps: Option<String>,
    /// PGD step size (default eps/4).
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    /// `ce` or `cw`.
    #[arg(long)]
    loss: Option<String>,
    /// Attack surrogate, e.g. `pdsg`, `pdsg:b=0`, `atan:alpha=2`.
    #[arg(long)]
    sg: Option<String>,
    /// Apply one perturbation to all timesteps (direct-coded inputs).
    #[arg(long)]
    time_shared: Option<bool>,
    /// Seeded random start inside the ε-ball.
    #[arg(long)]
    random_start: bool,
    /// Return the best PGD iterate instead of the last one.
    #[arg(long)]
    track_best: bool,
    #[arg(long)]
    k_init: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Skip the reduction stage of the sparse attack.
    #[arg(long)]
    no_reduce: bool,
    /// Number of correctly classified samples to attack.
    #[arg(long)]
    samples: Option<usize>,
    /// Report ASR restricted to ℓ0 below each bound.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<usize>>,
    /// Per-sample records, one JSON object per line.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value_t = ITERATION_CAP)]
    cap: usize,
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Model file; a freshly initialized conv-blobs net when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Dataset to take the input from; a random input when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, default_value_t = 0.1)]
    temp: f64,
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    /// Coordinates to check; all when 0.
    #[arg(long, default_value_t = 256)]
    coords: usize,
    /// Flip the sign of the reset path to confirm the check notices.
    #[arg(long)]
    mutate: bool,
    /// Plain central differences instead of Richardson extrapolation.
    #[arg(long)]
    plain: bool,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Monte-Carlo zeroth-order estimate vs. the closed-form surrogate.
    Mc {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        v_th: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Offsets from V_th in units of σ.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "-2,-1,-0.5,0,0.5,1,2"
        )]
        offsets: Vec<f64>,
    },
    /// Exhaustive minimal flip count for one binary sample.
    Bruteforce {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 3)]
        max_flips: usize,
    },
}

fn surrogate(spec: Option<&String>, default: Surrogate) -> Result<Surrogate> {
    spec.map_or(Ok(default), |s| Ok(s.parse::<Surrogate>()?))
}

fn number(flag: Option<&String>, file: Option<&harness::config::Number>) -> Result<Option<f64>> {
    match (flag, file) {
        (Some(s), _) => parse_number(s).map(Some),
        (None, Some(n)) => n.value().map(Some),
        (None, None) => Ok(None),
    }
}

fn load_dataset_sample(dir: &PathBuf, index: usize) -> Result<(Tensor<f64>, usize)> {
    let data = Dataset::load(dir)?;
    if index >= data.len() {
        return Err(Error::Config(format!(
            "sample {index} out of range ({} samples)",
            data.len()
        )));
    }
    Ok((data.inputs[index].clone(), data.labels[index]))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Dataset(a) => {
            let data = match a.kind {
                DatasetKind::Blobs => blobs(a.count, a.contrast, seed),
                DatasetKind::Bars => {
                    if let Some(dir) = &a.events_dir {
                        std::fs::create_dir_all(dir)?;
                        for (i, (stream, _)) in bar_streams(a.count, seed).iter().enumerate() {
                            write_events(stream, dir.join(format!("{i:05}.snne")))?;
                        }
                    }
                    bars(a.count, a.timesteps, seed)?
                }
            };
            data.save(&a.out)?;
            println!("wrote {} samples to {}", data.len(), a.out.display());
        }
        Command::Encode(a) => {
            let out = if a.input.extension().is_some_and(|e| e == "snne") {
                let stream = read_events(&a.input)?;
                let slicing = if a.equal_count {
                    Slicing::EqualCount
                } else {
                    Slicing::EqualDuration
                };
                let frames = aggregate_events::<f32>(&stream, a.timesteps, slicing)?;
                match a.coding {
                    Coding::Frames => AnyTensor::F32(frames),
                    Coding::Binary => AnyTensor::Binary(binarize_frames(&frames)),
                    _ => return Err(Error::Config("event streams encode to `frames` or `binary`".into())),
                }
            } else {
                let img: Tensor<f32> = read_tensor(&a.input)?.into_float();
                match a.coding {
                    Coding::Direct => AnyTensor::F32(encode_direct(&img, a.timesteps)?),
                    Coding::Poisson => {
                        let spikes = encode_poisson(&img, a.timesteps, seed)?;
                        AnyTensor::Binary(BinaryTensor::from_tensor(&spikes)?)
                    }
                    _ => return Err(Error::Config("images encode to `direct` or `poisson`".into())),
                }
            };
            write_tensor(&a.out, &out)?;
            println!("wrote {:?} tensor to {}", out.shape(), a.out.display());
        }
        Command::Train(a) => {
            let defaults = TrainConfig::default();
            let t = &cfg.train;
            let tc = TrainConfig {
                epochs: a.epochs.or(t.epochs).unwrap_or(defaults.epochs),
                lr: a.lr.or(t.lr).unwrap_or(defaults.lr),
                momentum: a.momentum.or(t.momentum).unwrap_or(defaults.momentum),
                batch_size: a.batch_size.or(t.batch_size).unwrap_or(defaults.batch_size),
                seed,
                surrogate: surrogate(a.sg.as_ref().or(t.surrogate.as_ref()), defaults.surrogate)?,
            };
            let (train, test) = Dataset::load(&a.data)?.split(a.test_split);
            let out = train_minimal(a.arch, &train, &test, &tc)?;
            for (e, l) in out.epoch_loss.iter().enumerate() {
                println!("epoch {:>3}  loss {l:.5}", e + 1);
            }
            println!(
                "test accuracy {:.2}% on {} samples",
                100.0 * out.test_accuracy,
                test.len()
            );
            save_model(&out.model, &a.out)?;
        }
        Command::Attack(a) => {
            let m = load_model::<f64>(&a.model)?;
            let mut data = Dataset::load(&a.data)?;
            if let Some(n) = a.test_split {
                data = data.split(n).1;
            }
            let s = &cfg.attack;
            let spec = match a.method {
                MethodArg::Fgsm | MethodArg::Pgd => {
                    let eps = number(a.eps.as_ref(), s.eps.as_ref())?.unwrap_or(8.0 / 255.0);
                    let mut ac = AttackConfig::new(eps);
                    if let Some(alpha) = number(a.alpha.as_ref(), s.alpha.as_ref())? {
                        ac.alpha = alpha;
                    }
                    ac.steps = a.steps.or(s.steps).unwrap_or(ac.steps);
                    if let Some(l) = a.loss.as_ref().or(s.loss.as_ref()) {
                        ac.loss = l.parse::<LossKind>()?;
                    }
                    ac.surrogate = surrogate(a.sg.as_ref().or(s.surrogate.as_ref()), ac.surrogate)?;
                    let direct = matches!(m.coding(), spikeattack::InputCoding::Direct);
                    ac.time_shared = a.time_shared.or(s.time_shared).unwrap_or(direct);
                    ac.track_best = a.track_best || s.track_best == Some(true);
                    if a.random_start || s.random_start == Some(true) {
                        ac.random_start = Some(seed);
                    }
                    if matches!(a.method, MethodArg::Fgsm) {
                        AttackSpec::Fgsm(ac)
                    } else {
                        AttackSpec::Pgd(ac)
                    }
                }
                MethodArg::Sda => {
                    let d = SdaConfig::default();
                    let sd = &cfg.sda;
                    AttackSpec::Sda(SdaConfig {
                        k_init: a.k_init.or(sd.k_init).unwrap_or(d.k_init),
                        max_iters: a.max_iters.or(sd.max_iters).unwrap_or(d.max_iters),
                        surrogate: surrogate(a.sg.as_ref().or(sd.surrogate.as_ref()), d.surrogate)?,
                        reduce: !a.no_reduce && sd.reduce.unwrap_or(true),
                        parallel: d.parallel,
                    })
                }
            };
            let samples = a.samples.or(s.samples).unwrap_or(100);
            let thresholds = a.thresholds.or_else(|| s.thresholds.clone()).unwrap_or_default();
            let ev = evaluate_attack(&m, &data, &spec, samples, &thresholds, seed)?;
            if let Some(path) = &a.records {
                let mut w = BufWriter::new(File::create(path)?);
                for o in &ev.outcomes {
                    writeln!(w, "{}", serde_json::to_string(o)?)?;
                }
                w.flush()?;
            }
            if let Some(path) = &a.report {
                std::fs::write(path, serde_json::to_string_pretty(&ev.report)?)?;
            }
            println!("{:<22} {}", "method", spec.method().name());
            println!("{:<22} {}", "correct available", ev.correct_available);
            println!("{}", ev.report);
            println!("{:<22} {:.4}", "seconds per sample", ev.seconds_per_sample);
        }
        Command::Eval(a) => {
            let outcomes: Vec<SampleOutcome> = BufReader::new(File::open(&a.records)?)
                .lines()
                .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
                .map(|l| Ok(serde_json::from_str(&l?)?))
                .collect::<Result<_>>()?;
            println!("{}", aggregate_report(&outcomes, a.cap, &a.thresholds));
        }
        Command::Gradcheck(a) => {
            let m = match &a.model {
                Some(p) => load_model::<f64>(p)?,
                None => build(Arch::ConvBlobs, seed),
            };
            let (x, y) = match &a.data {
                Some(dir) => {
                    let (sample, y) = load_dataset_sample(dir, a.index)?;
                    (model_input(&m, &sample, seed)?, y)
                }
                None => {
                    let img = blobs(1, 0.1, seed).inputs.remove(0);
                    (model_input(&m, &img, seed)?, 0)
                }
            };
            let gc = GradcheckConfig {
                temp: a.temp,
                h: a.h,
                coords: (a.coords > 0).then_some(a.coords),
                reset_path: if a.mutate { ResetPath::Inverted } else { ResetPath::Full },
                seed,
                richardson: !a.plain,
            };
            let r = gradcheck_oracle(&m, &x, y, &gc)?;
            println!(
                "max relative error {:.3e} at coordinate {} over {} coordinates (gradient scale {:.3e})",
                r.max_rel_err, r.worst_coord, r.coords_checked, r.grad_scale
            );
        }
        Command::Oracle(OracleCommand::Mc {
            sigma,
            v_th,
            samples,
            offsets,
        }) => {
            let us: Vec<f64> = offsets.iter().map(|o| v_th + o * sigma).collect();
            println!(
                "{:>10} {:>12} {:>12} {:>12} {:>8}",
                "u", "estimate", "stderr", "closed", "z"
            );
            for p in mc_zeroth_order_oracle(&us, v_th, sigma, samples, seed)? {
                println!(
                    "{:>10.4} {:>12.6} {:>12.2e} {:>12.6} {:>8.2}",
                    p.u,
                    p.estimate,
                    p.stderr,
                    p.closed_form,
                    p.z_score()
                );
            }
        }
        Command::Oracle(OracleCommand::Bruteforce {
            model,
            data,
            index,
            max_flips,
        }) => {
            let m = load_model::<f64>(&model)?;
            let (sample, y) = load_dataset_sample(&data, index)?;
            let x = BinaryTensor::from_tensor(&model_input(&m, &sample, seed)?)?;
            match bruteforce_sparse_oracle(&m, &x, y, max_flips)? {
                Some(k) => println!("minimal adversarial flips: {k}"),
                None => println!("no adversarial flip set of size <= {max_flips}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
