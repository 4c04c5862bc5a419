use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sonn_core::config::KvConfig;
use sonn_core::gradcheck;
use sonn_core::model::{complexity, NetworkConfig};
use sonn_core::signal::{make_frames, normalize_frame, read_recording, Dataset, Severity};
use sonn_core::synthgen::{synthesize, FaultKind, SynthDatasetSpec};
use sonn_core::train::{cross_validate, fold_split, test_report, train_fold_run, TrainConfig};
use sonn_core::{Frame, Model};

#[derive(Parser)]
#[command(name = "sonn-vibe", version, about = "Bearing fault severity classification with 1D Self-ONNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a recording (IMS ASCII or CSV) and summarize its frames
    Ingest(IngestArgs),
    /// Generate a synthetic recording, or a whole labeled dataset with --data-dir
    Synth(SynthArgs),
    /// Cross-validate a network and save the first fold's first model
    Train(TrainArgs),
    /// Score a saved model on one fold's test split
    Eval(EvalArgs),
    /// Predict the class of every frame in a recording
    Classify(ClassifyArgs),
    /// Report parameter and MAC counts of a configuration
    Complexity(ComplexityArgs),
    /// Compare analytic gradients with central finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// key = value configuration file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Taylor order of every operational layer
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    frame_len: Option<usize>,
    /// Machine-readable CSV instead of text tables
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Clone)]
struct Protocol {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Labeled data as <dir>/<class>/<files>; synthetic data when absent
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Recording columns used as the two channels
    #[arg(long, value_parser = parse_columns, default_value = "0,1")]
    columns: (usize, usize),
    #[arg(long)]
    kind: Option<FaultKind>,
}

#[derive(Args)]
struct IngestArgs {
    file: PathBuf,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_columns, default_value = "0,1")]
    columns: (usize, usize),
    /// Write the two selected channels as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    class: Option<Severity>,
    #[arg(long)]
    kind: Option<FaultKind>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Recording length in seconds
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write files_per_class recordings per class under this directory
    #[arg(long, conflicts_with_all = ["class", "out"])]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    protocol: Protocol,
    /// Parallel (fold, run) trainings; results do not depend on it
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Save the fold 0, run 0 model here
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the per-run CSV report here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-epoch training logs of every run here
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    protocol: Protocol,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Evaluate on every frame instead of one fold's test split
    #[arg(long)]
    all: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    file: PathBuf,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_parser = parse_columns, default_value = "0,1")]
    columns: (usize, usize),
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ComplexityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random instances per layer type
    #[arg(long, default_value_t = 100)]
    instances: usize,
}

/// Failure with the process exit code it maps to.
enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn data(e: impl std::fmt::Display) -> Self {
        Failure::Data(e.to_string())
    }

    fn usage(e: impl std::fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn parse_columns(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated column indices")?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad column index `{t}`"));
    Ok((parse(a)?, parse(b)?))
}

/// Config file entries with command-line overrides applied on top.
fn settings(common: &Common, protocol: Option<&Protocol>) -> Result<KvConfig, Failure> {
    let mut kv = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            KvConfig::parse(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
        }
        None => KvConfig::default(),
    };
    if let Some(q) = common.q {
        kv.set("q", q);
    }
    if let Some(n) = common.frame_len {
        kv.set("frame_len", n);
    }
    if let Some(p) = protocol {
        if let Some(v) = p.seed {
            kv.set("seed", v);
        }
        if let Some(v) = p.folds {
            kv.set("folds", v);
        }
        if let Some(v) = p.runs {
            kv.set("runs", v);
        }
        if let Some(v) = p.lr {
            kv.set("lr", v);
        }
        if let Some(v) = p.epochs {
            kv.set("epochs", v);
        }
        if let Some(v) = p.kind {
            kv.set("kind", v.name());
        }
    }
    Ok(kv)
}

/// With layers given explicitly, a `--q` flag still applies to all of them.
fn network(kv: &KvConfig, common: &Common) -> Result<NetworkConfig, Failure> {
    let mut net = NetworkConfig::from_kv(kv).map_err(Failure::usage)?;
    if let Some(q) = common.q {
        net.set_order(q);
        net.validate().map_err(Failure::usage)?;
    }
    Ok(net)
}

fn dataset(kv: &KvConfig, protocol: &Protocol, net: &NetworkConfig) -> Result<Dataset, Failure> {
    match &protocol.data_dir {
        Some(dir) => Dataset::load_dir(dir, protocol.columns, net.frame_len).map_err(Failure::data),
        None => {
            let mut spec = SynthDatasetSpec::from_kv(kv).map_err(Failure::usage)?;
            spec.frame_len = net.frame_len;
            spec.build().map_err(Failure::data)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::data(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn ingest(a: &IngestArgs) -> Outcome {
    let kv = settings(&a.common, None)?;
    let frame_len = kv
        .get_parsed::<usize>("frame_len")
        .map_err(Failure::usage)?
        .unwrap_or(sonn_core::signal::DEFAULT_FRAME_LEN);
    let rec = read_recording(&a.file, a.columns).map_err(Failure::data)?;
    let frames = make_frames(&rec, frame_len).map_err(Failure::usage)?;
    if let Some(path) = &a.out {
        emit(&rec.to_csv(), Some(path))?;
    }
    let mut text = String::new();
    if a.common.csv {
        text.push_str("channel,samples,frames,min,max,mean\n");
    } else {
        let _ = writeln!(text, "source      {}", rec.source_id);
        let _ = writeln!(text, "sample rate {} Hz", rec.sample_rate);
        let _ = writeln!(text, "frames      {} of {frame_len} samples", frames.len());
    }
    for ch in &rec.channels {
        let n = ch.samples.len() as f64;
        let min = ch.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ch.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = ch.samples.iter().sum::<f64>() / n;
        // adding zero turns a -0 read from the file into 0
        let (min, max, mean) = (min + 0.0, max + 0.0, mean + 0.0);
        if a.common.csv {
            let _ = writeln!(text, "{},{},{},{min},{max},{mean}", ch.name, ch.samples.len(), frames.len());
        } else {
            let _ = writeln!(
                text,
                "{:<6} {:>8} samples  min {min:>10.4}  max {max:>10.4}  mean {mean:>10.4}",
                ch.name,
                ch.samples.len()
            );
        }
    }
    emit(&text, None)
}

fn synth(a: &SynthArgs) -> Outcome {
    let mut kv = settings(&a.common, None)?;
    if let Some(k) = a.kind {
        kv.set("kind", k.name());
    }
    let spec = SynthDatasetSpec::from_kv(&kv).map_err(Failure::usage)?;
    if let Some(dir) = &a.data_dir {
        let duration = (spec.frames_per_file * spec.frame_len) as f64 / spec.sample_rate;
        for class in Severity::ALL {
            let sub = dir.join(class.name());
            fs::create_dir_all(&sub).map_err(|e| Failure::data(format!("{}: {e}", sub.display())))?;
            for file in 0..spec.files_per_class {
                let rec = synthesize(
                    &spec.geometry,
                    spec.kind,
                    class,
                    &spec.profile,
                    duration,
                    spec.sample_rate,
                    spec.file_seed(class, file),
                )
                .map_err(Failure::usage)?;
                emit(&rec.to_csv(), Some(&sub.join(format!("{file:03}.csv"))))?;
            }
        }
        eprintln!("wrote {} recordings per class to {}", spec.files_per_class, dir.display());
        return Ok(());
    }
    let class = a.class.ok_or_else(|| Failure::usage("--class is required unless --data-dir is given"))?;
    let rec = synthesize(
        &spec.geometry,
        spec.kind,
        class,
        &spec.profile,
        a.duration,
        spec.sample_rate,
        a.seed,
    )
    .map_err(Failure::usage)?;
    emit(&rec.to_csv(), a.out.as_deref())
}

fn train(a: &TrainArgs) -> Outcome {
    if a.jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    let kv = settings(&a.common, Some(&a.protocol))?;
    let net = network(&kv, &a.common)?;
    let cfg = TrainConfig::from_kv(&kv).map_err(Failure::usage)?;
    let ds = dataset(&kv, &a.protocol, &net)?;
    let report = cross_validate(&ds, &net, &cfg, a.jobs).map_err(Failure::data)?;

    if let Some(path) = &a.model {
        // retrains the cell rather than keeping 50 models alive during CV
        let (model, _) = train_fold_run(&ds, &net, &cfg, 0, 0).map_err(Failure::data)?;
        let mut file = fs::File::create(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        model.save(&mut file).map_err(Failure::data)?;
    }
    if let Some(path) = &a.log {
        let mut text = String::from("fold,run,epoch,train_loss,train_error\n");
        for f in &report.folds {
            for r in &f.runs {
                for h in &r.history {
                    let _ = writeln!(
                        text,
                        "{},{},{},{:.9},{:.6}",
                        f.fold, r.run, h.epoch, h.train_loss, h.train_error
                    );
                }
            }
        }
        emit(&text, Some(path))?;
    }
    if let Some(path) = &a.out {
        emit(&report.to_csv(), Some(path))?;
    }
    let first = &report.folds[0].runs[0].report;
    let text = if a.common.csv {
        report.to_csv()
    } else {
        format!(
            "{} Q={}  {} frames  {}-fold x {} runs\n\n{}\nfold 0, run 0 test metrics\n{}",
            net.label(),
            net.op_layers.iter().map(|l| l.order.to_string()).collect::<Vec<_>>().join("/"),
            ds.len(),
            cfg.folds,
            cfg.runs_per_fold,
            report.to_table(),
            first.to_table()
        )
    };
    emit(&text, None)
}

fn eval(a: &EvalArgs) -> Outcome {
    let kv = settings(&a.common, Some(&a.protocol))?;
    let bytes = fs::read(&a.model).map_err(|e| Failure::data(format!("{}: {e}", a.model.display())))?;
    let model = Model::from_bytes(&bytes).map_err(Failure::data)?;
    let cfg = TrainConfig::from_kv(&kv).map_err(Failure::usage)?;
    let ds = dataset(&kv, &a.protocol, model.config())?;
    let idx: Vec<usize> = if a.all {
        (0..ds.len()).collect()
    } else {
        if a.fold >= cfg.folds {
            return Err(Failure::usage(format!("--fold {} is out of range for {} folds", a.fold, cfg.folds)));
        }
        fold_split(&ds, cfg.folds, cfg.seed, a.fold).map_err(Failure::data)?.1
    };
    let frames: Vec<&Frame> = idx.iter().map(|&i| &ds.frames()[i]).collect();
    let report = test_report(&model, &frames).map_err(Failure::data)?;
    let text = if a.common.csv { report.to_csv() } else { report.to_table() };
    emit(&text, a.out.as_deref())
}

fn classify(a: &ClassifyArgs) -> Outcome {
    let bytes = fs::read(&a.model).map_err(|e| Failure::data(format!("{}: {e}", a.model.display())))?;
    let model = Model::from_bytes(&bytes).map_err(Failure::data)?;
    let frame_len = a.common.frame_len.unwrap_or(model.config().frame_len);
    if frame_len != model.config().frame_len {
        return Err(Failure::usage(format!(
            "--frame-len {frame_len} does not match the model's {}",
            model.config().frame_len
        )));
    }
    let rec = read_recording(&a.file, a.columns).map_err(Failure::data)?;
    let frames = make_frames(&rec, frame_len).map_err(Failure::usage)?;
    if frames.is_empty() {
        return Err(Failure::data(format!(
            "{}: shorter than one {frame_len}-sample frame",
            a.file.display()
        )));
    }
    let mut text = if a.common.csv {
        String::from("frame,class,score_healthy,score_early,score_moderate,score_severe\n")
    } else {
        String::new()
    };
    let mut votes = [0usize; 4];
    for (j, f) in frames.iter().enumerate() {
        let f = normalize_frame(f).map_err(Failure::data)?;
        let scores = model.forward(&f).map_err(Failure::data)?;
        let class = Severity::from_index(sonn_core::model::argmax(&scores)).expect("four classes");
        votes[class.index()] += 1;
        let s: Vec<String> = scores.iter().map(|v| format!("{v:.6}")).collect();
        if a.common.csv {
            let _ = writeln!(text, "{j},{},{}", class.name(), s.join(","));
        } else {
            let _ = writeln!(text, "frame {j:>4}  {:<9} [{}]", class.name(), s.join(" "));
        }
    }
    if !a.common.csv {
        let majority = (0..4).max_by_key(|&c| (votes[c], std::cmp::Reverse(c))).expect("non-empty");
        let _ = writeln!(
            text,
            "majority: {} ({} of {} frames)",
            Severity::ALL[majority].name(),
            votes[majority],
            frames.len()
        );
    }
    emit(&text, a.out.as_deref())
}

fn complexity_cmd(a: &ComplexityArgs) -> Outcome {
    let kv = settings(&a.common, None)?;
    let net = network(&kv, &a.common)?;
    let report = complexity(&net);
    let text = if a.common.csv { report.to_csv() } else { report.to_table() };
    emit(&text, a.out.as_deref())
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Outcome {
    if a.instances == 0 {
        return Err(Failure::usage("--instances must be at least 1"));
    }
    let checks = gradcheck::check_all(a.seed, a.instances);
    print!("{}", gradcheck::render(&checks));
    if checks.iter().all(|c| c.passed()) {
        println!("max rel err < 1e-4: PASS");
        Ok(())
    } else {
        println!("max rel err < 1e-4: FAIL");
        Err(Failure::data("gradient check failed"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Classify(a) => classify(a),
        Command::Complexity(a) => complexity_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
