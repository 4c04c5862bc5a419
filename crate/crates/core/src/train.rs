//! SGD training with MSE loss, early stopping and stratified k-fold
//! cross-validation with repeated runs.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::metrics::{confusion, per_class, ConfusionMatrix, EvalReport, MetricSummary};
use crate::model::{argmax, ModelError, ModelGradients, NetworkConfig, SelfOnn};
use crate::scalar::{count, Scalar};
use crate::signal::{Dataset, Frame, Severity, NUM_CLASSES};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// stop once the post-epoch training error is at or below this fraction
    pub early_stop_train_error: f64,
    pub folds: usize,
    pub runs_per_fold: usize,
    /// samples per update; 1 is per-sample SGD, >= the train-set size is full batch
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.2,
            max_epochs: 50,
            early_stop_train_error: 0.03,
            folds: 10,
            runs_per_fold: 5,
            batch_size: 16,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Argument("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.early_stop_train_error) {
            return Err(TrainError::Argument("early-stop threshold must be in [0, 1)".into()));
        }
        if self.folds < 2 {
            return Err(TrainError::Argument("at least 2 folds are required".into()));
        }
        if self.runs_per_fold == 0 || self.batch_size == 0 {
            return Err(TrainError::Argument("runs and batch size must be positive".into()));
        }
        Ok(())
    }

    /// Keys `lr`, `epochs`, `early_stop`, `folds`, `runs`, `batch_size`, `seed`.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, TrainError> {
        let mut c = Self::default();
        kv.apply("lr", &mut c.learning_rate)?;
        kv.apply("epochs", &mut c.max_epochs)?;
        kv.apply("early_stop", &mut c.early_stop_train_error)?;
        kv.apply("folds", &mut c.folds)?;
        kv.apply("runs", &mut c.runs_per_fold)?;
        kv.apply("batch_size", &mut c.batch_size)?;
        kv.apply("seed", &mut c.seed)?;
        c.validate()?;
        Ok(c)
    }
}

/// Mixes a base seed with a path of indices (SplitMix64 finalizer per step).
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Mean squared error against a `+1` (true class) / `-1` (others) target,
/// with its gradient `2 (s - t) / n`.
pub fn mse_loss<T: Scalar>(scores: &[T], target_class: usize) -> (T, Vec<T>) {
    let n: T = count(scores.len());
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let grad = scores
        .iter()
        .enumerate()
        .map(|(c, &s)| {
            let t = if c == target_class { T::one() } else { -T::one() };
            let d = s - t;
            loss += d * d;
            two * d / n
        })
        .collect();
    (loss / n, grad)
}

/// Plain gradient descent: `w <- w - lr * g` for every parameter.
pub fn sgd_step<T: Scalar>(model: &mut SelfOnn<T>, grads: &ModelGradients<T>, lr: T) {
    fn update<T: Scalar>(params: &mut [T], grads: &[T], lr: T) {
        for (p, &g) in params.iter_mut().zip(grads) {
            *p -= lr * g;
        }
    }
    for (layer, g) in model.conv_layers_mut().iter_mut().zip(&grads.conv) {
        update(layer.weights_mut(), &g.weights, lr);
        update(layer.biases_mut(), &g.biases, lr);
    }
    update(model.hidden_layer_mut().weights_mut(), &grads.hidden.weights, lr);
    update(model.hidden_layer_mut().biases_mut(), &grads.hidden.biases, lr);
    update(model.output_layer_mut().weights_mut(), &grads.output.weights, lr);
    update(model.output_layer_mut().biases_mut(), &grads.output.biases, lr);
}

fn label_of(f: &Frame<f64>) -> Result<usize, TrainError> {
    f.label
        .map(Severity::index)
        .ok_or_else(|| TrainError::Argument("training frames must be labeled".into()))
}

/// Mean loss and predicted classes of a model over labeled frames.
pub fn evaluate(model: &SelfOnn<f64>, frames: &[&Frame<f64>]) -> Result<(f64, Vec<Severity>), TrainError> {
    let mut loss = 0.0;
    let mut preds = Vec::with_capacity(frames.len());
    for f in frames {
        let scores = model.forward(f)?;
        loss += mse_loss(&scores, label_of(f)?).0;
        preds.push(Severity::from_index(argmax(&scores)).expect("four classes"));
    }
    let n = frames.len().max(1) as f64;
    Ok((loss / n, preds))
}

fn error_rate(preds: &[Severity], frames: &[&Frame<f64>]) -> f64 {
    let wrong = preds
        .iter()
        .zip(frames)
        .filter(|(p, f)| Some(**p) != f.label)
        .count();
    wrong as f64 / frames.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_error: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SelfOnn<f64>,
    pub epochs: usize,
    pub history: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn final_train_error(&self) -> Option<f64> {
        self.history.last().map(|h| h.train_error)
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_error\n");
        for h in &self.history {
            let _ = writeln!(out, "{},{:.9},{:.6}", h.epoch, h.train_loss, h.train_error);
        }
        out
    }
}

/// Trains with mini-batch SGD, reshuffling every epoch, until the training
/// error reaches the early-stop threshold or `max_epochs` is exhausted.
pub fn train_one(
    mut model: SelfOnn<f64>,
    train: &[&Frame<f64>],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    if train.is_empty() {
        return Err(TrainError::Argument("training set is empty".into()));
    }
    let labels: Vec<usize> = train.iter().map(|f| label_of(f)).collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let lr = cfg.learning_rate;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = ModelGradients::zeros_for(&model);
            for &j in batch {
                let trace = model.forward_maps(&train[j].samples)?;
                let (_, g) = mse_loss(trace.scores(), labels[j]);
                model.accumulate_gradients(&trace, &g, &mut acc)?;
            }
            acc.scale(1.0 / batch.len() as f64);
            sgd_step(&mut model, &acc, lr);
        }
        let (train_loss, preds) = evaluate(&model, train)?;
        let train_error = error_rate(&preds, train);
        history.push(EpochLog {
            epoch,
            train_loss,
            train_error,
        });
        if train_error <= cfg.early_stop_train_error {
            break;
        }
    }
    Ok(TrainOutcome {
        model,
        epochs: history.len(),
        history,
    })
}

/// Stratified fold id per frame: each class is shuffled with the seed and
/// dealt round-robin across folds.
pub fn fold_assignment(labels: &[Severity], folds: usize, seed: u64) -> Result<Vec<usize>, TrainError> {
    if folds < 2 {
        return Err(TrainError::Argument("at least 2 folds are required".into()));
    }
    let mut assignment = vec![0; labels.len()];
    for class in Severity::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(TrainError::Argument(format!(
                "class {class} has {} frames, fewer than {folds} folds",
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xF01D, class.index() as u64]));
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub report: EvalReport,
    pub epochs: usize,
    pub final_train_error: f64,
    pub history: Vec<EpochLog>,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub runs: Vec<RunResult>,
    /// arithmetic mean of the per-run metrics
    pub averaged: MetricSummary,
    pub test_size: usize,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    /// confusion counts summed over every run of every fold
    pub pooled: EvalReport,
    /// arithmetic mean over every (fold, run)
    pub mean: MetricSummary,
}

/// Train/test frame indices of one fold.
pub fn fold_split(ds: &Dataset, folds: usize, seed: u64, fold: usize) -> Result<(Vec<usize>, Vec<usize>), TrainError> {
    let assignment = fold_assignment(&ds.labels(), folds, seed)?;
    let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| assignment[i] == fold);
    Ok((train, test))
}

/// Seed of one (fold, run) training.
pub fn run_seed(cfg: &TrainConfig, fold: usize, run: usize) -> u64 {
    derive_seed(cfg.seed, &[fold as u64, run as u64])
}

/// Trains and tests one (fold, run) cell exactly as [`cross_validate`] does.
pub fn train_fold_run(
    ds: &Dataset,
    net: &NetworkConfig,
    cfg: &TrainConfig,
    fold: usize,
    run: usize,
) -> Result<(SelfOnn<f64>, RunResult), TrainError> {
    let (train_idx, test_idx) = fold_split(ds, cfg.folds, cfg.seed, fold)?;
    run_cell(ds, net, cfg, &train_idx, &test_idx, run, run_seed(cfg, fold, run))
}

fn run_cell(
    ds: &Dataset,
    net: &NetworkConfig,
    cfg: &TrainConfig,
    train_idx: &[usize],
    test_idx: &[usize],
    run: usize,
    seed: u64,
) -> Result<(SelfOnn<f64>, RunResult), TrainError> {
    let frames = ds.frames();
    let train: Vec<&Frame<f64>> = train_idx.iter().map(|&i| &frames[i]).collect();
    let test: Vec<&Frame<f64>> = test_idx.iter().map(|&i| &frames[i]).collect();
    let model = SelfOnn::build(net, derive_seed(seed, &[0]))?;
    let outcome = train_one(model, &train, cfg, derive_seed(seed, &[1]))?;
    let report = test_report(&outcome.model, &test)?;
    let result = RunResult {
        run,
        seed,
        report,
        epochs: outcome.epochs,
        final_train_error: outcome.final_train_error().unwrap_or(f64::NAN),
        history: outcome.history,
    };
    Ok((outcome.model, result))
}

/// Confusion matrix and metrics of a model on labeled frames.
pub fn test_report(model: &SelfOnn<f64>, frames: &[&Frame<f64>]) -> Result<EvalReport, TrainError> {
    let (_, preds) = evaluate(model, frames)?;
    let labels: Vec<Severity> = frames.iter().filter_map(|f| f.label).collect();
    Ok(per_class(&confusion(&preds, &labels)))
}

/// Stratified k-fold cross-validation with `runs_per_fold` independent
/// trainings per fold. `jobs > 1` trains cells in parallel; results do not
/// depend on `jobs`.
pub fn cross_validate(
    ds: &Dataset,
    net: &NetworkConfig,
    cfg: &TrainConfig,
    jobs: usize,
) -> Result<CvReport, TrainError> {
    cfg.validate()?;
    net.validate()?;
    if ds.is_empty() {
        return Err(TrainError::Argument("dataset is empty".into()));
    }
    let assignment = fold_assignment(&ds.labels(), cfg.folds, cfg.seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..cfg.folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| assignment[i] == f);
            (train, test)
        })
        .collect();
    let cells: Vec<(usize, usize)> = (0..cfg.folds)
        .flat_map(|f| (0..cfg.runs_per_fold).map(move |r| (f, r)))
        .collect();
    let work = |&(f, r): &(usize, usize)| -> Result<RunResult, TrainError> {
        let (train, test) = &splits[f];
        run_cell(ds, net, cfg, train, test, r, run_seed(cfg, f, r)).map(|(_, res)| res)
    };
    let results: Vec<Result<RunResult, TrainError>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TrainError::Argument(e.to_string()))?;
        pool.install(|| cells.par_iter().map(work).collect())
    } else {
        cells.iter().map(work).collect()
    };

    let mut results = results.into_iter();
    let mut folds = Vec::with_capacity(cfg.folds);
    let mut pooled = ConfusionMatrix::default();
    let mut all = Vec::new();
    for (fold, (_, test)) in splits.iter().enumerate() {
        let mut runs = Vec::with_capacity(cfg.runs_per_fold);
        for _ in 0..cfg.runs_per_fold {
            let r = results.next().expect("one result per cell")?;
            pooled.merge(&r.report.confusion);
            all.push(r.report.summary());
            runs.push(r);
        }
        let averaged = MetricSummary::mean(runs.iter().map(|r| r.report.summary()).collect::<Vec<_>>().iter());
        folds.push(FoldResult {
            fold,
            runs,
            averaged,
            test_size: test.len(),
        });
    }
    Ok(CvReport {
        folds,
        pooled: per_class(&pooled),
        mean: MetricSummary::mean(all.iter()),
    })
}

impl CvReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for f in &self.folds {
            let epochs: Vec<String> = f.runs.iter().map(|r| r.epochs.to_string()).collect();
            let _ = writeln!(
                out,
                "fold {:>2}: test {:>4}  acc {:.4}  mean F1 {:.4}  epochs [{}]",
                f.fold,
                f.test_size,
                f.averaged.accuracy,
                f.averaged.mean_f1(),
                epochs.join(" ")
            );
        }
        out.push_str("\nmean over all runs\n");
        out.push_str(&self.mean.to_table());
        out.push_str("\npooled confusion (all runs)\n");
        out.push_str(&self.pooled.to_table());
        out
    }

    /// One row per (fold, run) followed by `mean` and `pooled` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("fold,run,epochs,final_train_error,{}\n", MetricSummary::csv_header());
        for f in &self.folds {
            for r in &f.runs {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{}",
                    f.fold,
                    r.run,
                    r.epochs,
                    r.final_train_error,
                    r.report.summary().to_csv_row()
                );
            }
        }
        let _ = writeln!(out, "mean,,,,{}", self.mean.to_csv_row());
        let _ = writeln!(out, "pooled,,,,{}", self.pooled.summary().to_csv_row());
        out
    }

    pub fn mean_f1(&self) -> f64 {
        self.mean.mean_f1()
    }
}

/// Class counts used for stratification checks.
pub fn class_histogram(labels: &[Severity]) -> [usize; NUM_CLASSES] {
    let mut h = [0; NUM_CLASSES];
    for l in labels {
        h[l.index()] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn mse_examples() {
        let (loss, grad) = mse_loss(&[1.0, -1.0, -1.0, -1.0], 0);
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
        let (loss, grad) = mse_loss(&[0.0, 0.0, 0.0, 0.0], 0);
        assert_eq!(loss, 1.0);
        assert_eq!(grad, vec![-0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let scores: [f64; 4] = [0.3, -0.7, 0.45, 0.1];
        let (_, grad) = mse_loss(&scores, 2);
        let h = 1e-6;
        for c in 0..4 {
            let mut up = scores;
            let mut dn = scores;
            up[c] += h;
            dn[c] -= h;
            let numeric = (mse_loss(&up, 2).0 - mse_loss(&dn, 2).0) / (2.0 * h);
            let rel = (numeric - grad[c]).abs() / grad[c].abs();
            assert!(rel < 1e-8, "class {c}: rel {rel}");
        }
    }

    #[test]
    fn seed_derivation_is_stable_and_spread() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[0]), derive_seed(8, &[0]));
    }

    #[test]
    fn fold_assignment_small() {
        let labels: Vec<Severity> = Severity::ALL.iter().flat_map(|&c| [c; 4]).collect();
        let a = fold_assignment(&labels, 2, 3).unwrap();
        for c in 0..4 {
            let in_zero = (0..4).filter(|j| a[c * 4 + j] == 0).count();
            assert_eq!(in_zero, 2);
        }
        assert!(fold_assignment(&labels, 5, 3).is_err());
        assert!(fold_assignment(&labels, 1, 3).is_err());
    }

    #[test]
    fn config_validation_and_kv() {
        let kv = KvConfig::parse("lr = 0.05\nfolds = 4\nruns = 2\nseed = 9").unwrap();
        let c = TrainConfig::from_kv(&kv).unwrap();
        assert_abs_diff_eq!(c.learning_rate, 0.05);
        assert_eq!((c.folds, c.runs_per_fold, c.seed), (4, 2, 9));
        assert!(TrainConfig::from_kv(&KvConfig::parse("folds = 1").unwrap()).is_err());
        assert!(TrainConfig::from_kv(&KvConfig::parse("early_stop = 1.0").unwrap()).is_err());
        assert!(TrainConfig::from_kv(&KvConfig::parse("lr = 0").unwrap()).is_err());
    }
}
