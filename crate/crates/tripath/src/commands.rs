//! The five subcommands, callable in-process. Each reads its inputs from the
//! config and the output directory and writes its artifacts there.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! corpus/    train-{clean,noisy}-idx3-ubyte, train-labels-idx1-ubyte,
//!            test-{clean,noisy}-idx3-ubyte, test-labels-idx1-ubyte, manifest.json
//! pretrain/  stack.rbm, curve.csv
//! train/     model.tpn, history.csv
//! eval/      metrics.json, clean.pgm, noisy.pgm, denoised.pgm
//! pipeline/  comparison.json, joint.tpn, denoiser.tpn, *_history.csv
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use tripath_core::data::{make_triplets, ImageDataset, TripletDataset};
use tripath_core::eval::{evaluate, MetricsReport};
use tripath_core::exec::Executor;
use tripath_core::network::TriPathNet;
use tripath_core::noise::corrupt_images;
use tripath_core::numerics::derive_seed;
use tripath_core::optim::{
    fine_tune, initialize, pipeline_baseline_train, train_joint, Context, HistoryRecord, Hooks, TrainHistory,
};
use tripath_core::rbm::{pretrain_stack, PretrainedStack};
use tripath_core::Matrix;

use crate::checkpoint::{load_net, load_stack, save_net, save_stack};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::idx::{load_dataset, read_idx_images, write_idx_images, write_idx_labels};
use crate::manifest::{combined_hash, sha256_file, sha256_hex, CorpusManifest, Coverage};
use crate::pgm::write_pgm_montage;
use crate::report::{read_json, write_history, write_json, write_pretrain_curve, Comparison};
use crate::threads::Threaded;

pub const TRAIN_CLEAN: &str = "train-clean-idx3-ubyte";
pub const TRAIN_NOISY: &str = "train-noisy-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_CLEAN: &str = "test-clean-idx3-ubyte";
pub const TEST_NOISY: &str = "test-noisy-idx3-ubyte";
pub const TEST_LABELS: &str = "test-labels-idx1-ubyte";
pub const MANIFEST: &str = "manifest.json";

/// Where each stage keeps its files.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Layout {
            root: cfg.output_dir.clone(),
        }
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn stack(&self) -> PathBuf {
        self.root.join("pretrain").join("stack.rbm")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("train").join("model.tpn")
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("eval").join("metrics.json")
    }

    pub fn comparison(&self) -> PathBuf {
        self.root.join("pipeline").join("comparison.json")
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Knobs that do not belong in the experiment config.
#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub threads: usize,
    pub no_pretrain: bool,
    pub quiet: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            threads: 1,
            no_pretrain: false,
            quiet: false,
        }
    }
}

/// Wall clock and stderr progress lines.
pub struct Progress {
    start: Instant,
    quiet: bool,
}

impl Progress {
    pub fn new(quiet: bool) -> Self {
        Progress {
            start: Instant::now(),
            quiet,
        }
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("[{:8.1}s] {msg}", self.seconds());
        }
    }
}

impl Hooks for Progress {
    fn seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn on_record(&self, stage: &str, r: &HistoryRecord) {
        self.note(&format!(
            "{stage} {:>4}  loss {:.5}  image {:.5}  label {:.5}",
            r.iteration, r.loss, r.image_term, r.label_term
        ));
    }
}

fn check_exists(path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(CliError::Config(format!("{} does not exist", path.display())));
    }
    Ok(())
}

fn load_sources(cfg: &ExperimentConfig) -> Result<(ImageDataset, ImageDataset)> {
    let d = &cfg.data;
    for p in [&d.train_images, &d.train_labels, &d.test_images, &d.test_labels] {
        check_exists(p)?;
    }
    let prepare = |ds: ImageDataset, limit: Option<usize>| {
        let ds = match limit {
            Some(n) => ds.take(n),
            None => ds,
        };
        if d.binarize {
            ds.binarized()
        } else {
            ds
        }
    };
    let train = load_dataset(&d.train_images, &d.train_labels, d.num_classes)?;
    let test = load_dataset(&d.test_images, &d.test_labels, d.num_classes)?;
    if (train.width(), train.height()) != (test.width(), test.height()) {
        return Err(CliError::Config("training and test images differ in size".into()));
    }
    Ok((prepare(train, d.train_limit), prepare(test, d.test_limit)))
}

fn corrupt(ds: &ImageDataset, cfg: &ExperimentConfig, stream: u64, replication: usize) -> Result<(Matrix, Vec<f64>)> {
    match &cfg.corpus.noise {
        Some(spec) => {
            let seed = derive_seed(cfg.corpus.seed, stream);
            let set = corrupt_images(ds.images(), ds.width(), ds.height(), spec, seed, replication)?;
            Ok((set.noisy, set.mask_fractions))
        }
        None => {
            let copies = ds.replicate(replication);
            Ok((copies.images().clone(), vec![0.0; copies.len()]))
        }
    }
}

/// Generates the noisy training and test corpora.
pub fn gen_noise(cfg: &ExperimentConfig, progress: &Progress) -> Result<CorpusManifest> {
    let (train, test) = load_sources(cfg)?;
    let dir = Layout::new(cfg).corpus();
    ensure_dir(&dir)?;
    let r = cfg.corpus.replication;
    progress.note(&format!("corrupting {} training images x{r}", train.len()));
    let (train_noisy, train_cov) = corrupt(&train, cfg, 0, r)?;
    progress.note(&format!("corrupting {} test images", test.len()));
    let (test_noisy, test_cov) = corrupt(&test, cfg, 1, 1)?;
    let train_clean = train.replicate(r);
    let (w, h) = (train.width(), train.height());

    write_idx_images(dir.join(TRAIN_CLEAN), train_clean.images(), w, h)?;
    write_idx_images(dir.join(TRAIN_NOISY), &train_noisy, w, h)?;
    write_idx_labels(dir.join(TRAIN_LABELS), train_clean.labels())?;
    write_idx_images(dir.join(TEST_CLEAN), test.images(), w, h)?;
    write_idx_images(dir.join(TEST_NOISY), &test_noisy, w, h)?;
    write_idx_labels(dir.join(TEST_LABELS), test.labels())?;

    let mut files = BTreeMap::new();
    for name in [
        TRAIN_CLEAN,
        TRAIN_NOISY,
        TRAIN_LABELS,
        TEST_CLEAN,
        TEST_NOISY,
        TEST_LABELS,
    ] {
        files.insert(name.to_string(), sha256_file(dir.join(name))?);
    }
    let mut sources = BTreeMap::new();
    let d = &cfg.data;
    for p in [&d.train_images, &d.train_labels, &d.test_images, &d.test_labels] {
        let name = p
            .file_name()
            .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
        sources.insert(name, sha256_file(p)?);
    }
    let manifest = CorpusManifest {
        noise: cfg.corpus.noise.clone(),
        seed: cfg.corpus.seed,
        replication: r,
        binarize: d.binarize,
        train_limit: d.train_limit,
        test_limit: d.test_limit,
        sources,
        corpus_sha256: combined_hash(&files),
        files,
        train_coverage: Coverage::of(&train_cov),
        test_coverage: Coverage::of(&test_cov),
    };
    write_json(dir.join(MANIFEST), &manifest)?;
    progress.note(&format!(
        "corpus {} written to {}",
        &manifest.corpus_sha256[..12],
        dir.display()
    ));
    Ok(manifest)
}

/// A generated corpus, verified against its manifest.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub train: TripletDataset,
    pub test: TripletDataset,
    pub manifest: CorpusManifest,
}

fn load_split(dir: &Path, clean: &str, noisy: &str, labels: &str, num_classes: usize) -> Result<TripletDataset> {
    let clean_ds = load_dataset(dir.join(clean), dir.join(labels), num_classes)?;
    let noisy_path = dir.join(noisy);
    let noisy_img = read_idx_images(&noisy_path)?;
    if noisy_img.images.shape() != clean_ds.images().shape() {
        return Err(CliError::format(noisy_path, "noisy images do not match the clean set"));
    }
    Ok(make_triplets(&clean_ds, &noisy_img.images)?)
}

pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Corpus> {
    let dir = Layout::new(cfg).corpus();
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.exists() {
        return Err(CliError::Config(format!(
            "no corpus at {}; run gen-noise first",
            dir.display()
        )));
    }
    let manifest: CorpusManifest = read_json(&manifest_path)?;
    for (name, want) in &manifest.files {
        let bytes = fs::read(dir.join(name)).map_err(|e| CliError::io(dir.join(name), e))?;
        if &sha256_hex(&bytes) != want {
            return Err(CliError::format(
                dir.join(name),
                "content does not match the corpus manifest",
            ));
        }
    }
    if combined_hash(&manifest.files) != manifest.corpus_sha256 {
        return Err(CliError::format(
            &manifest_path,
            "corpus hash does not match its file list",
        ));
    }
    let k = cfg.data.num_classes;
    Ok(Corpus {
        train: load_split(&dir, TRAIN_CLEAN, TRAIN_NOISY, TRAIN_LABELS, k)?,
        test: load_split(&dir, TEST_CLEAN, TEST_NOISY, TEST_LABELS, k)?,
        manifest,
    })
}

/// Greedy RBM pretraining of the encoder on the noisy training images.
pub fn pretrain(cfg: &ExperimentConfig, progress: &Progress) -> Result<PretrainedStack> {
    let pcfg = cfg
        .pretrain
        .as_ref()
        .ok_or_else(|| CliError::Config("pretrain is null in the config".into()))?;
    let corpus = load_corpus(cfg)?;
    let arch = cfg.architecture(corpus.train.input_dim())?;
    progress.note(&format!(
        "pretraining {:?} on {} images",
        arch.encoder_dims(),
        corpus.train.len()
    ));
    let stack = pretrain_stack(
        &arch.encoder_dims(),
        corpus.train.noisy(),
        pcfg,
        cfg.plan().pretrain_seed(),
    )?;
    for r in &stack.curve {
        progress.note(&format!("rbm {} epoch {} recon {:.5}", r.layer, r.epoch, r.recon_ce));
    }
    let path = Layout::new(cfg).stack();
    ensure_dir(path.parent().unwrap())?;
    save_stack(&path, &stack.rbms)?;
    write_pretrain_curve(path.with_file_name("curve.csv"), &stack.curve)?;
    Ok(stack)
}

fn executor(opts: &RunOptions) -> Threaded {
    Threaded {
        threads: opts.threads.max(1),
    }
}

fn starting_net(cfg: &ExperimentConfig, input_dim: usize, opts: &RunOptions) -> Result<TriPathNet> {
    let arch = cfg.architecture(input_dim)?;
    if let Some(path) = &cfg.resume_from {
        let net = load_net(path)?;
        if net.input_dim() != input_dim || net.num_classes() != cfg.data.num_classes {
            return Err(CliError::Config(format!(
                "checkpoint {} does not fit {input_dim} inputs and {} classes",
                path.display(),
                cfg.data.num_classes
            )));
        }
        return Ok(net.with_lambda(cfg.lambda)?);
    }
    let plan = cfg.plan();
    if plan.pretrain.is_some() && !opts.no_pretrain {
        let path = Layout::new(cfg).stack();
        if !path.exists() {
            return Err(CliError::Config(format!(
                "no pretrained stack at {}; run pretrain first or pass --no-pretrain",
                path.display()
            )));
        }
        let rbms = load_stack(&path)?;
        Ok(initialize(Some(&rbms), &arch, cfg.lambda, &plan)?)
    } else {
        Ok(initialize(None, &arch, cfg.lambda, &plan)?)
    }
}

/// Fine-tunes the joint model and writes the checkpoint and history.
pub fn train(cfg: &ExperimentConfig, opts: &RunOptions, progress: &Progress) -> Result<(TriPathNet, TrainHistory)> {
    let corpus = load_corpus(cfg)?;
    let net = starting_net(cfg, corpus.train.input_dim(), opts)?;
    let exec = executor(opts);
    let ctx = Context {
        exec: &exec as &dyn Executor,
        hooks: progress,
    };
    progress.note(&format!(
        "fine-tuning on {} triplets, lambda {}",
        corpus.train.len(),
        cfg.lambda
    ));
    let (net, history) = fine_tune(&net, &corpus.train, &cfg.optimizer, ctx)?;
    let path = Layout::new(cfg).model();
    ensure_dir(path.parent().unwrap())?;
    save_net(&path, &net)?;
    write_history(path.with_file_name("history.csv"), &history)?;
    Ok((net, history))
}

/// Scores the trained model on the test corpus and draws montages.
pub fn eval(cfg: &ExperimentConfig, progress: &Progress) -> Result<MetricsReport> {
    let corpus = load_corpus(cfg)?;
    let layout = Layout::new(cfg);
    let model_path = layout.model();
    if !model_path.exists() {
        return Err(CliError::Config(format!(
            "no model at {}; run train first",
            model_path.display()
        )));
    }
    let net = load_net(&model_path)?;
    let (report, prediction) = evaluate(&net, &corpus.test)?;
    let path = layout.metrics();
    let dir = path.parent().unwrap();
    ensure_dir(dir)?;
    write_json(&path, &report)?;
    let n = cfg.eval.montage_count.min(corpus.test.len());
    if n > 0 {
        let (w, h) = (corpus.test.width(), corpus.test.height());
        let cols = cfg.eval.montage_cols;
        write_pgm_montage(dir.join("clean.pgm"), &corpus.test.clean().slice_rows(0..n), w, h, cols)?;
        write_pgm_montage(dir.join("noisy.pgm"), &corpus.test.noisy().slice_rows(0..n), w, h, cols)?;
        write_pgm_montage(
            dir.join("denoised.pgm"),
            &prediction.images.slice_rows(0..n),
            w,
            h,
            cols,
        )?;
    }
    progress.note(&format!(
        "psnr {:.3} dB (noisy {:.3} dB), error rate {:.4} on {}",
        report.psnr_db, report.noisy_floor_db, report.error_rate, report.n
    ));
    Ok(report)
}

/// Trains the joint model and the pipeline baseline on the same corpus with
/// the same plan, and scores both on the same test set.
pub fn pipeline(cfg: &ExperimentConfig, opts: &RunOptions, progress: &Progress) -> Result<Comparison> {
    let corpus = load_corpus(cfg)?;
    let arch = cfg.architecture(corpus.train.input_dim())?;
    let mut plan = cfg.plan();
    if opts.no_pretrain {
        plan.pretrain = None;
    }
    let exec = executor(opts);
    let ctx = Context {
        exec: &exec as &dyn Executor,
        hooks: progress,
    };
    progress.note("training the joint model");
    let joint = train_joint(&corpus.train, &arch, cfg.lambda, &plan, ctx)?;
    progress.note("training the pipeline baseline");
    let baseline = pipeline_baseline_train(&corpus.train, &arch, &plan, ctx)?;
    let (joint_report, _) = evaluate(&joint.net, &corpus.test)?;
    let (pipeline_report, _) = evaluate(&baseline, &corpus.test)?;

    let path = Layout::new(cfg).comparison();
    let dir = path.parent().unwrap();
    ensure_dir(dir)?;
    save_net(dir.join("joint.tpn"), &joint.net)?;
    save_net(dir.join("denoiser.tpn"), &baseline.denoiser)?;
    write_history(dir.join("joint_history.csv"), &joint.history)?;
    write_history(dir.join("denoiser_history.csv"), &baseline.denoiser_history)?;
    write_history(dir.join("classifier_history.csv"), &baseline.classifier_history)?;
    let comparison = Comparison {
        corpus_sha256: corpus.manifest.corpus_sha256.clone(),
        joint: joint_report,
        pipeline: pipeline_report,
    };
    write_json(&path, &comparison)?;
    progress.note(&format!(
        "joint error {:.4} psnr {:.3}; pipeline error {:.4} psnr {:.3}",
        comparison.joint.error_rate,
        comparison.joint.psnr_db,
        comparison.pipeline.error_rate,
        comparison.pipeline.psnr_db
    ));
    Ok(comparison)
}
