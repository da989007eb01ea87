#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tripath::idx::{write_idx_images, write_idx_labels};
use tripath_core::{Matrix, Rng};

pub const SIDE: usize = 8;
pub const CLASSES: usize = 3;

/// Class `c` is a horizontal bar at rows `2c+1..2c+3` with a little
/// speckle. Pixels are multiples of 1/255 so IDX storage is exact.
pub fn synthetic(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = Rng::new(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.below(CLASSES)).collect();
    let images = Matrix::from_fn(n, SIDE * SIDE, |r, i| {
        let row = i / SIDE;
        let bar = (2 * labels[r] + 1..2 * labels[r] + 3).contains(&row);
        if bar {
            f64::from(200 + rng.below(56) as u8) / 255.0
        } else if rng.bernoulli(0.05) {
            f64::from(rng.below(120) as u8) / 255.0
        } else {
            0.0
        }
    });
    (images, labels)
}

/// Writes a 60-image training set and a 30-image test set.
pub fn write_sources(dir: &Path) {
    let (train, train_labels) = synthetic(60, 1);
    let (test, test_labels) = synthetic(30, 2);
    write_idx_images(dir.join("train-images"), &train, SIDE, SIDE).unwrap();
    write_idx_labels(dir.join("train-labels"), &train_labels).unwrap();
    write_idx_images(dir.join("test-images"), &test, SIDE, SIDE).unwrap();
    write_idx_labels(dir.join("test-labels"), &test_labels).unwrap();
}

/// Small but complete experiment over the synthetic sources in `dir`.
pub fn tiny_config() -> Value {
    json!({
        "data": {
            "train_images": "train-images",
            "train_labels": "train-labels",
            "test_images": "test-images",
            "test_labels": "test-labels",
            "num_classes": CLASSES
        },
        "corpus": {"seed": 5},
        "architecture": {"encoder": [16, 8]},
        "pretrain": {"epochs": 2, "batch_size": 10},
        "optimizer": {"kind": "lbfgs", "max_iterations": 15, "mega_batch": 0},
        "output_dir": "out",
        "eval": {"montage_count": 12, "montage_cols": 4}
    })
}

/// A directory holding the synthetic sources and `config.json`.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new(config: &Value) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_sources(dir.path());
        let ws = Workspace { dir };
        ws.write_config(config);
        ws
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn config(&self) -> PathBuf {
        self.path().join("config.json")
    }

    pub fn write_config(&self, config: &Value) {
        std::fs::write(self.config(), serde_json::to_string_pretty(config).unwrap()).unwrap();
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.path().join("out").join(rel)
    }

    /// Runs a subcommand with `--config config.json --quiet` plus `extra`.
    pub fn run(&self, sub: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_tripath"))
            .arg(sub)
            .arg("--config")
            .arg(self.config())
            .arg("--quiet")
            .args(extra)
            .output()
            .unwrap()
    }

    pub fn ok(&self, sub: &str, extra: &[&str]) {
        let out = self.run(sub, extra);
        assert!(
            out.status.success(),
            "{sub} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
