//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use wppg::config::PipelineConfig;

/// Default settings with training cut down to seconds.
pub fn small_config(manifest: PathBuf, out: PathBuf) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.paths.manifest = manifest;
    cfg.paths.out_dir = out;
    cfg.quality_gate.train.epochs = 4;
    cfg.classifier.epochs = 4;
    cfg.restorer.epochs = 2;
    cfg.restorer.generator_channels = (2, 4);
    cfg.restorer.res_blocks = 2;
    cfg.restorer.discriminator_channels = [2, 4, 4, 8, 8];
    cfg
}

/// Every file under `dir`, relative path and contents, sorted by path.
pub fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}

/// Modification time of every file under `dir`, by relative path.
pub fn mtimes(dir: &Path) -> BTreeMap<PathBuf, SystemTime> {
    files(dir)
        .into_iter()
        .map(|(rel, _)| {
            let t = std::fs::metadata(dir.join(&rel)).unwrap().modified().unwrap();
            (rel, t)
        })
        .collect()
}

pub fn copy_dir(from: &Path, to: &Path) {
    for (rel, bytes) in files(from) {
        let dst = to.join(rel);
        std::fs::create_dir_all(dst.parent().unwrap()).unwrap();
        std::fs::write(dst, bytes).unwrap();
    }
}

/// A fresh directory under the target's scratch space.
pub fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
