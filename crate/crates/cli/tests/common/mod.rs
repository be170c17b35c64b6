#![allow(dead_code)]

use std::path::{Path, PathBuf};

use selfintro_cli::config::{RunConfig, TEST_IMAGES};

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// `$MNIST_DIR`, or `data/mnist` under the workspace root.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/mnist"))
}

pub fn have_mnist() -> bool {
    let ok = mnist_dir().join(TEST_IMAGES).is_file();
    if !ok {
        eprintln!("MNIST not found under {}; skipping", mnist_dir().display());
    }
    ok
}

pub fn smoke_config(output: &Path) -> RunConfig {
    let mut c = RunConfig::load(&workspace_root().join("configs/smoke.toml")).unwrap();
    c.data.dir = mnist_dir();
    c.output_dir = output.to_path_buf();
    c
}
