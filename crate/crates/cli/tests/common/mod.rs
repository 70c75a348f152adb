//! Helpers shared by the CLI integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fr3coex")
}

/// A scenario small enough to simulate in well under a second: two sites in a
/// 3 km square, about two terminals and three TN users, four snapshots.
pub fn tiny_config(seed: u64) -> String {
    format!(
        r#"seed = {seed}

[scenario]
ntn_densities = [2e-7]
tn_user_density = 3e-7
synthetic_sites = 2

[params.footprint]
side_m = 3000.0

[pass]
step_deg = 40.0

[ppo]
updates = 3
hidden = [8]
episodes_per_update = 1
num_workers = 1

[train]
log_every = 0
"#
    )
}

pub fn write_config(dir: &Path, seed: u64) -> PathBuf {
    let p = dir.join(format!("tiny_{seed}.toml"));
    std::fs::write(&p, tiny_config(seed)).unwrap();
    p
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env("FR3COEX_LOG", "warn")
        .output()
        .expect("spawn fr3coex")
}

#[track_caller]
pub fn run_ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(
        o.status.success(),
        "fr3coex {args:?} failed:\n{}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// File name to contents for every regular file directly under `dir`.
pub fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
