#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn plcwatch(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_plcwatch"));
    cmd.args(args).env_remove("PLCWATCH_OUT");
    if let Some(dir) = env_out {
        cmd.env("PLCWATCH_OUT", dir);
    }
    cmd.output().expect("spawn plcwatch")
}

/// Runs `command` with `config` written to `dir/<command>.toml`, output in `out`.
pub fn run_toml(dir: &Path, command: &str, config: &str, out: &Path) -> Output {
    let path = dir.join(format!("{command}.toml"));
    std::fs::write(&path, config).unwrap();
    plcwatch(&[command, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()], None)
}

pub fn ok(o: &Output) -> Vec<PathBuf> {
    assert!(
        o.status.success(),
        "exit {:?}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap().lines().map(PathBuf::from).collect()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = match std::fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

/// Healthy or faulty generate config with a reduced band.
pub fn generate_config(name: &str, load: &str, n_samples: usize, n_sub: usize, seed: u64, fault: &str) -> String {
    format!(
        "command = \"generate\"\nname = \"{name}\"\n\n[scenario]\nload_model = \"{load}\"\n\
         n_samples = {n_samples}\nseed = {seed}\n\n[scenario.band]\nn_subcarriers = {n_sub}\n{fault}"
    )
}
