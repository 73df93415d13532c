#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use aggoc::experiment::{Algorithm, ExperimentConfig, Source};
use aggoc_core::battery::BatteryParams;

pub fn small_battery(seed: u64) -> BatteryParams {
    BatteryParams {
        agents: 6,
        horizon: 4,
        u_max: 2,
        s_in_range: (0, 2),
        s_max_range: (3, 5),
        seed,
        ..BatteryParams::default()
    }
}

pub fn config(algorithm: Algorithm, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        source: Source::Battery(small_battery(3)),
        algorithm,
        iterations: 15,
        samples: 5,
        reps: 3,
        master_seed: 11,
        reference_iterations: 200,
        out_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

/// File name -> bytes for every file in `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}
