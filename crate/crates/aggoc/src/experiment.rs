//! Experiment orchestration: solver runs, repetition statistics, bound
//! reports and CSV output.
//!
//! CSV schemas (column order is fixed):
//!
//! | file | columns |
//! |------|---------|
//! | `fw.csv` | `k,f_yk,fw_gap,lower_bound,wall_ms` |
//! | `sfw_rep_{r}.csv` | `k,J_xk,gamma_k,gamma_certified_k,omega_k,n_k,swaps,wall_ms` |
//! | `sfw_aggregate.csv` | `k,mean_gamma,std_gamma,mean_gamma_certified,std_gamma_certified` |
//! | `sfw_summary.csv` | `rep,seed,final_J,final_gamma,final_gamma_certified` |
//! | `exact_solution.csv` | `agent,t,state,control` |
//!
//! `gamma` is measured against the final value of a reference relaxed run
//! (500 iterations by default), `gamma_certified` against that run's
//! certified lower bound. Standard deviations are population deviations
//! across repetitions. `wall_ms` is 0 unless timing is requested, so that
//! repeated runs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aggoc_core::battery::{self, BatteryParams};
use aggoc_core::bounds::compute_constants;
use aggoc_core::exact::{self, ExactSolution};
use aggoc_core::fw::{self, RelaxedRunResult, StepRule};
use aggoc_core::micp;
use aggoc_core::sfw::{self, SampleRule, SfwRunResult, SfwSchedule, TheoremBounds};
use aggoc_core::{BoundReport, Executor, OcInstance, Sequential, Trajectory};
use anyhow::Context;

use crate::format;
use crate::lp;
use crate::parallel::Pool;

pub const FW_HEADER: &str = "k,f_yk,fw_gap,lower_bound,wall_ms";
pub const SFW_REP_HEADER: &str = "k,J_xk,gamma_k,gamma_certified_k,omega_k,n_k,swaps,wall_ms";
pub const SFW_AGGREGATE_HEADER: &str = "k,mean_gamma,std_gamma,mean_gamma_certified,std_gamma_certified";
pub const SFW_SUMMARY_HEADER: &str = "rep,seed,final_J,final_gamma,final_gamma_certified";
pub const EXACT_HEADER: &str = "agent,t,state,control";

pub const LP_FILE: &str = "model.lp";

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Battery(BatteryParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Fw,
    Sfw,
    Exact,
    ExportMicp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Source,
    pub algorithm: Algorithm,
    /// `K` for sfw, or the fw iteration count when running fw alone.
    pub iterations: usize,
    pub samples: usize,
    pub reps: usize,
    pub master_seed: u64,
    /// Iterations of the relaxed reference run behind `gamma`.
    pub reference_iterations: usize,
    pub out_dir: PathBuf,
    pub coarse_bounds: bool,
    pub cap: u128,
    pub epsilon: f64,
    pub workers: usize,
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: Source::Battery(BatteryParams::default()),
            algorithm: Algorithm::Sfw,
            iterations: 100,
            samples: SfwSchedule::DEFAULT_SAMPLES,
            reps: 1,
            master_seed: 0,
            reference_iterations: 500,
            out_dir: PathBuf::from("out"),
            coarse_bounds: false,
            cap: exact::DEFAULT_CAP,
            epsilon: 1.0,
            workers: 1,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.reps >= 1, "reps must be at least 1");
        anyhow::ensure!(self.iterations >= 1, "iterations must be at least 1");
        anyhow::ensure!(self.samples >= 1, "samples must be at least 1");
        anyhow::ensure!(self.reference_iterations >= 1, "reference iterations must be at least 1");
        anyhow::ensure!(
            !self.coarse_bounds || matches!(self.source, Source::Battery(_)),
            "coarse bounds need generator parameters, not an instance file"
        );
        Ok(())
    }
}

pub fn load_instance(source: &Source) -> anyhow::Result<OcInstance> {
    let inst = match source {
        Source::File(path) => {
            format::read_instance(path).with_context(|| format!("reading {}", path.display()))?
        }
        Source::Battery(params) => battery::generate(params)?,
    };
    inst.ensure_valid()?;
    Ok(inst)
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn header(w: &mut csv::Writer<fs::File>, h: &str) -> anyhow::Result<()> {
    w.write_record(h.split(','))?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// A relaxed run with per-row wall-clock times (zeros unless `timing`).
pub fn relaxed_run<E: Executor>(
    inst: &OcInstance,
    iterations: usize,
    exec: &E,
    timing: bool,
) -> anyhow::Result<(RelaxedRunResult, Vec<u128>)> {
    let start = Instant::now();
    let mut wall = Vec::with_capacity(iterations + 1);
    let run = fw::fw_run_with(inst, iterations, StepRule::Classic, exec, |_| {
        wall.push(if timing { start.elapsed().as_millis() } else { 0 })
    })?;
    Ok((run, wall))
}

pub fn write_fw_csv(path: &Path, run: &RelaxedRunResult, wall: &[u128]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    header(&mut w, FW_HEADER)?;
    for (r, ms) in run.records.iter().zip(wall) {
        w.write_record([
            r.k.to_string(),
            num(r.value),
            num(r.gap),
            num(r.lower_bound),
            ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct SfwRep {
    pub seed: u64,
    pub run: SfwRunResult<Trajectory>,
    pub wall: Vec<u128>,
}

pub struct SfwExperiment {
    pub reference: RelaxedRunResult,
    pub reps: Vec<SfwRep>,
    /// `(mean, std)` of `gamma_k` per `k`.
    pub gamma: Vec<(f64, f64)>,
    pub gamma_certified: Vec<(f64, f64)>,
}

impl SfwExperiment {
    pub fn proxy(&self) -> f64 {
        self.reference.final_value
    }

    pub fn lower_bound(&self) -> f64 {
        self.reference.certified_lower_bound
    }

    pub fn final_gamma(&self) -> (f64, f64) {
        *self.gamma.last().expect("at least one row")
    }
}

pub fn sfw_schedule(cfg: &ExperimentConfig, rep: usize) -> SfwSchedule {
    SfwSchedule::new(cfg.iterations, cfg.master_seed.wrapping_add(rep as u64))
        .with_samples(SampleRule::Constant(cfg.samples))
}

/// Reference relaxed run, then `reps` independent sfw runs with seeds
/// `master_seed + r`, executed in parallel across repetitions.
pub fn sfw_experiment(inst: &OcInstance, cfg: &ExperimentConfig, pool: &Pool) -> anyhow::Result<SfwExperiment> {
    let (reference, _) = relaxed_run(inst, cfg.reference_iterations, pool, false)?;
    let runs = pool.map(cfg.reps, |r| -> anyhow::Result<SfwRep> {
        let schedule = sfw_schedule(cfg, r);
        let start = Instant::now();
        let mut wall = Vec::with_capacity(cfg.iterations + 1);
        let observe = |_: &sfw::SfwRecord| wall.push(if cfg.timing { start.elapsed().as_millis() } else { 0 });
        let run = if cfg.reps == 1 {
            sfw::sfw_run_with(inst, &schedule, pool, observe)?
        } else {
            sfw::sfw_run_with(inst, &schedule, &Sequential, observe)?
        };
        Ok(SfwRep {
            seed: schedule.master_seed,
            run: run.with_reference(reference.final_value),
            wall,
        })
    });
    let reps = runs.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    let rows = cfg.iterations + 1;
    let stats = |anchor: f64| -> Vec<(f64, f64)> {
        (0..rows)
            .map(|k| {
                let g: Vec<f64> = reps.iter().map(|r| r.run.records[k].value - anchor).collect();
                mean_std(&g)
            })
            .collect()
    };
    let gamma = stats(reference.final_value);
    let gamma_certified = stats(reference.certified_lower_bound);
    Ok(SfwExperiment {
        reference,
        reps,
        gamma,
        gamma_certified,
    })
}

pub fn write_sfw_csvs(dir: &Path, exp: &SfwExperiment) -> anyhow::Result<()> {
    let (proxy, lb) = (exp.proxy(), exp.lower_bound());
    for (r, rep) in exp.reps.iter().enumerate() {
        let mut w = csv_writer(&dir.join(format!("sfw_rep_{r}.csv")))?;
        header(&mut w, SFW_REP_HEADER)?;
        for (rec, ms) in rep.run.records.iter().zip(&rep.wall) {
            w.write_record([
                rec.k.to_string(),
                num(rec.value),
                num(rec.value - proxy),
                num(rec.value - lb),
                num(rec.omega),
                rec.samples.to_string(),
                rec.swaps.to_string(),
                ms.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let mut w = csv_writer(&dir.join("sfw_aggregate.csv"))?;
    header(&mut w, SFW_AGGREGATE_HEADER)?;
    for (k, (g, c)) in exp.gamma.iter().zip(&exp.gamma_certified).enumerate() {
        w.write_record([k.to_string(), num(g.0), num(g.1), num(c.0), num(c.1)])?;
    }
    w.flush()?;
    let mut w = csv_writer(&dir.join("sfw_summary.csv"))?;
    header(&mut w, SFW_SUMMARY_HEADER)?;
    for (r, rep) in exp.reps.iter().enumerate() {
        w.write_record([
            r.to_string(),
            rep.seed.to_string(),
            num(rep.run.best_value),
            num(rep.run.best_value - proxy),
            num(rep.run.best_value - lb),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_exact_csv(path: &Path, inst: &OcInstance, sol: &ExactSolution) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    header(&mut w, EXACT_HEADER)?;
    for (i, x) in sol.x.iter().enumerate() {
        let a = &inst.agents[i];
        for t in 0..=inst.horizon {
            w.write_record([
                i.to_string(),
                t.to_string(),
                a.state_labels()[x.states[t]].clone(),
                a.control_labels()[x.controls[t]].clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Relaxation constants, tight or (battery only) coarse.
pub fn constants(inst: &OcInstance, source: &Source, coarse: bool) -> anyhow::Result<BoundReport> {
    match (source, coarse) {
        (Source::Battery(params), true) => Ok(battery::coarse_constants(inst, params)?),
        (_, true) => anyhow::bail!("coarse bounds need generator parameters"),
        _ => Ok(compute_constants(inst)?),
    }
}

/// Text report of the relaxation constants and the convergence-bound
/// quantities at `(K, n_k, epsilon)`.
pub fn report_bounds(
    inst: &OcInstance,
    report: &BoundReport,
    coarse: bool,
    iterations: usize,
    samples: usize,
    epsilon: f64,
) -> anyhow::Result<(String, TheoremBounds)> {
    let n = inst.num_agents();
    let th = sfw::theorem_bounds(
        report.c0,
        report.c1,
        n,
        iterations,
        &SampleRule::Constant(samples),
        epsilon,
    )?;
    let blocks = report.num_blocks();
    let all: Vec<f64> = report.diameters.iter().flatten().copied().collect();
    let (d_mean, _) = mean_std(&all);
    let d_max = all.iter().copied().fold(0.0, f64::max);
    let mut s = String::new();
    writeln!(s, "mode: {}", if coarse { "coarse" } else { "tight" })?;
    writeln!(s, "N: {n}")?;
    writeln!(s, "T: {}", inst.horizon)?;
    writeln!(s, "blocks: {blocks}")?;
    writeln!(s, "d_mean: {d_mean}")?;
    writeln!(s, "d_max: {d_max}")?;
    writeln!(s, "C0: {}", report.c0)?;
    writeln!(s, "C1: {}", report.c1)?;
    writeln!(s, "gap_bound: {}", report.gap_bound)?;
    writeln!(s, "K: {iterations}")?;
    writeln!(s, "n_k: {samples}")?;
    writeln!(s, "expectation_bound: {}", th.expectation_bound)?;
    writeln!(s, "v_K: {}", th.v_k)?;
    writeln!(s, "m_K: {}", th.m_k)?;
    writeln!(s, "epsilon: {epsilon}")?;
    writeln!(s, "probability_bound: {}", th.probability_lower_bound)?;
    if !th.certified {
        writeln!(s, "note: K > 2N, the probability bound is not guaranteed")?;
    }
    Ok((s, th))
}

/// Runs `cfg` and writes its outputs; returns a human-readable summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<String> {
    cfg.check()?;
    let inst = load_instance(&cfg.source)?;
    let pool = Pool::new(cfg.workers)?;
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let dir = cfg.out_dir.as_path();
    let mut s = String::new();
    match cfg.algorithm {
        Algorithm::Fw => {
            let (run, wall) = relaxed_run(&inst, cfg.iterations, &pool, cfg.timing)?;
            write_fw_csv(&dir.join("fw.csv"), &run, &wall)?;
            writeln!(s, "f(y^K): {}", run.final_value)?;
            writeln!(s, "fw_gap: {}", run.records.last().map_or(0.0, |r| r.gap))?;
            writeln!(s, "certified_lower_bound: {}", run.certified_lower_bound)?;
        }
        Algorithm::Sfw => {
            let exp = sfw_experiment(&inst, cfg, &pool)?;
            let wall = vec![0; exp.reference.records.len()];
            write_fw_csv(&dir.join("fw.csv"), &exp.reference, &wall)?;
            write_sfw_csvs(dir, &exp)?;
            let report = constants(&inst, &cfg.source, cfg.coarse_bounds)?;
            let (mean, std) = exp.final_gamma();
            writeln!(s, "reference f(y^{}): {}", cfg.reference_iterations, exp.proxy())?;
            writeln!(s, "certified_lower_bound: {}", exp.lower_bound())?;
            writeln!(s, "reps: {}", cfg.reps)?;
            writeln!(s, "final mean gamma: {mean}")?;
            writeln!(s, "final std gamma: {std}")?;
            writeln!(
                s,
                "gap_bound ({}): {}",
                if cfg.coarse_bounds { "coarse" } else { "tight" },
                report.gap_bound
            )?;
        }
        Algorithm::Exact => {
            let sol = exact::enumerate_optimum(&inst, cfg.cap, &pool)?;
            write_exact_csv(&dir.join("exact_solution.csv"), &inst, &sol)?;
            writeln!(s, "J*: {}", sol.value)?;
            writeln!(s, "profiles: {}", sol.profiles)?;
        }
        Algorithm::ExportMicp => {
            let model = micp::build_micp(&inst)?;
            let path = dir.join(LP_FILE);
            fs::write(&path, lp::write_lp(&model)).with_context(|| format!("writing {}", path.display()))?;
            writeln!(s, "d(m): {}", model.variable_count())?;
            writeln!(s, "constraints: {}", model.constraints.len())?;
            writeln!(s, "file: {}", path.display())?;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
