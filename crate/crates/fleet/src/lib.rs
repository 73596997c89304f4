//! Runs many simulations as child processes under job-queue or fork-join
//! scheduling, and merges their logs.

pub mod exec;
pub mod manifest;
pub mod status;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use polsim_core::logio::{concat_logs, LogKind, ProcError};
use thiserror::Error;

pub use exec::{Launcher, ProcessLauncher, VirtualLauncher, SIM_BIN_ENV};
pub use manifest::{JobSpec, Manifest, Mode};
pub use status::{read_status, write_status, JobState, RunStatus};

pub const COLLECT_REPORT: &str = "collect.report";

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("simulator executable not found: {}", .0.display())]
    SimulatorMissing(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Status { path: PathBuf, message: String },
    #[error("next-generation command failed ({detail}); stopped after generation {generation}")]
    NextGen { generation: usize, detail: String, statuses: Vec<RunStatus> },
    #[error("no finished runs to collect")]
    NothingToCollect,
    #[error(transparent)]
    Logs(#[from] ProcError),
}

/// Final state of an orchestration.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Every job that was scheduled, addenda included, in schedule order.
    pub jobs: Vec<JobSpec>,
    /// One status per entry of `jobs`.
    pub statuses: Vec<RunStatus>,
    /// Wall time from first start to last finish, on the launcher's clock.
    pub makespan: f64,
    pub generations: usize,
}

impl Outcome {
    pub fn all_done(&self) -> bool {
        self.statuses.iter().all(|s| s.state == JobState::Done)
    }
}

/// Options that do not belong in a manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Run every job even when its status says done.
    pub force: bool,
}

struct Coordinator<'a, L: Launcher> {
    launcher: &'a mut L,
    workers: usize,
    force: bool,
    jobs: Vec<JobSpec>,
    statuses: Vec<RunStatus>,
    first_start: Option<f64>,
    last_finish: f64,
}

impl<L: Launcher> Coordinator<'_, L> {
    fn add(&mut self, spec: JobSpec) -> usize {
        self.statuses.push(RunStatus::pending(&spec.id));
        self.jobs.push(spec);
        self.jobs.len() - 1
    }

    /// Runs `batch` on up to `workers` slots, pulling the next job in order as
    /// soon as a slot frees up. Returns when all of them are terminal.
    fn run_batch(&mut self, batch: &[usize]) -> Result<(), FleetError> {
        let mut queue = Vec::with_capacity(batch.len());
        for &i in batch {
            let out = &self.jobs[i].out;
            match read_status(out) {
                Ok(Some(prev)) if prev.state == JobState::Done && !self.force => {
                    log::info!("job {} already done, skipping", self.jobs[i].id);
                    self.statuses[i] = prev;
                }
                Ok(_) => queue.push(i),
                Err(e) => {
                    log::warn!("{e}; rerunning job {}", self.jobs[i].id);
                    queue.push(i);
                }
            }
        }
        let mut next = 0;
        while next < queue.len() || self.launcher.running() > 0 {
            while next < queue.len() && self.launcher.running() < self.workers {
                let i = queue[next];
                next += 1;
                let now = self.launcher.now();
                self.first_start.get_or_insert(now);
                let st = RunStatus { state: JobState::Running, started_at: Some(now), ..RunStatus::pending(&self.jobs[i].id) }.persisted();
                write_status(&self.jobs[i].out, &st)?;
                self.statuses[i] = st;
                log::info!("start {}", self.jobs[i].id);
                self.launcher.start(i, &self.jobs[i])?;
            }
            let f = self.launcher.wait_any()?;
            let state = if f.exit_code == Some(0) { JobState::Done } else { JobState::Failed };
            let st = RunStatus {
                job_id: self.jobs[f.job].id.clone(),
                state,
                exit_code: f.exit_code,
                wall_seconds: f.finished_at - f.started_at,
                started_at: Some(f.started_at),
                finished_at: Some(f.finished_at),
            }
            .persisted();
            match state {
                JobState::Done => log::info!("done {} in {:.2} s", st.job_id, st.wall_seconds),
                _ => match st.exit_code {
                    Some(c) => log::warn!("job {} failed with exit code {c}", st.job_id),
                    None => log::warn!("job {} failed without an exit code", st.job_id),
                },
            }
            write_status(&self.jobs[f.job].out, &st)?;
            self.statuses[f.job] = st;
            self.last_finish = self.last_finish.max(f.finished_at);
        }
        Ok(())
    }

    fn outcome(self, generations: usize) -> Outcome {
        let makespan = self.first_start.map_or(0.0, |s| self.last_finish - s);
        Outcome { jobs: self.jobs, statuses: self.statuses, makespan, generations }
    }
}

/// Every job through one queue, in manifest order.
pub fn run_queue<L: Launcher>(man: &Manifest, launcher: &mut L, opts: RunOptions) -> Result<Outcome, FleetError> {
    man.check()?;
    let mut c = coordinator(man, launcher, opts);
    let all: Vec<usize> = (0..c.jobs.len()).collect();
    c.run_batch(&all)?;
    Ok(c.outcome(1))
}

fn coordinator<'a, L: Launcher>(man: &Manifest, launcher: &'a mut L, opts: RunOptions) -> Coordinator<'a, L> {
    let mut c = Coordinator {
        launcher,
        workers: man.workers,
        force: opts.force,
        jobs: Vec::new(),
        statuses: Vec::new(),
        first_start: None,
        last_finish: 0.0,
    };
    for j in &man.jobs {
        c.add(j.clone());
    }
    c
}

/// Generations one after another with a barrier between them. With a
/// next-generation command, each barrier may add a generation.
pub fn run_forkjoin<L: Launcher>(man: &Manifest, launcher: &mut L, opts: RunOptions) -> Result<Outcome, FleetError> {
    man.check()?;
    let mut c = coordinator(man, launcher, opts);
    let mut pending: std::collections::VecDeque<Vec<usize>> = man.generation_indices().into();
    let mut gen = 0;
    while let Some(batch) = pending.pop_front() {
        gen += 1;
        log::info!("generation {gen}: {} jobs", batch.len());
        c.run_batch(&batch)?;
        let Some(cmd) = &man.next_gen_command else { continue };
        let outs: Vec<&Path> = batch.iter().map(|&i| c.jobs[i].out.as_path()).collect();
        let addendum = match next_generation(cmd, &man.base_dir, &outs) {
            Ok(text) => text,
            Err(detail) => {
                let statuses = c.statuses.clone();
                return Err(FleetError::NextGen { generation: gen, detail, statuses });
            }
        };
        let new_jobs = manifest::parse_addendum(&addendum, &man.base_dir)?;
        if new_jobs.is_empty() {
            continue;
        }
        let mut all = c.jobs.clone();
        all.extend(new_jobs.iter().cloned());
        Manifest { jobs: all, generations: Vec::new(), ..man.clone() }.check()?;
        let idx: Vec<usize> = new_jobs.into_iter().map(|j| c.add(j)).collect();
        pending.push_front(idx);
    }
    Ok(c.outcome(gen))
}

/// Runs the hook with the finished output directories as arguments; its
/// standard output is the addendum.
fn next_generation(cmd: &str, cwd: &Path, outs: &[&Path]) -> Result<String, String> {
    let cwd = if cwd.as_os_str().is_empty() { Path::new(".") } else { cwd };
    let out = Command::new("sh")
        .arg("-c")
        .arg(format!("{cmd} \"$@\""))
        .arg("next-gen")
        .args(outs)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stderr(Stdio::inherit())
        .output()
        .map_err(|e| format!("cannot run `{cmd}`: {e}"))?;
    if !out.status.success() {
        return Err(format!("`{cmd}` exited with {}", out.status));
    }
    String::from_utf8(out.stdout).map_err(|_| format!("`{cmd}` printed non-UTF-8 output"))
}

pub fn run<L: Launcher>(man: &Manifest, launcher: &mut L, opts: RunOptions) -> Result<Outcome, FleetError> {
    match man.mode {
        Mode::Queue => run_queue(man, launcher, opts),
        Mode::ForkJoin => run_forkjoin(man, launcher, opts),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectReport {
    pub merged: Vec<String>,
    pub failed: Vec<(String, Option<i32>)>,
    pub records: std::collections::BTreeMap<LogKind, u64>,
}

impl std::fmt::Display for CollectReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "polcollect/1")?;
        writeln!(f, "runs_merged = {}", self.merged.len())?;
        writeln!(f, "runs_failed = {}", self.failed.len())?;
        for id in &self.merged {
            writeln!(f, "merged = {id}")?;
        }
        for (id, code) in &self.failed {
            match code {
                Some(c) => writeln!(f, "failed = {id} exit {c}")?,
                None => writeln!(f, "failed = {id} no exit code")?,
            }
        }
        for (k, n) in &self.records {
            writeln!(f, "records.{} = {n}", k.name())?;
        }
        Ok(())
    }
}

/// Merges the logs of done jobs in schedule order and writes `collect.report`.
pub fn collect(outcome: &Outcome, out_dir: &Path) -> Result<CollectReport, FleetError> {
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for (job, st) in outcome.jobs.iter().zip(&outcome.statuses) {
        if st.state == JobState::Done {
            runs.push((job.id.clone(), job.out.clone()));
        } else {
            failed.push((job.id.clone(), st.exit_code));
        }
    }
    if runs.is_empty() {
        return Err(FleetError::NothingToCollect);
    }
    let records = concat_logs(&runs, out_dir)?;
    let report = CollectReport { merged: runs.into_iter().map(|r| r.0).collect(), failed, records };
    let path = out_dir.join(COLLECT_REPORT);
    let mut text = String::new();
    let _ = write!(text, "{report}");
    fs::write(&path, text).map_err(|source| FleetError::Io { path, source })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(dir: &Path, durations: &[f64], workers: usize, mode: Mode) -> Manifest {
        let jobs = durations
            .iter()
            .enumerate()
            .map(|(i, d)| JobSpec {
                id: format!("j{i}"),
                map: "m".into(),
                config: None,
                out: dir.join(format!("j{i}")),
                overrides: vec![("duration".into(), d.to_string())],
            })
            .collect();
        Manifest { mode, workers, jobs, generations: Vec::new(), next_gen_command: None, base_dir: dir.to_path_buf() }
    }

    fn duration(spec: &JobSpec) -> (f64, i32) {
        let d: f64 = spec.overrides[0].1.parse().unwrap();
        (d, if d < 0.0 { 1 } else { 0 })
    }

    #[test]
    fn hand_computed_makespans() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), &[4.0, 1.0, 1.0, 1.0, 1.0, 1.0], 2, Mode::Queue);
        let q = run_queue(&m, &mut VirtualLauncher::new(duration), RunOptions { force: true }).unwrap();
        assert_eq!(q.makespan, 5.0);
        let f = run_forkjoin(&m, &mut VirtualLauncher::new(duration), RunOptions { force: true }).unwrap();
        assert_eq!(f.makespan, 6.0);
        assert_eq!(f.generations, 3);
        assert!(q.all_done() && f.all_done());
    }

    #[test]
    fn one_job_many_workers() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), &[2.0], 4, Mode::Queue);
        let o = run_queue(&m, &mut VirtualLauncher::new(duration), RunOptions::default()).unwrap();
        assert_eq!(o.statuses.len(), 1);
        assert_eq!(o.statuses[0].state, JobState::Done);
        assert_eq!(read_status(&dir.path().join("j0")).unwrap().unwrap().state, JobState::Done);
    }

    #[test]
    fn failures_are_isolated_and_rerun() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), &[1.0, -1.0, 1.0], 2, Mode::Queue);
        let o = run_queue(&m, &mut VirtualLauncher::new(duration), RunOptions::default()).unwrap();
        let states: Vec<JobState> = o.statuses.iter().map(|s| s.state).collect();
        assert_eq!(states, [JobState::Done, JobState::Failed, JobState::Done]);
        // A rerun starts only the failed job.
        let mut started = Vec::new();
        let o = run_queue(
            &m,
            &mut VirtualLauncher::new(|s: &JobSpec| {
                started.push(s.id.clone());
                (1.0, 0)
            }),
            RunOptions::default(),
        )
        .unwrap();
        assert!(o.all_done());
        assert_eq!(started, ["j1"]);
    }
}
