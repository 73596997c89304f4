//! Job launchers: real child processes, or a virtual clock for scheduling tests.

use std::collections::VecDeque;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use crate::manifest::JobSpec;
use crate::status::unix_now;
use crate::FleetError;

/// Environment variable naming the simulator executable.
pub const SIM_BIN_ENV: &str = "POL_SIM_BIN";
pub const STDERR_LOG: &str = "sim.stderr.log";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Finished {
    /// Index of the job in the coordinator's job list.
    pub job: usize,
    /// `None` when the child was killed by a signal or never started.
    pub exit_code: Option<i32>,
    pub started_at: f64,
    pub finished_at: f64,
}

pub trait Launcher {
    /// Current time on this launcher's clock, seconds.
    fn now(&self) -> f64;
    fn start(&mut self, job: usize, spec: &JobSpec) -> Result<(), FleetError>;
    /// Blocks until one started job ends.
    fn wait_any(&mut self) -> Result<Finished, FleetError>;
    fn running(&self) -> usize;
}

/// Finds an executable: paths with a directory part must exist, bare names
/// are looked up on `PATH`.
pub fn resolve_program(program: &Path) -> Result<PathBuf, FleetError> {
    let missing = || FleetError::SimulatorMissing(program.to_path_buf());
    if program.components().count() > 1 || program.is_absolute() {
        return if program.is_file() { Ok(program.to_path_buf()) } else { Err(missing()) };
    }
    let path = std::env::var_os("PATH").ok_or_else(missing)?;
    std::env::split_paths(&path).map(|d| d.join(program)).find(|p| p.is_file()).ok_or_else(missing)
}

/// Arguments of one simulator invocation.
pub fn run_args(spec: &JobSpec) -> Vec<String> {
    let mut args = vec!["run".to_string(), "--map".into(), spec.map.display().to_string()];
    if let Some(c) = &spec.config {
        args.push("--config".into());
        args.push(c.display().to_string());
    }
    args.push("--out".into());
    args.push(spec.out.display().to_string());
    for (k, v) in &spec.overrides {
        args.push("--set".into());
        args.push(format!("{k}={v}"));
    }
    args
}

/// Runs each job as `<program> run ...` in its own process.
#[derive(Debug)]
pub struct ProcessLauncher {
    program: PathBuf,
    running: Vec<(usize, Child, f64, Instant)>,
    failed_to_start: VecDeque<Finished>,
    poll: Duration,
}

impl ProcessLauncher {
    pub fn new(program: &Path) -> Result<Self, FleetError> {
        Ok(Self { program: resolve_program(program)?, running: Vec::new(), failed_to_start: VecDeque::new(), poll: Duration::from_millis(5) })
    }

    pub fn program(&self) -> &Path {
        &self.program
    }
}

impl Launcher for ProcessLauncher {
    fn now(&self) -> f64 {
        unix_now()
    }

    fn start(&mut self, job: usize, spec: &JobSpec) -> Result<(), FleetError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| FleetError::Io { path, source }
        };
        fs::create_dir_all(&spec.out).map_err(io(&spec.out))?;
        let log_path = spec.out.join(STDERR_LOG);
        let log = File::create(&log_path).map_err(io(&log_path))?;
        let started = unix_now();
        let child = Command::new(&self.program).args(run_args(spec)).stdin(Stdio::null()).stdout(Stdio::null()).stderr(log).spawn();
        match child {
            Ok(c) => {
                log::debug!("started job {} as pid {}", spec.id, c.id());
                self.running.push((job, c, started, Instant::now()));
            }
            Err(e) => {
                log::error!("job {}: cannot start {}: {e}", spec.id, self.program.display());
                self.failed_to_start.push_back(Finished { job, exit_code: None, started_at: started, finished_at: started });
            }
        }
        Ok(())
    }

    fn wait_any(&mut self) -> Result<Finished, FleetError> {
        if let Some(f) = self.failed_to_start.pop_front() {
            return Ok(f);
        }
        assert!(!self.running.is_empty(), "wait_any with nothing running");
        loop {
            for i in 0..self.running.len() {
                let status = self.running[i].1.try_wait().map_err(|source| FleetError::Io { path: self.program.clone(), source })?;
                if let Some(st) = status {
                    let (job, _, started_at, t0) = self.running.swap_remove(i);
                    return Ok(Finished { job, exit_code: st.code(), started_at, finished_at: started_at + t0.elapsed().as_secs_f64() });
                }
            }
            std::thread::sleep(self.poll);
        }
    }

    fn running(&self) -> usize {
        self.running.len() + self.failed_to_start.len()
    }
}

/// Simulated launcher: each job takes a fixed time on a virtual clock.
pub struct VirtualLauncher<F: FnMut(&JobSpec) -> (f64, i32)> {
    outcome: F,
    clock: f64,
    running: Vec<(usize, f64, f64, i32)>,
}

impl<F: FnMut(&JobSpec) -> (f64, i32)> VirtualLauncher<F> {
    /// `outcome` gives each job's duration in seconds and exit code.
    pub fn new(outcome: F) -> Self {
        Self { outcome, clock: 0.0, running: Vec::new() }
    }
}

impl<F: FnMut(&JobSpec) -> (f64, i32)> Launcher for VirtualLauncher<F> {
    fn now(&self) -> f64 {
        self.clock
    }

    fn start(&mut self, job: usize, spec: &JobSpec) -> Result<(), FleetError> {
        let (d, code) = (self.outcome)(spec);
        self.running.push((job, self.clock + d.max(0.0), self.clock, code));
        Ok(())
    }

    fn wait_any(&mut self) -> Result<Finished, FleetError> {
        let i = (0..self.running.len())
            .min_by(|&a, &b| self.running[a].1.total_cmp(&self.running[b].1).then(self.running[a].0.cmp(&self.running[b].0)))
            .expect("wait_any with nothing running");
        let (job, end, start, code) = self.running.swap_remove(i);
        self.clock = end;
        Ok(Finished { job, exit_code: Some(code), started_at: start, finished_at: end })
    }

    fn running(&self) -> usize {
        self.running.len()
    }
}
