//! Per-job `status.txt`, rewritten atomically on every transition.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::FleetError;

pub const STATUS_FILE: &str = "status.txt";
pub const STATUS_TAG: &str = "polstatus/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobState {
    Pending,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Pending => "pending",
            JobState::Running => "running",
            JobState::Done => "done",
            JobState::Failed => "failed",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

impl FromStr for JobState {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [JobState::Pending, JobState::Running, JobState::Done, JobState::Failed]
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown job state `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStatus {
    pub job_id: String,
    pub state: JobState,
    pub exit_code: Option<i32>,
    pub wall_seconds: f64,
    /// Seconds since the Unix epoch, or on the virtual clock.
    pub started_at: Option<f64>,
    pub finished_at: Option<f64>,
}

impl RunStatus {
    pub fn pending(job_id: &str) -> Self {
        Self { job_id: job_id.to_string(), state: JobState::Pending, exit_code: None, wall_seconds: 0.0, started_at: None, finished_at: None }
    }

    /// The status as it reads back from `status.txt`, with times kept to
    /// microseconds.
    pub fn persisted(self) -> Self {
        let micros = |x: f64| format!("{x:.6}").parse().unwrap_or(x);
        Self {
            wall_seconds: micros(self.wall_seconds),
            started_at: self.started_at.map(micros),
            finished_at: self.finished_at.map(micros),
            ..self
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{STATUS_TAG}")?;
        writeln!(f, "job = {}", self.job_id)?;
        writeln!(f, "state = {}", self.state.as_str())?;
        if let Some(c) = self.exit_code {
            writeln!(f, "exit_code = {c}")?;
        }
        writeln!(f, "wall_seconds = {:.6}", self.wall_seconds)?;
        if let Some(t) = self.started_at {
            writeln!(f, "started_at = {t:.6}")?;
        }
        if let Some(t) = self.finished_at {
            writeln!(f, "finished_at = {t:.6}")?;
        }
        Ok(())
    }
}

impl FromStr for RunStatus {
    type Err = String;
    fn from_str(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(STATUS_TAG) {
            return Err(format!("missing `{STATUS_TAG}` header"));
        }
        let mut s = RunStatus::pending("");
        let mut have_job = false;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(" = ").ok_or_else(|| format!("malformed line `{line}`"))?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| format!("{k}: bad number `{v}`"));
            match k {
                "job" => {
                    s.job_id = v.to_string();
                    have_job = true;
                }
                "state" => s.state = v.parse()?,
                "exit_code" => s.exit_code = Some(v.parse().map_err(|_| format!("exit_code: bad value `{v}`"))?),
                "wall_seconds" => s.wall_seconds = num(v)?,
                "started_at" => s.started_at = Some(num(v)?),
                "finished_at" => s.finished_at = Some(num(v)?),
                _ => return Err(format!("unknown key `{k}`")),
            }
        }
        if !have_job {
            return Err("missing job id".into());
        }
        Ok(s)
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn status_path(out: &Path) -> PathBuf {
    out.join(STATUS_FILE)
}

/// Writes through a temporary file and a rename, so readers never see a
/// half-written status.
pub fn write_status(out: &Path, status: &RunStatus) -> Result<(), FleetError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| FleetError::Io { path, source }
    };
    fs::create_dir_all(out).map_err(io(out))?;
    let tmp = out.join(format!("{STATUS_FILE}.tmp"));
    fs::write(&tmp, status.to_string()).map_err(io(&tmp))?;
    let dst = status_path(out);
    fs::rename(&tmp, &dst).map_err(io(&dst))
}

/// The persisted status, if the job has one.
pub fn read_status(out: &Path) -> Result<Option<RunStatus>, FleetError> {
    let path = status_path(out);
    match fs::read_to_string(&path) {
        Ok(text) => text.parse().map(Some).map_err(|message| FleetError::Status { path, message }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(FleetError::Io { path, source }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(read_status(dir.path()).unwrap(), None);
        let s = RunStatus {
            job_id: "a".into(),
            state: JobState::Failed,
            exit_code: Some(3),
            wall_seconds: 1.25,
            started_at: Some(10.0),
            finished_at: Some(11.25),
        };
        write_status(dir.path(), &s).unwrap();
        assert_eq!(read_status(dir.path()).unwrap(), Some(s));
        assert!(!dir.path().join("status.txt.tmp").exists());
        fs::write(status_path(dir.path()), "junk").unwrap();
        assert!(read_status(dir.path()).is_err());
    }
}
