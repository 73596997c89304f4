//! Sweep manifests: a preamble plus one `[job <id>]` section per run.
//!
//! ```text
//! mode = forkjoin
//! workers = 2
//! generation = a, b
//! generation = c
//! next_gen_command = ./breed.sh
//!
//! [job a]
//! map = city.polmap
//! config = base.cfg
//! out = runs/a
//! seed = 1
//! set.agents = 500
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use polsim_core::kv::KvDoc;

use crate::FleetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Queue,
    ForkJoin,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "queue" => Ok(Mode::Queue),
            "forkjoin" => Ok(Mode::ForkJoin),
            _ => Err(format!("mode must be queue or forkjoin, got `{s}`")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Queue => "queue",
            Mode::ForkJoin => "forkjoin",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobSpec {
    pub id: String,
    pub map: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    /// Config overrides in manifest order; `seed` is one of them.
    pub overrides: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub mode: Mode,
    pub workers: usize,
    pub jobs: Vec<JobSpec>,
    /// Job ids per generation; empty means batches of `workers` in job order.
    pub generations: Vec<Vec<String>>,
    pub next_gen_command: Option<String>,
    /// Directory relative paths were resolved against.
    pub base_dir: PathBuf,
}

fn bad(line: usize, message: impl Into<String>) -> FleetError {
    FleetError::Manifest { line, message: message.into() }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses job sections only; used for both manifests and addenda.
fn parse_jobs(doc: &KvDoc, base: &Path) -> Result<Vec<JobSpec>, FleetError> {
    let mut jobs = Vec::new();
    for s in &doc.sections {
        let id = match s.header.split_once(char::is_whitespace) {
            Some(("job", id)) if !id.trim().is_empty() => id.trim().to_string(),
            _ => return Err(bad(s.line, format!("expected `[job <id>]`, got `[{}]`", s.header))),
        };
        if id.contains(|c: char| c.is_whitespace() || c == ',' || c == '/') {
            return Err(bad(s.line, format!("job id `{id}` may not contain spaces, commas or slashes")));
        }
        let (mut map, mut config, mut out) = (None, None, None);
        let mut overrides = Vec::new();
        for e in &s.entries {
            match e.key.as_str() {
                "map" => map = Some(resolve(base, &e.value)),
                "config" => config = Some(resolve(base, &e.value)),
                "out" => out = Some(resolve(base, &e.value)),
                "seed" => {
                    e.value.parse::<u64>().map_err(|_| bad(e.line, format!("seed must be an unsigned integer, got `{}`", e.value)))?;
                    overrides.push(("seed".to_string(), e.value.clone()));
                }
                k => match k.strip_prefix("set.") {
                    Some(key) if !key.is_empty() => overrides.push((key.to_string(), e.value.clone())),
                    _ => return Err(bad(e.line, format!("unknown job key `{k}`"))),
                },
            }
        }
        let map = map.ok_or_else(|| bad(s.line, format!("job `{id}` has no map")))?;
        let out = out.ok_or_else(|| bad(s.line, format!("job `{id}` has no out")))?;
        jobs.push(JobSpec { id, map, config, out, overrides });
    }
    Ok(jobs)
}

fn check_unique(jobs: &[JobSpec]) -> Result<(), FleetError> {
    let mut ids = BTreeSet::new();
    let mut outs = BTreeSet::new();
    for j in jobs {
        if !ids.insert(j.id.as_str()) {
            return Err(bad(0, format!("duplicate job id `{}`", j.id)));
        }
        if !outs.insert(j.out.as_path()) {
            return Err(bad(0, format!("job `{}` reuses output directory {}", j.id, j.out.display())));
        }
    }
    // Nested output directories would mix files of two runs.
    let outs: Vec<&Path> = outs.into_iter().collect();
    for w in outs.windows(2) {
        if w[1].starts_with(w[0]) {
            return Err(bad(0, format!("output directories overlap: {} and {}", w[0].display(), w[1].display())));
        }
    }
    Ok(())
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, FleetError> {
        let doc = KvDoc::parse(text).map_err(|e| bad(e.line, e.message))?;
        let mut mode = Mode::Queue;
        let mut workers = 1usize;
        let mut generations = Vec::new();
        let mut next_gen_command = None;
        for e in &doc.preamble {
            match e.key.as_str() {
                "mode" => mode = e.value.parse().map_err(|m: String| bad(e.line, m))?,
                "workers" => {
                    workers = e.value.parse().map_err(|_| bad(e.line, format!("workers must be a count, got `{}`", e.value)))?
                }
                "generation" => {
                    let ids: Vec<String> = e.value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                    if ids.is_empty() {
                        return Err(bad(e.line, "empty generation"));
                    }
                    generations.push(ids);
                }
                "next_gen_command" => next_gen_command = Some(e.value.clone()),
                k => return Err(bad(e.line, format!("unknown manifest key `{k}`"))),
            }
        }
        let jobs = parse_jobs(&doc, base_dir)?;
        let m = Manifest { mode, workers, jobs, generations, next_gen_command, base_dir: base_dir.to_path_buf() };
        m.check()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, FleetError> {
        let text = std::fs::read_to_string(path).map_err(|source| FleetError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn check(&self) -> Result<(), FleetError> {
        if self.workers < 1 {
            return Err(bad(0, "workers must be at least 1"));
        }
        if self.jobs.is_empty() {
            return Err(bad(0, "manifest has no jobs"));
        }
        check_unique(&self.jobs)?;
        if !self.generations.is_empty() {
            let mut seen = BTreeSet::new();
            for g in &self.generations {
                for id in g {
                    if !self.jobs.iter().any(|j| &j.id == id) {
                        return Err(bad(0, format!("generation names unknown job `{id}`")));
                    }
                    if !seen.insert(id.as_str()) {
                        return Err(bad(0, format!("job `{id}` appears in two generations")));
                    }
                }
            }
            if seen.len() != self.jobs.len() {
                let missing: Vec<&str> = self.jobs.iter().map(|j| j.id.as_str()).filter(|id| !seen.contains(id)).collect();
                return Err(bad(0, format!("generations do not cover jobs: {}", missing.join(", "))));
            }
        }
        Ok(())
    }

    /// Generations as job indices. Without explicit generations, jobs are
    /// cut into consecutive batches of `workers`.
    pub fn generation_indices(&self) -> Vec<Vec<usize>> {
        if self.generations.is_empty() {
            let idx: Vec<usize> = (0..self.jobs.len()).collect();
            return idx.chunks(self.workers).map(<[usize]>::to_vec).collect();
        }
        self.generations
            .iter()
            .map(|g| g.iter().map(|id| self.jobs.iter().position(|j| &j.id == id).expect("checked")).collect())
            .collect()
    }

    pub fn job(&self, id: &str) -> Option<&JobSpec> {
        self.jobs.iter().find(|j| j.id == id)
    }
}

/// Jobs from a next-generation addendum: `[job]` sections only.
pub fn parse_addendum(text: &str, base_dir: &Path) -> Result<Vec<JobSpec>, FleetError> {
    let doc = KvDoc::parse(text).map_err(|e| bad(e.line, e.message))?;
    if let Some(e) = doc.preamble.first() {
        return Err(bad(e.line, format!("addendum may only contain job sections, found `{}`", e.key)));
    }
    parse_jobs(&doc, base_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "mode = forkjoin\nworkers = 2\ngeneration = a, b\ngeneration = c\n\n[job a]\nmap = m.polmap\nout = runs/a\nseed = 1\nset.agents = 10\n[job b]\nmap = /abs/m.polmap\nconfig = base.cfg\nout = runs/b\n[job c]\nmap = m.polmap\nout = runs/c\n";

    #[test]
    fn parses_jobs_and_generations() {
        let m = Manifest::parse(TEXT, Path::new("/sweeps")).unwrap();
        assert_eq!(m.mode, Mode::ForkJoin);
        assert_eq!(m.workers, 2);
        assert_eq!(m.jobs.len(), 3);
        assert_eq!(m.jobs[0].map, PathBuf::from("/sweeps/m.polmap"));
        assert_eq!(m.jobs[1].map, PathBuf::from("/abs/m.polmap"));
        assert_eq!(m.jobs[1].config, Some(PathBuf::from("/sweeps/base.cfg")));
        assert_eq!(m.jobs[0].overrides, vec![("seed".into(), "1".into()), ("agents".into(), "10".into())]);
        assert_eq!(m.generation_indices(), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn default_generations_are_worker_batches() {
        let text = TEXT.replace("generation = a, b\ngeneration = c\n", "");
        let mut m = Manifest::parse(&text, Path::new(".")).unwrap();
        assert_eq!(m.generation_indices(), vec![vec![0, 1], vec![2]]);
        m.workers = 1;
        assert_eq!(m.generation_indices(), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn rejects_bad_manifests() {
        let p = Path::new(".");
        let cases = [
            TEXT.replace("workers = 2", "workers = 0"),
            TEXT.replace("generation = c\n", ""),
            TEXT.replace("generation = c\n", "generation = c, a\n"),
            TEXT.replace("[job b]", "[job a]"),
            TEXT.replace("out = runs/b", "out = runs/a"),
            TEXT.replace("out = runs/b", "out = runs/a/inner"),
            TEXT.replace("seed = 1", "seed = x"),
            TEXT.replace("seed = 1", "colour = red"),
            TEXT.replace("[job c]", "[task c]"),
            TEXT.replace("mode = forkjoin", "mode = swarm"),
            "mode = queue\n".to_string(),
        ];
        for text in cases {
            assert!(Manifest::parse(&text, p).is_err(), "{text}");
        }
    }

    #[test]
    fn addendum_is_jobs_only() {
        let jobs = parse_addendum("[job d]\nmap = m\nout = o/d\n", Path::new("/x")).unwrap();
        assert_eq!(jobs[0].out, PathBuf::from("/x/o/d"));
        assert!(parse_addendum("", Path::new(".")).unwrap().is_empty());
        assert!(parse_addendum("workers = 3\n", Path::new(".")).is_err());
    }
}
