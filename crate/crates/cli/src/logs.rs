use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand};
use polsim_core::geomap::WorldMap;
use polsim_core::logio::proc::parse_epoch;
use polsim_core::logio::{concat_logs, downsample, export_geojson, split_logs, stats};
use polsim_core::social::SocialParams;

use crate::{require_file, usage, write_atomic};

#[derive(Debug, Subcommand)]
pub enum LogsCommand {
    /// Merge run directories, adding a leading run_id column.
    Concat(ConcatArgs),
    /// Split a merged directory back into one directory per run.
    Split(SplitArgs),
    /// Keep trajectory records whose tick is a multiple of the stride.
    Downsample(DownsampleArgs),
    /// Summarize one run's logs.
    Stats(StatsArgs),
    /// Write trajectories as GeoJSON line strings in lon/lat.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct ConcatArgs {
    /// Output directory for the merged files.
    #[arg(long)]
    out: PathBuf,
    /// Run directories as `[ID=]DIR`; the id defaults to the directory name.
    #[arg(required = true)]
    runs: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Directory written by `logs concat`.
    #[arg(long)]
    merged: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DownsampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    stride: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Run output directory.
    #[arg(long)]
    run: PathBuf,
    /// Edge weight at or above which two agents count as friends.
    #[arg(long, default_value_t = SocialParams::default().friend_threshold)]
    friend_threshold: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    trajectory: PathBuf,
    /// Map the run used, for the inverse projection.
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value_t = 1)]
    stride: u64,
    /// Start datetime of tick 0 (`YYYY-MM-DDTHH:MM:SS`); adds timestamps.
    #[arg(long)]
    epoch: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

pub fn dispatch(cmd: LogsCommand) -> Result<()> {
    match cmd {
        LogsCommand::Concat(a) => {
            let runs = a
                .runs
                .iter()
                .map(|r| match r.split_once('=') {
                    Some((id, dir)) => Ok((id.to_string(), PathBuf::from(dir))),
                    None => {
                        let dir = PathBuf::from(r);
                        let id = dir.file_name().ok_or_else(|| usage(format!("cannot name run `{r}`; use ID=DIR")))?;
                        Ok((id.to_string_lossy().into_owned(), dir))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let counts = concat_logs(&runs, &a.out)?;
            for (k, n) in counts {
                log::info!("{}: {n} records", k.name());
            }
        }
        LogsCommand::Split(a) => {
            let ids = split_logs(&a.merged, &a.out)?;
            log::info!("split {} runs into {}", ids.len(), a.out.display());
        }
        LogsCommand::Downsample(a) => {
            if a.stride < 1 {
                return Err(usage("--stride must be at least 1"));
            }
            require_file("--input", &a.input)?;
            let kept = downsample(&a.input, &a.output, a.stride)?;
            log::info!("kept {kept} records");
        }
        LogsCommand::Stats(a) => {
            let report = stats(&a.run, a.friend_threshold)?;
            match a.out {
                Some(p) => write_atomic(&p, &report.to_string())?,
                None => print!("{report}"),
            }
        }
        LogsCommand::Export(a) => {
            if a.stride < 1 {
                return Err(usage("--stride must be at least 1"));
            }
            require_file("--trajectory", &a.trajectory)?;
            require_file("--map", &a.map)?;
            let epoch = a.epoch.as_deref().map(parse_epoch).transpose()?;
            let map = WorldMap::load(&a.map)?;
            let doc = export_geojson(&a.trajectory, &map, a.stride, epoch)?;
            write_atomic(&a.out, &format!("{doc}\n"))?;
        }
    }
    Ok(())
}
