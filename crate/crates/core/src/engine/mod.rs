//! Simulation loop, configuration, and run driver.

pub mod clock;
pub mod config;
pub mod run;
pub mod state;

pub use clock::{SimClock, Schedule, TICKS_PER_DAY, TICK_SECONDS};
pub use config::{ConfigError, LogToggles, SimConfig};
pub use run::{
    bench, format_bench, parse_summary, run, run_with, strip_wall_clock, BenchRow, RunError, RunOptions, RunSummary, PARTIAL_MARKER,
    SUMMARY_FILE, SUMMARY_TAG, WALL_CLOCK_KEYS,
};
pub use state::{init_world, Collect, Counters, InitError, NullObserver, Observer, SimState};
