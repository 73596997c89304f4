//! Simulation time. Tick 0 starts Monday 00:00.

pub const TICK_SECONDS: u64 = 300;
pub const SECONDS_PER_DAY: u64 = 86_400;
pub const TICKS_PER_DAY: u64 = SECONDS_PER_DAY / TICK_SECONDS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimClock {
    pub tick: u64,
}

impl SimClock {
    pub const fn at(tick: u64) -> Self {
        Self { tick }
    }

    pub fn seconds(self) -> u64 {
        self.tick * TICK_SECONDS
    }

    pub fn day(self) -> u64 {
        self.seconds() / SECONDS_PER_DAY
    }

    pub fn second_of_day(self) -> u64 {
        self.seconds() % SECONDS_PER_DAY
    }

    pub fn local_hour(self) -> u32 {
        (self.second_of_day() / 3600) as u32
    }

    pub fn minute(self) -> u32 {
        ((self.second_of_day() % 3600) / 60) as u32
    }

    /// 0 = Monday ... 6 = Sunday.
    pub fn weekday(self) -> u32 {
        (self.day() % 7) as u32
    }

    /// True on the first tick of every day after the first.
    pub fn crosses_midnight(self) -> bool {
        self.tick > 0 && self.second_of_day() == 0
    }

    /// True on the last tick of a day.
    pub fn is_end_of_day(self) -> bool {
        self.second_of_day() + TICK_SECONDS == SECONDS_PER_DAY
    }
}

/// Daily hour windows. Windows may wrap past midnight (`start > end`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub work_start_hour: u32,
    pub work_end_hour: u32,
    /// Work happens on weekdays `0..work_days` (Monday first).
    pub work_days: u32,
    pub sleep_start_hour: u32,
    pub sleep_end_hour: u32,
    pub reeval_hour: u32,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { work_start_hour: 9, work_end_hour: 17, work_days: 5, sleep_start_hour: 22, sleep_end_hour: 6, reeval_hour: 4 }
    }
}

fn in_window(hour: u32, start: u32, end: u32) -> bool {
    if start <= end {
        hour >= start && hour < end
    } else {
        hour >= start || hour < end
    }
}

impl Schedule {
    pub fn is_work_hours(&self, clock: SimClock) -> bool {
        clock.weekday() < self.work_days && in_window(clock.local_hour(), self.work_start_hour, self.work_end_hour)
    }

    pub fn is_sleep_hours(&self, clock: SimClock) -> bool {
        in_window(clock.local_hour(), self.sleep_start_hour, self.sleep_end_hour)
    }

    pub fn check(&self) -> Result<(), String> {
        for (name, h) in [
            ("schedule.work_start_hour", self.work_start_hour),
            ("schedule.work_end_hour", self.work_end_hour),
            ("schedule.sleep_start_hour", self.sleep_start_hour),
            ("schedule.sleep_end_hour", self.sleep_end_hour),
            ("schedule.reeval_hour", self.reeval_hour),
        ] {
            if h > 23 {
                return Err(format!("{name} must be in 0..=23, got {h}"));
            }
        }
        if self.work_days > 7 {
            return Err(format!("schedule.work_days must be at most 7, got {}", self.work_days));
        }
        Ok(())
    }
}
