//! Drift-free periodic schedule: ticks at `anchor + k * interval`
//! regardless of how long captures take; overrunning captures cause tick
//! skips, never overlap.

use std::sync::{Arc, Mutex};

use chrono::{Duration, NaiveDateTime, Utc};
use log::{info, warn};

use crate::error::{Error, Result};

/// Time source the scheduler runs against.
pub trait Clock {
    fn now(&self) -> NaiveDateTime;
    /// Block until the clock reaches `t`.
    fn sleep_until(&self, t: NaiveDateTime);
}

/// Wall-clock time in UTC.
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> NaiveDateTime {
        Utc::now().naive_utc()
    }

    fn sleep_until(&self, t: NaiveDateTime) {
        loop {
            let now = self.now();
            if now >= t {
                return;
            }
            let remaining = (t - now).to_std().unwrap_or_default();
            std::thread::sleep(remaining.min(std::time::Duration::from_secs(60)));
        }
    }
}

/// Simulated clock for tests; cloned handles share the same time. Sleeping
/// jumps the clock forward, and jobs advance it explicitly.
#[derive(Clone)]
pub struct SimClock(Arc<Mutex<NaiveDateTime>>);

impl SimClock {
    pub fn new(start: NaiveDateTime) -> Self {
        SimClock(Arc::new(Mutex::new(start)))
    }

    pub fn advance(&self, by: Duration) {
        let mut t = self.0.lock().unwrap();
        *t += by;
    }
}

impl Clock for SimClock {
    fn now(&self) -> NaiveDateTime {
        *self.0.lock().unwrap()
    }

    fn sleep_until(&self, t: NaiveDateTime) {
        let mut now = self.0.lock().unwrap();
        if *now < t {
            *now = t;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickKind {
    Fired,
    /// The previous capture was still running at this tick time.
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickRecord {
    pub scheduled: NaiveDateTime,
    pub kind: TickKind,
}

/// Run `job` at `anchor + k * interval` until `until` (exclusive) or until
/// `stop` returns true. Tick times are computed from the anchor, never from
/// completion times. At most one job runs at a time; ticks falling inside a
/// running job are skipped and logged.
///
/// Job panics are not caught; the job itself is expected to absorb capture
/// failures and report them through its own channel.
pub fn run_schedule<C: Clock>(
    clock: &C,
    interval: Duration,
    anchor: NaiveDateTime,
    until: Option<NaiveDateTime>,
    mut stop: impl FnMut() -> bool,
    mut job: impl FnMut(NaiveDateTime),
) -> Result<Vec<TickRecord>> {
    if interval <= Duration::zero() {
        return Err(Error::domain("interval", "must be > 0"));
    }
    let mut ticks = Vec::new();

    // first tick at or after max(now, anchor)
    let now = clock.now();
    let mut k: i64 = if now <= anchor {
        0
    } else {
        let elapsed = now - anchor;
        let quot = elapsed.num_milliseconds() as f64 / interval.num_milliseconds() as f64;
        quot.ceil() as i64
    };

    loop {
        let tick = anchor + interval * (k as i32);
        if let Some(end) = until {
            if tick >= end {
                break;
            }
        }
        if stop() {
            break;
        }
        clock.sleep_until(tick);
        if stop() {
            break;
        }
        info!("schedule tick at {tick}");
        job(tick);
        ticks.push(TickRecord {
            scheduled: tick,
            kind: TickKind::Fired,
        });
        k += 1;
        // skip any ticks that elapsed while the job ran
        while anchor + interval * (k as i32) < clock.now() {
            let missed = anchor + interval * (k as i32);
            warn!("skipping tick {missed}: previous capture still running");
            ticks.push(TickRecord {
                scheduled: missed,
                kind: TickKind::Skipped,
            });
            k += 1;
        }
    }
    Ok(ticks)
}

/// The cron line equivalent to an interval schedule, for users who prefer
/// the system cron daemon. Only whole-hour intervals map onto cron fields.
pub fn crontab_line(interval: Duration, command: &str) -> Option<String> {
    let hours = interval.num_hours();
    if hours < 1 || interval != Duration::hours(hours) || 24 % hours != 0 {
        return None;
    }
    if hours == 1 {
        Some(format!("0 * * * * {command}"))
    } else {
        Some(format!("0 */{hours} * * * {command}"))
    }
}
