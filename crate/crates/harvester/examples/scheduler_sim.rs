//! Drive the capture schedule under a simulated clock: a 3-hour cadence
//! fires 8 ticks per day on an exact lattice, and an overrunning capture
//! skips ticks instead of drifting or overlapping.

use chrono::{Duration, NaiveDate};
use congestion_harvester::acquisition::{run_schedule, SimClock, TickKind};

fn main() {
    let midnight = NaiveDate::from_ymd_opt(2020, 6, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let clock = SimClock::new(midnight);
    let job_clock = clock.clone();

    let mut n = 0;
    let ticks = run_schedule(
        &clock,
        Duration::hours(3),
        midnight,
        Some(midnight + Duration::days(1)),
        || false,
        |t| {
            n += 1;
            // make the third capture overrun its slot by 2.5 intervals
            let took = if n == 3 {
                Duration::minutes(450)
            } else {
                Duration::minutes(4)
            };
            job_clock.advance(took);
            println!("capture at {t} (took {} min)", took.num_minutes());
        },
    )
    .unwrap();

    for tick in &ticks {
        if tick.kind == TickKind::Skipped {
            println!("skipped tick {} (previous capture still running)", tick.scheduled);
        }
    }
    let fired = ticks.iter().filter(|t| t.kind == TickKind::Fired).count();
    println!("{fired} fired + {} skipped = 8 ticks", ticks.len() - fired);
}
