//! The process's own CPU and memory use, read from /proc.

use std::time::Instant;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ProcessSample {
    /// CPU time over wall time since the previous sample, as a percentage of
    /// one core.
    pub cpu_percent: f64,
    pub cpu_seconds_total: f64,
    pub resident_memory_bytes: u64,
    pub virtual_memory_bytes: u64,
}

struct StatLine {
    cpu_seconds: f64,
    start_seconds: f64,
    vsize: u64,
    rss_pages: u64,
}

fn read_stat() -> Option<StatLine> {
    let text = std::fs::read_to_string("/proc/self/stat").ok()?;
    // fields after the parenthesised command name, starting at field 3
    let rest = &text[text.rfind(')')? + 2..];
    let f: Vec<&str> = rest.split_whitespace().collect();
    let ticks = unsafe { libc::sysconf(libc::_SC_CLK_TCK) }.max(1) as f64;
    let num = |i: usize| f.get(i - 3).and_then(|s| s.parse::<u64>().ok());
    Some(StatLine {
        cpu_seconds: (num(14)? + num(15)?) as f64 / ticks,
        start_seconds: num(22)? as f64 / ticks,
        vsize: num(23)?,
        rss_pages: num(24)?,
    })
}

fn uptime_seconds() -> Option<f64> {
    std::fs::read_to_string("/proc/uptime")
        .ok()?
        .split_whitespace()
        .next()?
        .parse()
        .ok()
}

/// Samples successive CPU deltas; the first sample averages over the
/// process's lifetime.
#[derive(Debug, Default)]
pub struct ProcessSampler {
    prev: Option<(Instant, f64)>,
}

impl ProcessSampler {
    pub fn new() -> Self {
        ProcessSampler::default()
    }

    pub fn sample(&mut self) -> Option<ProcessSample> {
        let stat = read_stat()?;
        let now = Instant::now();
        let page = unsafe { libc::sysconf(libc::_SC_PAGESIZE) }.max(1) as u64;
        let cpu_percent = match self.prev {
            Some((t, cpu)) => {
                let wall = now.duration_since(t).as_secs_f64();
                if wall > 0.0 {
                    (stat.cpu_seconds - cpu) / wall * 100.0
                } else {
                    0.0
                }
            }
            None => {
                let alive = uptime_seconds().map(|u| u - stat.start_seconds).unwrap_or(0.0);
                if alive > 0.0 {
                    stat.cpu_seconds / alive * 100.0
                } else {
                    0.0
                }
            }
        };
        self.prev = Some((now, stat.cpu_seconds));
        Some(ProcessSample {
            cpu_percent: cpu_percent.max(0.0),
            cpu_seconds_total: stat.cpu_seconds,
            resident_memory_bytes: stat.rss_pages * page,
            virtual_memory_bytes: stat.vsize,
        })
    }
}
