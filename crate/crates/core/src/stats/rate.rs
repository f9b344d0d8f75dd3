use serde::Serialize;

use super::store::{MetricStore, Sample, SeriesKey};

/// Default window for derived rates.
pub const DEFAULT_RATE_WINDOW_S: f64 = 60.0;

/// Per-second rate of a counter over the samples no older than `window_s`
/// before the newest one. A decrease is a reset: the rate is taken over the
/// run of samples after the last reset only. `None` without two samples.
pub fn counter_rate(samples: &[Sample], window_s: f64) -> Option<(f64, f64)> {
    let last = samples.last()?;
    let horizon = last.t_ms as f64 - window_s * 1000.0;
    let mut start = samples.partition_point(|s| (s.t_ms as f64) < horizon);
    for i in start + 1..samples.len() {
        if samples[i].value < samples[i - 1].value {
            start = i;
        }
    }
    let first = &samples[start];
    if first.t_ms >= last.t_ms {
        return None;
    }
    let span = (last.t_ms - first.t_ms) as f64 / 1000.0;
    Some(((last.value - first.value) / span, span))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSample {
    pub bits_in_per_sec: f64,
    pub bits_out_per_sec: f64,
    pub pkts_in_per_sec: f64,
    pub pkts_out_per_sec: f64,
    pub drops_in_per_sec: f64,
    pub drops_out_per_sec: f64,
    pub errors_in_per_sec: f64,
    pub errors_out_per_sec: f64,
    pub window_seconds: f64,
}

fn rate_of(store: &MetricStore, name: &str, dp: &str, port: u32, window_s: f64) -> Option<(f64, f64)> {
    let ring = store.samples(&SeriesKey::port(name, dp, port))?;
    let samples: Vec<Sample> = ring.iter().copied().collect();
    counter_rate(&samples, window_s)
}

/// Rates for one port, or `None` when there is no data yet.
pub fn compute_rates(store: &MetricStore, dp: &str, port: u32, window_s: f64) -> Option<RateSample> {
    let r = |name: &str| rate_of(store, name, dp, port, window_s);
    let (rx_bytes, window_seconds) = r("sdx_port_rx_bytes_total")?;
    Some(RateSample {
        bits_in_per_sec: rx_bytes * 8.0,
        bits_out_per_sec: r("sdx_port_tx_bytes_total")?.0 * 8.0,
        pkts_in_per_sec: r("sdx_port_rx_packets_total")?.0,
        pkts_out_per_sec: r("sdx_port_tx_packets_total")?.0,
        drops_in_per_sec: r("sdx_port_rx_dropped_total")?.0,
        drops_out_per_sec: r("sdx_port_tx_dropped_total")?.0,
        errors_in_per_sec: r("sdx_port_rx_errors_total")?.0,
        errors_out_per_sec: r("sdx_port_tx_errors_total")?.0,
        window_seconds,
    })
}
