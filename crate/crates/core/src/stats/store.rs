use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::ofp::PortStatsEntry;

/// Default retention: 4 hours at 15 s resolution.
pub const DEFAULT_CAPACITY: usize = 960;
const DURATION_HISTORY: usize = 1024;

/// Per-port counters recorded from each PORT_STATS reply, with the metric
/// name each is stored under.
pub const PORT_COUNTERS: [(&str, fn(&PortStatsEntry) -> u64); 8] = [
    ("sdx_port_rx_packets_total", |e| e.rx_packets),
    ("sdx_port_tx_packets_total", |e| e.tx_packets),
    ("sdx_port_rx_bytes_total", |e| e.rx_bytes),
    ("sdx_port_tx_bytes_total", |e| e.tx_bytes),
    ("sdx_port_rx_dropped_total", |e| e.rx_dropped),
    ("sdx_port_tx_dropped_total", |e| e.tx_dropped),
    ("sdx_port_rx_errors_total", |e| e.rx_errors),
    ("sdx_port_tx_errors_total", |e| e.tx_errors),
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SeriesKey {
    pub name: String,
    pub labels: Vec<(String, String)>,
}

impl SeriesKey {
    pub fn new(name: &str, labels: &[(&str, &str)]) -> Self {
        SeriesKey {
            name: name.to_string(),
            labels: labels.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn port(name: &str, dp: &str, port: u32) -> Self {
        SeriesKey::new(name, &[("dp", dp), ("port", &port.to_string())])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t_ms: u64,
    pub value: f64,
    /// The value went down relative to the previous sample.
    pub reset: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("sample at {t_ms} ms is not after the series' last sample at {last_ms} ms")]
    NonMonotonicTime { t_ms: u64, last_ms: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScrapeMeta {
    pub scrape_duration_seconds: f64,
    pub samples_appended: u64,
    pub last_success: bool,
    pub scrapes: u64,
    #[serde(skip)]
    pub durations: VecDeque<f64>,
}

impl ScrapeMeta {
    /// Nearest-rank percentile over the retained scrape durations.
    pub fn duration_percentile(&self, q: f64) -> Option<f64> {
        if self.durations.is_empty() {
            return None;
        }
        let mut d: Vec<f64> = self.durations.iter().copied().collect();
        d.sort_by(f64::total_cmp);
        let rank = ((q * d.len() as f64).ceil() as usize).clamp(1, d.len());
        Some(d[rank - 1])
    }
}

/// In-memory time series: one bounded ring of samples per series.
#[derive(Debug, Clone)]
pub struct MetricStore {
    capacity: usize,
    series: BTreeMap<SeriesKey, VecDeque<Sample>>,
    scrapes: BTreeMap<String, ScrapeMeta>,
    samples_appended: u64,
}

impl Default for MetricStore {
    fn default() -> Self {
        MetricStore::new(DEFAULT_CAPACITY)
    }
}

impl MetricStore {
    pub fn new(capacity: usize) -> Self {
        MetricStore {
            capacity: capacity.max(2),
            series: BTreeMap::new(),
            scrapes: BTreeMap::new(),
            samples_appended: 0,
        }
    }

    pub fn append(&mut self, key: SeriesKey, t_ms: u64, value: f64) -> Result<(), StoreError> {
        let ring = self.series.entry(key).or_default();
        let reset = match ring.back() {
            Some(last) if t_ms <= last.t_ms => {
                return Err(StoreError::NonMonotonicTime {
                    t_ms,
                    last_ms: last.t_ms,
                })
            }
            Some(last) => value < last.value,
            None => false,
        };
        if ring.len() == self.capacity {
            ring.pop_front();
        }
        ring.push_back(Sample { t_ms, value, reset });
        self.samples_appended += 1;
        Ok(())
    }

    /// Append every counter of a PORT_STATS reply; returns samples written.
    pub fn record_port_stats(&mut self, dp: &str, entries: &[PortStatsEntry], t_ms: u64) -> Result<u64, StoreError> {
        let mut n = 0;
        for e in entries {
            for (name, get) in PORT_COUNTERS {
                self.append(SeriesKey::port(name, dp, e.port_no), t_ms, get(e) as f64)?;
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn record_scrape(&mut self, target: &str, duration_seconds: f64, success: bool, appended: u64) {
        let meta = self.scrapes.entry(target.to_string()).or_default();
        meta.scrape_duration_seconds = duration_seconds.max(0.0);
        meta.last_success = success;
        meta.samples_appended += appended;
        meta.scrapes += 1;
        if meta.durations.len() == DURATION_HISTORY {
            meta.durations.pop_front();
        }
        meta.durations.push_back(meta.scrape_duration_seconds);
    }

    pub fn samples(&self, key: &SeriesKey) -> Option<&VecDeque<Sample>> {
        self.series.get(key)
    }

    pub fn series(&self) -> impl Iterator<Item = (&SeriesKey, &VecDeque<Sample>)> {
        self.series.iter()
    }

    pub fn series_count(&self) -> usize {
        self.series.len()
    }

    pub fn scrape_meta(&self, target: &str) -> Option<&ScrapeMeta> {
        self.scrapes.get(target)
    }

    pub fn scrape_targets(&self) -> impl Iterator<Item = (&String, &ScrapeMeta)> {
        self.scrapes.iter()
    }

    pub fn samples_appended(&self) -> u64 {
        self.samples_appended
    }

    /// (dp, port) pairs with at least one stored counter.
    pub fn ports(&self) -> Vec<(String, u32)> {
        let mut out: Vec<(String, u32)> = self
            .series
            .keys()
            .filter(|k| k.name == PORT_COUNTERS[0].0)
            .filter_map(|k| {
                let dp = k.labels.iter().find(|(n, _)| n == "dp")?.1.clone();
                let port = k.labels.iter().find(|(n, _)| n == "port")?.1.parse().ok()?;
                Some((dp, port))
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}
