//! Prometheus text exposition format, version 0.0.4.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::process::ProcessSample;
use super::rate::{compute_rates, RateSample};
use super::store::{MetricStore, PORT_COUNTERS};

pub const CONTENT_TYPE: &str = "text/plain; version=0.0.4";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Counter,
    Gauge,
}

struct Family {
    help: &'static str,
    kind: Kind,
    rows: Vec<(Vec<(String, String)>, f64)>,
}

fn help_for(name: &str) -> &'static str {
    match name {
        "sdx_port_rx_packets_total" => "Packets received on the port.",
        "sdx_port_tx_packets_total" => "Packets transmitted on the port.",
        "sdx_port_rx_bytes_total" => "Bytes received on the port.",
        "sdx_port_tx_bytes_total" => "Bytes transmitted on the port.",
        "sdx_port_rx_dropped_total" => "Received packets dropped by the port.",
        "sdx_port_tx_dropped_total" => "Transmit packets dropped by the port.",
        "sdx_port_rx_errors_total" => "Receive errors on the port.",
        "sdx_port_tx_errors_total" => "Transmit errors on the port.",
        _ => "Stored series.",
    }
}

fn escape_label(v: &str) -> String {
    v.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

fn value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == f64::INFINITY {
        "+Inf".into()
    } else if v == f64::NEG_INFINITY {
        "-Inf".into()
    } else {
        format!("{v}")
    }
}

fn rate_rows(r: &RateSample) -> [(&'static str, &'static str, f64); 8] {
    [
        ("sdx_port_rx_bits_per_second", "Received bits per second over the rate window.", r.bits_in_per_sec),
        ("sdx_port_tx_bits_per_second", "Transmitted bits per second over the rate window.", r.bits_out_per_sec),
        ("sdx_port_rx_packets_per_second", "Received packets per second over the rate window.", r.pkts_in_per_sec),
        ("sdx_port_tx_packets_per_second", "Transmitted packets per second over the rate window.", r.pkts_out_per_sec),
        ("sdx_port_rx_dropped_per_second", "Receive drops per second over the rate window.", r.drops_in_per_sec),
        ("sdx_port_tx_dropped_per_second", "Transmit drops per second over the rate window.", r.drops_out_per_sec),
        ("sdx_port_rx_errors_per_second", "Receive errors per second over the rate window.", r.errors_in_per_sec),
        ("sdx_port_tx_errors_per_second", "Transmit errors per second over the rate window.", r.errors_out_per_sec),
    ]
}

/// Render the latest value of every series, derived port rates, scrape
/// bookkeeping and process self-metrics. Families are sorted by name and
/// rows by label values, so equal inputs render identically.
pub fn render_exposition(store: &MetricStore, process: Option<&ProcessSample>, rate_window_s: f64) -> String {
    let mut fams: BTreeMap<String, Family> = BTreeMap::new();
    let mut add = |name: &str, help: &'static str, kind: Kind, labels: Vec<(String, String)>, v: f64| {
        fams.entry(name.to_string())
            .or_insert_with(|| Family { help, kind, rows: Vec::new() })
            .rows
            .push((labels, v));
    };

    for (key, ring) in store.series() {
        if let Some(last) = ring.back() {
            let kind = if key.name.ends_with("_total") { Kind::Counter } else { Kind::Gauge };
            add(&key.name, help_for(&key.name), kind, key.labels.clone(), last.value);
        }
    }
    debug_assert!(PORT_COUNTERS.iter().all(|(n, _)| n.ends_with("_total")));
    for (dp, port) in store.ports() {
        if let Some(r) = compute_rates(store, &dp, port, rate_window_s) {
            let labels = vec![("dp".to_string(), dp.clone()), ("port".to_string(), port.to_string())];
            for (name, help, v) in rate_rows(&r) {
                add(name, help, Kind::Gauge, labels.clone(), v);
            }
        }
    }
    for (target, meta) in store.scrape_targets() {
        let labels = vec![("target".to_string(), target.clone())];
        add("sdx_scrape_duration_seconds", "Wall time of the last scrape of the target.", Kind::Gauge, labels.clone(), meta.scrape_duration_seconds);
        add("sdx_scrape_samples_appended_total", "Samples stored from the target.", Kind::Counter, labels.clone(), meta.samples_appended as f64);
        add("sdx_scrape_last_success", "Whether the last scrape of the target succeeded.", Kind::Gauge, labels, if meta.last_success { 1.0 } else { 0.0 });
    }
    if store.samples_appended() > 0 {
        add("sdx_samples_appended_total", "Samples appended to the store.", Kind::Counter, Vec::new(), store.samples_appended() as f64);
    }
    if let Some(p) = process {
        add("process_cpu_percent", "Process CPU use as a percentage of one core.", Kind::Gauge, Vec::new(), p.cpu_percent);
        add("process_cpu_seconds_total", "User and system CPU time of the process.", Kind::Counter, Vec::new(), p.cpu_seconds_total);
        add("process_resident_memory_bytes", "Resident memory size of the process.", Kind::Gauge, Vec::new(), p.resident_memory_bytes as f64);
        add("process_virtual_memory_bytes", "Virtual memory size of the process.", Kind::Gauge, Vec::new(), p.virtual_memory_bytes as f64);
    }

    let mut out = String::new();
    for (name, mut fam) in fams {
        let _ = writeln!(out, "# HELP {name} {}", fam.help);
        let kind = match fam.kind {
            Kind::Counter => "counter",
            Kind::Gauge => "gauge",
        };
        let _ = writeln!(out, "# TYPE {name} {kind}");
        fam.rows.sort_by(|a, b| label_order(&a.0).cmp(&label_order(&b.0)));
        for (labels, v) in fam.rows {
            out.push_str(&name);
            if !labels.is_empty() {
                out.push('{');
                for (i, (k, lv)) in labels.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{k}=\"{}\"", escape_label(lv));
                }
                out.push('}');
            }
            let _ = writeln!(out, " {}", value(v));
        }
    }
    out
}

/// Label values in order, numeric ones compared as numbers.
fn label_order(labels: &[(String, String)]) -> Vec<(Option<u64>, String)> {
    labels.iter().map(|(_, v)| (v.parse().ok(), v.clone())).collect()
}
