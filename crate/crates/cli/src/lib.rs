//! sdxctl: validates and compiles configurations locally, generates ACL
//! snippets, and drives a running service through its admin API.
//!
//! Exit codes: 0 success, 2 unreadable or unparseable input, 3 a
//! configuration that parses but is invalid, 4 the service failed or
//! could not be reached.

pub mod client;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sdx_core::compile::compile_datapath;
use sdx_core::config::{
    acl_rules, fingerprint, parse_config, render_acl, AclKind, ConfigError, FabricConfig, PortNo, RuleMatch,
};
use serde_json::{json, Value};

use client::{ApiClient, ApiResponse, ClientError, DEFAULT_API};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_INVALID: u8 = 3;
pub const EXIT_REMOTE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "sdxctl", version, about = "Control an SDX fabric")]
pub struct Cli {
    /// Base URL of the admin API.
    #[arg(long, global = true, env = "SDX_API", default_value = DEFAULT_API)]
    pub api: String,
    /// Bearer token.
    #[arg(long, global = true, env = "SDX_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Request timeout in seconds.
    #[arg(long, global = true, default_value_t = 30.0)]
    pub timeout: f64,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a configuration file.
    Validate { file: PathBuf },
    /// Print the flow table a configuration compiles to.
    Compile {
        file: PathBuf,
        /// Only this datapath.
        #[arg(long)]
        dp: Option<String>,
    },
    /// Stage a configuration file on the service and apply it.
    Apply { file: PathBuf },
    /// Controller status.
    Status,
    /// Port rates and recent samples.
    Stats {
        #[arg(long)]
        dp: String,
        #[arg(long)]
        port: PortNo,
        /// Rate window in seconds; the service default if omitted.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Print an ACL snippet for the `acls:` section.
    GenAcl(GenAcl),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AclChoice {
    Mirror,
    Block,
    Redirect,
    AllowAll,
}

#[derive(Debug, Args)]
pub struct GenAcl {
    pub kind: AclChoice,
    /// Mirror or redirect target port.
    #[arg(long)]
    pub to: Option<PortNo>,
    /// Keep forwarding mirrored traffic.
    #[arg(long)]
    pub allow: bool,
    /// ACL name; defaults to the kind.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub ipv4_icmp: bool,
    #[arg(long)]
    pub ipv6_icmp: bool,
    #[arg(long)]
    pub ipv4: bool,
    #[arg(long)]
    pub ipv6: bool,
    #[arg(long)]
    pub arp: bool,
    /// IPv4 TCP.
    #[arg(long)]
    pub tcp: bool,
    /// IPv4 UDP.
    #[arg(long)]
    pub udp: bool,
    /// Any EtherType, e.g. 0x88cc.
    #[arg(long, value_parser = parse_u16)]
    pub dl_type: Option<u16>,
    /// IP protocol number; needs --dl-type.
    #[arg(long, requires = "dl_type")]
    pub ip_proto: Option<u8>,
}

fn parse_u16(s: &str) -> Result<u16, String> {
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u16::from_str_radix(hex, 16),
        None => s.parse(),
    };
    r.map_err(|e| format!("{s}: {e}"))
}

/// What a command printed and how it exited.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub out: String,
    pub err: String,
}

impl Outcome {
    fn ok(out: String) -> Self {
        Outcome {
            code: EXIT_OK,
            out,
            err: String::new(),
        }
    }

    fn fail(code: u8, err: impl Into<String>) -> Self {
        Outcome {
            code,
            out: String::new(),
            err: err.into(),
        }
    }

    fn with_out(mut self, out: String) -> Self {
        self.out = out;
        self
    }
}

fn pretty(v: &Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(v).expect("json"))
}

pub fn run(cli: Cli) -> Outcome {
    let timeout = Duration::from_secs_f64(cli.timeout.max(0.1));
    let client = ApiClient::new(&cli.api, cli.token.clone(), timeout);
    match &cli.cmd {
        Command::Validate { file } => validate_cmd(file, cli.json),
        Command::Compile { file, dp } => compile_cmd(file, dp.as_deref(), cli.json),
        Command::Apply { file } => apply_cmd(&client, file, cli.json),
        Command::Status => status_cmd(&client, cli.json),
        Command::Stats { dp, port, window } => stats_cmd(&client, dp, *port, *window, cli.json),
        Command::GenAcl(g) => gen_acl_cmd(g, cli.json),
    }
}

fn config_failure(file: &Path, e: &ConfigError, as_json: bool) -> Outcome {
    let code = if e.code.is_parse_error() { EXIT_PARSE } else { EXIT_INVALID };
    if as_json {
        let out = pretty(&json!({ "file": file.display().to_string(), "valid": false, "error": e }));
        return Outcome { code, out, err: String::new() };
    }
    let mut err = format!("{}: {e}\n", file.display());
    if e.violations.len() > 1 {
        for v in &e.violations {
            let _ = writeln!(err, "  {v}");
        }
    }
    Outcome::fail(code, err)
}

/// Read and parse a configuration; the failure is ready to return.
fn load(file: &Path, as_json: bool) -> Result<FabricConfig, Outcome> {
    let text = std::fs::read_to_string(file).map_err(|e| Outcome::fail(EXIT_PARSE, format!("{}: {e}\n", file.display())))?;
    parse_config(&text).map_err(|e| config_failure(file, &e, as_json))
}

fn validate_cmd(file: &Path, as_json: bool) -> Outcome {
    let cfg = match load(file, as_json) {
        Ok(c) => c,
        Err(o) => return o,
    };
    let fp = fingerprint(&cfg);
    if as_json {
        return Outcome::ok(pretty(&json!({
            "file": file.display().to_string(),
            "valid": true,
            "fingerprint": fp,
            "vlans": cfg.vlans.len(),
            "datapaths": cfg.dps.len(),
            "acls": cfg.acls.len(),
        })));
    }
    Outcome::ok(format!(
        "{}: ok ({} vlans, {} datapaths, {} acls; fingerprint {})\n",
        file.display(),
        cfg.vlans.len(),
        cfg.dps.len(),
        cfg.acls.len(),
        &fp[..12.min(fp.len())]
    ))
}

fn compile_cmd(file: &Path, only: Option<&str>, as_json: bool) -> Outcome {
    let cfg = match load(file, as_json) {
        Ok(c) => c,
        Err(o) => return o,
    };
    let names: Vec<&str> = match only {
        Some(dp) if !cfg.dps.contains_key(dp) => {
            return Outcome::fail(EXIT_INVALID, format!("{}: no datapath '{dp}'\n", file.display()));
        }
        Some(dp) => vec![dp],
        None => cfg.dps.keys().map(String::as_str).collect(),
    };
    let mut out = String::new();
    let mut tables = Vec::new();
    for name in names {
        let table = match compile_datapath(&cfg, name) {
            Ok(t) => t,
            Err(e) => return Outcome::fail(EXIT_INVALID, format!("{name}: {e}\n")),
        };
        if as_json {
            tables.push(json!({
                "dp": name,
                "dp_id": format!("{:#x}", table.dp_id),
                "fingerprint": table.fingerprint,
                "entries": table.entries.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            }));
        } else {
            if only.is_none() {
                let _ = writeln!(out, "# {name} ({:#x})", table.dp_id);
            }
            out.push_str(&table.dump());
        }
    }
    if as_json {
        out = pretty(&Value::Array(tables));
    }
    Outcome::ok(out)
}

/// Map a non-2xx answer to an exit code: rejected configurations are
/// invalid input, everything else is a service failure.
fn remote_failure(resp: &ApiResponse, as_json: bool) -> Outcome {
    let code = if resp.status == 422 || resp.status == 409 {
        EXIT_INVALID
    } else {
        EXIT_REMOTE
    };
    let mut o = Outcome::fail(code, format!("{}\n", resp.error_message()));
    if as_json {
        if let Some(v) = resp.json() {
            o = o.with_out(pretty(&v));
        }
    }
    o
}

fn unreachable(e: ClientError) -> Outcome {
    Outcome::fail(EXIT_REMOTE, format!("{e}\n"))
}

fn apply_cmd(client: &ApiClient, file: &Path, as_json: bool) -> Outcome {
    let cfg = match load(file, as_json) {
        Ok(c) => c,
        Err(o) => return o,
    };
    let text = std::fs::read_to_string(file).unwrap_or_default();
    let staged = match client.put("/config/yaml", "application/yaml", text) {
        Ok(r) if r.ok() => r,
        Ok(r) => return remote_failure(&r, as_json),
        Err(e) => return unreachable(e),
    };
    let staged_fp = staged.json().and_then(|v| v["staged_fingerprint"].as_str().map(str::to_string));
    if staged_fp.as_deref() != Some(fingerprint(&cfg).as_str()) {
        return Outcome::fail(EXIT_REMOTE, "service staged a different document than was sent\n");
    }
    let resp = match client.post("/config/apply", "application/json", "{}".into()) {
        Ok(r) => r,
        Err(e) => return unreachable(e),
    };
    let Some(body) = resp.json() else {
        return Outcome::fail(EXIT_REMOTE, format!("{}\n", resp.error_message()));
    };
    let report = if resp.ok() { &body } else { &body["report"] };
    if !resp.ok() && report.is_null() {
        return remote_failure(&resp, as_json);
    }
    let out = if as_json { pretty(&body) } else { render_report(report) };
    if resp.ok() {
        Outcome::ok(out)
    } else {
        Outcome {
            code: EXIT_REMOTE,
            out,
            err: format!("{}\n", resp.error_message()),
        }
    }
}

fn names(v: &Value) -> Vec<&str> {
    v.as_array().map(|a| a.iter().filter_map(Value::as_str).collect()).unwrap_or_default()
}

fn render_report(r: &Value) -> String {
    let mut out = String::new();
    for d in r["datapaths"].as_array().into_iter().flatten() {
        let _ = writeln!(
            out,
            "{} ({}): +{} -{} ~{}, {} flow-mods{} in {:.1} ms",
            d["dp"].as_str().unwrap_or("?"),
            d["dp_id"].as_str().unwrap_or("?"),
            d["added"],
            d["removed"],
            d["modified"],
            d["flow_mods"],
            if d["learned_flushed"] == true { ", learned flows flushed" } else { "" },
            d["duration_ms"].as_f64().unwrap_or(0.0),
        );
    }
    for (label, key) in [("deferred", "deferred"), ("disconnected", "disconnected"), ("FAILED", "failed")] {
        let list = names(&r[key]);
        if !list.is_empty() {
            let _ = writeln!(out, "{label}: {}", list.join(", "));
        }
    }
    let _ = writeln!(out, "fingerprint {}", r["fingerprint"].as_str().unwrap_or("?"));
    out
}

fn get_json(client: &ApiClient, path: &str, as_json: bool) -> Result<Option<Value>, Outcome> {
    match client.get(path) {
        Ok(r) if r.status == 204 => Ok(None),
        Ok(r) if r.ok() => r
            .json()
            .map(Some)
            .ok_or_else(|| Outcome::fail(EXIT_REMOTE, format!("{} returned a body that is not JSON\n", path))),
        Ok(r) => Err(remote_failure(&r, as_json)),
        Err(e) => Err(unreachable(e)),
    }
}

/// 1234567 -> "1.23 M"
pub fn si(v: f64) -> String {
    let (scaled, unit) = [(1e12, "T"), (1e9, "G"), (1e6, "M"), (1e3, "k")]
        .into_iter()
        .find(|(s, _)| v.abs() >= *s)
        .map(|(s, u)| (v / s, u))
        .unwrap_or((v, ""));
    format!("{scaled:.2} {unit}").trim_end().to_string()
}

fn status_cmd(client: &ApiClient, as_json: bool) -> Outcome {
    let s = match get_json(client, "/status", as_json) {
        Ok(Some(v)) => v,
        Ok(None) => return Outcome::fail(EXIT_REMOTE, "empty status\n"),
        Err(o) => return o,
    };
    if as_json {
        return Outcome::ok(pretty(&s));
    }
    let up = |b: &Value| if b == true { "up" } else { "DOWN" };
    let mut out = String::new();
    let _ = writeln!(out, "active config  {}", s["active_fingerprint"].as_str().unwrap_or("?"));
    let _ = writeln!(
        out,
        "roles          controller {}, stats_poller {}",
        up(&s["roles"]["controller"]),
        up(&s["roles"]["stats_poller"])
    );
    let _ = writeln!(
        out,
        "process        cpu {:.1}%, rss {}B, vsz {}B",
        s["cpu_percent"].as_f64().unwrap_or(0.0),
        si(s["resident_memory_bytes"].as_f64().unwrap_or(0.0)),
        si(s["virtual_memory_bytes"].as_f64().unwrap_or(0.0)),
    );
    out.push_str("endpoints\n");
    for e in s["endpoints"].as_array().into_iter().flatten() {
        let _ = writeln!(
            out,
            "  {:<8} {:<22} {}",
            e["name"].as_str().unwrap_or("?"),
            e["address"].as_str().unwrap_or("?"),
            if e["listening"] == true { "listening" } else { "down" }
        );
    }
    out.push_str("sessions\n");
    for x in s["sessions"].as_array().into_iter().flatten() {
        let rtt = x["echo_rtt_ms"].as_f64().map(|r| format!("rtt {r:.2} ms")).unwrap_or_else(|| "rtt -".into());
        let _ = writeln!(
            out,
            "  {:<8} {:<6} {:<9} {:<14} {}",
            x["dp"].as_str().unwrap_or("?"),
            x["dp_id"].as_str().unwrap_or("?"),
            x["state"].as_str().unwrap_or("?"),
            rtt,
            x["peer"].as_str().unwrap_or("?"),
        );
    }
    let _ = writeln!(out, "rejected sessions: {}", s["rejected_sessions"]);
    Outcome::ok(out)
}

fn stats_cmd(client: &ApiClient, dp: &str, port: PortNo, window: Option<f64>, as_json: bool) -> Outcome {
    let mut path = format!("/stats/ports?dp={dp}&port={port}");
    if let Some(w) = window {
        let _ = write!(path, "&window={w}");
    }
    let v = match get_json(client, &path, as_json) {
        Ok(Some(v)) => v,
        Ok(None) => {
            let out = if as_json {
                pretty(&json!({ "dp": dp, "port": port, "rates": null }))
            } else {
                format!("{dp}:{port}: not enough samples yet\n")
            };
            return Outcome::ok(out);
        }
        Err(o) => return o,
    };
    if as_json {
        return Outcome::ok(pretty(&v));
    }
    let r = &v["rates"];
    let f = |k: &str| si(r[k].as_f64().unwrap_or(0.0));
    let mut out = format!("{dp}:{port} over {} s\n", v["window_seconds"]);
    let _ = writeln!(out, "{:<12}{:>12}{:>12}", "", "in", "out");
    for (label, i, o) in [
        ("bits/s", "bits_in_per_sec", "bits_out_per_sec"),
        ("packets/s", "pkts_in_per_sec", "pkts_out_per_sec"),
        ("drops/s", "drops_in_per_sec", "drops_out_per_sec"),
        ("errors/s", "errors_in_per_sec", "errors_out_per_sec"),
    ] {
        let _ = writeln!(out, "{label:<12}{:>12}{:>12}", f(i), f(o));
    }
    Outcome::ok(out)
}

fn gen_acl_cmd(g: &GenAcl, as_json: bool) -> Outcome {
    let kind = match (g.kind, g.to) {
        (AclChoice::Mirror, Some(to)) => AclKind::Mirror { to, allow: g.allow },
        (AclChoice::Redirect, Some(to)) => AclKind::Redirect { to },
        (AclChoice::Mirror | AclChoice::Redirect, None) => {
            return Outcome::fail(EXIT_PARSE, "--to is required for mirror and redirect\n");
        }
        (AclChoice::Block, _) => AclKind::Block,
        (AclChoice::AllowAll, _) => AclKind::AllowAll,
    };
    let mut matches = Vec::new();
    let ipv4 = |p| RuleMatch {
        dl_type: Some(0x0800),
        ip_proto: Some(p),
    };
    for (on, m) in [
        (g.ipv4_icmp, RuleMatch::IPV4_ICMP),
        (g.ipv6_icmp, RuleMatch::IPV6_ICMP),
        (g.ipv4, RuleMatch { dl_type: Some(0x0800), ip_proto: None }),
        (g.ipv6, RuleMatch { dl_type: Some(0x86dd), ip_proto: None }),
        (g.arp, RuleMatch { dl_type: Some(0x0806), ip_proto: None }),
        (g.tcp, ipv4(6)),
        (g.udp, ipv4(17)),
    ] {
        if on {
            matches.push(m);
        }
    }
    if let Some(t) = g.dl_type {
        matches.push(RuleMatch {
            dl_type: Some(t),
            ip_proto: g.ip_proto,
        });
    }
    let rules = acl_rules(kind, &matches);
    let name = g.name.clone().unwrap_or_else(|| kind.default_name().to_string());
    if as_json {
        return Outcome::ok(pretty(&json!({ "name": name, "rules": rules })));
    }
    Outcome::ok(render_acl(&name, &rules))
}
