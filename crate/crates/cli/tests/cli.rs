use std::process::Command;

use sdx_core::compile::compile_datapath;
use sdx_core::config::*;
use sdx_core::sim::parse_topology;
use sdx_runtime::harness::Harness;
use sdx_runtime::{ServiceSettings, UserDb};
use serde_json::Value;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");
const USERS: &str = include_str!("../../../fixtures/users.json");

fn fixture(name: &str) -> String {
    format!("{FIXTURES}/{name}")
}

fn reference() -> FabricConfig {
    parse_config(&std::fs::read_to_string(fixture("reference.yaml")).unwrap()).unwrap()
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn sdxctl(args: &[&str], api: Option<&str>, token: Option<&str>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sdxctl"));
    cmd.args(args).env_remove("SDX_API").env_remove("SDX_TOKEN");
    if let Some(a) = api {
        cmd.env("SDX_API", a);
    }
    if let Some(t) = token {
        cmd.env("SDX_TOKEN", t);
    }
    let o = cmd.output().unwrap();
    Run {
        code: o.status.code().unwrap(),
        out: String::from_utf8(o.stdout).unwrap(),
        err: String::from_utf8(o.stderr).unwrap(),
    }
}

fn scratch(name: &str, text: &str) -> String {
    let path = std::env::temp_dir().join(format!("sdxctl-{}-{name}", std::process::id()));
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn up() -> Harness {
    let mut s = ServiceSettings::loopback(UserDb::parse(USERS).unwrap());
    s.run_poller = false;
    Harness::start(reference(), parse_topology(&std::fs::read_to_string(fixture("two-node.yaml")).unwrap()).unwrap(), s).unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = sdxctl(&["validate", &fixture("reference.yaml")], None, None);
    assert_eq!(ok.code, 0, "{}", ok.err);
    assert!(ok.out.contains("ok (1 vlans, 1 datapaths, 2 acls"));

    let j = sdxctl(&["validate", "--json", &fixture("reference.yaml")], None, None);
    let v: Value = serde_json::from_str(&j.out).unwrap();
    assert_eq!(v["fingerprint"], fingerprint(&reference()).as_str());

    assert_eq!(sdxctl(&["validate", "/nonexistent.yaml"], None, None).code, 2);
    let syntax = scratch("syntax.yaml", "vlans: [\n");
    assert_eq!(sdxctl(&["validate", &syntax], None, None).code, 2);
    let text = std::fs::read_to_string(fixture("reference.yaml")).unwrap();
    let unresolved = scratch("unresolved.yaml", &text.replace("[mirror, allow-all]", "[mirror, nope]"));
    let r = sdxctl(&["validate", &unresolved], None, None);
    assert_eq!(r.code, 3);
    assert!(r.err.contains("[unresolved]"), "{}", r.err);
    let vid = scratch("vid.yaml", &text.replace("vid: 100", "vid: 4095"));
    assert_eq!(sdxctl(&["validate", &vid], None, None).code, 3);
}

#[test]
fn compile_matches_the_compiler() {
    let r = sdxctl(&["compile", &fixture("reference.yaml"), "--dp", "sw1"], None, None);
    assert_eq!(r.code, 0);
    assert_eq!(r.out, compile_datapath(&reference(), "sw1").unwrap().dump());
    assert_eq!(sdxctl(&["compile", &fixture("reference.yaml"), "--dp", "sw9"], None, None).code, 3);
    let all = sdxctl(&["compile", &fixture("reference.yaml")], None, None);
    assert!(all.out.starts_with("# sw1 (0x1)\n"));
}

#[test]
fn gen_acl_snippets() {
    let r = sdxctl(&["gen-acl", "mirror", "--to", "4", "--ipv4-icmp", "--ipv6-icmp"], None, None);
    assert_eq!(r.code, 0);
    let rules = acl_rules(AclKind::Mirror { to: 4, allow: false }, &[RuleMatch::IPV4_ICMP, RuleMatch::IPV6_ICMP]);
    assert_eq!(r.out, render_acl("mirror", &rules));
    assert_eq!(reference().acls["mirror"], rules);

    let r = sdxctl(&["gen-acl", "block", "--udp", "--dl-type", "0x88cc", "--name", "drop-it"], None, None);
    assert!(r.out.starts_with("drop-it:\n"));
    assert!(r.out.contains("ip_proto: 17 # UDP") && r.out.contains("dl_type: 0x88cc\n"));
    assert_eq!(sdxctl(&["gen-acl", "redirect"], None, None).code, 2);
    let j = sdxctl(&["--json", "gen-acl", "redirect", "--to", "3", "--tcp"], None, None);
    let v: Value = serde_json::from_str(&j.out).unwrap();
    assert_eq!(v["rules"][0]["actions"]["redirect"], 3);
}

#[test]
fn apply_status_and_stats_against_a_service() {
    let mut h = up();
    let api = h.api();

    let denied = sdxctl(&["status"], Some(&api), Some("as2-token"));
    assert_eq!(denied.code, 4);
    assert!(denied.err.contains("HTTP 403"), "{}", denied.err);
    assert_eq!(sdxctl(&["status"], Some(&api), None).code, 4);

    let s = sdxctl(&["status"], Some(&api), Some("moderator-token"));
    assert_eq!(s.code, 0, "{}", s.err);
    assert!(s.out.contains("sw1") && s.out.contains("STEADY"), "{}", s.out);

    let mut cfg = reference();
    cfg.acls.insert("block".into(), acl_rules(AclKind::Block, &[RuleMatch { dl_type: Some(0x0800), ip_proto: Some(17) }]));
    cfg.dps.get_mut("sw1").unwrap().interfaces.get_mut(&1).unwrap().acls_in = vec!["block".into(), "allow-all".into()];
    let file = scratch("apply.yaml", &emit_config(&cfg).unwrap());
    assert_eq!(sdxctl(&["apply", &file], Some(&api), Some("moderator-token")).code, 4);
    let r = sdxctl(&["apply", &file], Some(&api), Some("admin-token"));
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.starts_with("sw1 (0x1): +"), "{}", r.out);
    assert_eq!(h.service.controller.active_fingerprint(), fingerprint(&cfg));
    assert!(h.fabric.read_flow_table(1).unwrap().compiled_only().same_entries(&compile_datapath(&cfg, "sw1").unwrap()));
    let again = sdxctl(&["--json", "apply", &file], Some(&api), Some("admin-token"));
    let v: Value = serde_json::from_str(&again.out).unwrap();
    assert_eq!(v["datapaths"][0]["flow_mods"], 0);

    let none = sdxctl(&["stats", "--dp", "sw1", "--port", "2"], Some(&api), Some("as2-token"));
    assert_eq!(none.code, 0);
    assert!(none.out.contains("not enough samples"));
    h.poll();
    h.advance(15_000);
    h.poll();
    // the CLI shows what the API returns
    let cli = sdxctl(&["--json", "stats", "--dp", "sw1", "--port", "2"], Some(&api), Some("as2-token"));
    let direct = ureq::get(format!("{api}/stats/ports?dp=sw1&port=2"))
        .header("Authorization", "Bearer as2-token")
        .call()
        .unwrap()
        .body_mut()
        .read_to_string()
        .unwrap();
    let a: Value = serde_json::from_str(&cli.out).unwrap();
    let b: Value = serde_json::from_str(&direct).unwrap();
    assert_eq!(a, b);
    let text = sdxctl(&["stats", "--dp", "sw1", "--port", "2"], Some(&api), Some("as2-token"));
    assert!(text.out.contains("bits/s") && text.out.contains("1.00 G"), "{}", text.out);
    assert_eq!(sdxctl(&["stats", "--dp", "sw1", "--port", "1"], Some(&api), Some("as2-token")).code, 4);
}

#[test]
fn rejected_apply_exits_invalid() {
    let h = up();
    let text = std::fs::read_to_string(fixture("reference.yaml")).unwrap();
    // parses and validates locally, but the service refuses a token it
    // does not know before looking at the body
    let file = scratch("remote.yaml", &text);
    assert_eq!(sdxctl(&["apply", &file], Some(&h.api()), Some("wrong")).code, 4);
    let bad = scratch("bad.yaml", &text.replace("[mirror, allow-all]", "[ghost]"));
    let r = sdxctl(&["apply", &bad], Some(&h.api()), Some("admin-token"));
    assert_eq!(r.code, 3);
    assert_eq!(h.service.controller.active_fingerprint(), fingerprint(&reference()));
}
