use std::time::Duration;

use sdx_core::compile::compile_datapath;
use sdx_core::config::*;
use sdx_core::sim::parse_topology;
use sdx_runtime::harness::Harness;
use sdx_runtime::{ServiceSettings, UserDb};
use serde_json::{json, Value};

const REFERENCE: &str = include_str!("../../../fixtures/reference.yaml");
const TWO_NODE: &str = include_str!("../../../fixtures/two-node.yaml");
const USERS: &str = include_str!("../../../fixtures/users.json");

const ADMIN: &str = "admin-token";
const MODERATOR: &str = "moderator-token";
const CUSTOMER: &str = "as2-token";

fn reference() -> FabricConfig {
    parse_config(REFERENCE).unwrap()
}

fn settings() -> ServiceSettings {
    let mut s = ServiceSettings::loopback(UserDb::parse(USERS).unwrap());
    s.run_poller = false;
    s
}

fn up() -> Harness {
    Harness::start(reference(), parse_topology(TWO_NODE).unwrap(), settings()).unwrap()
}

struct Http {
    base: String,
    agent: ureq::Agent,
}

impl Http {
    fn new(h: &Harness) -> Http {
        Http {
            base: h.api(),
            agent: ureq::Agent::config_builder()
                .http_status_as_error(false)
                .max_idle_connections(0)
                .timeout_global(Some(Duration::from_secs(10)))
                .build()
                .into(),
        }
    }

    /// Status and body; bodies that are not JSON come back as a string.
    fn call(&self, method: &str, path: &str, token: Option<&str>, body: Option<String>) -> (u16, Value) {
        let url = format!("{}{path}", self.base);
        let auth = token.map(|t| format!("Bearer {t}")).unwrap_or_default();
        let kind = if body.as_deref().is_some_and(|b| b.starts_with('{')) {
            "application/json"
        } else {
            "application/yaml"
        };
        let resp = match method {
            "GET" => self.agent.get(&url).header("Authorization", &auth).call(),
            "DELETE" => self.agent.delete(&url).header("Authorization", &auth).call(),
            "POST" => self.agent.post(&url).header("Authorization", &auth).header("Content-Type", kind).send(body.unwrap_or_default()),
            "PUT" => self.agent.put(&url).header("Authorization", &auth).header("Content-Type", kind).send(body.unwrap_or_default()),
            m => panic!("unsupported method {m}"),
        };
        let mut resp = resp.unwrap();
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap_or_default();
        let value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        (status, value)
    }

    fn get(&self, path: &str, token: &str) -> (u16, Value) {
        self.call("GET", path, Some(token), None)
    }

    fn post(&self, path: &str, token: &str, body: Value) -> (u16, Value) {
        self.call("POST", path, Some(token), Some(body.to_string()))
    }

    fn put(&self, path: &str, token: &str, body: Value) -> (u16, Value) {
        self.call("PUT", path, Some(token), Some(body.to_string()))
    }

    fn delete(&self, path: &str, token: &str) -> (u16, Value) {
        self.call("DELETE", path, Some(token), None)
    }
}

#[test]
fn tokens_identify_users() {
    let h = up();
    let http = Http::new(&h);
    for (token, name, role) in [(ADMIN, "noc", "admin"), (MODERATOR, "ops", "moderator"), (CUSTOMER, "as2", "customer")] {
        let (status, body) = http.get("/whoami", token);
        assert_eq!(status, 200);
        assert_eq!((body["username"].as_str(), body["role"].as_str()), (Some(name), Some(role)));
        assert!(body.get("token").is_none());
    }
    assert_eq!(http.call("GET", "/whoami", None, None).0, 401);
    let (status, body) = http.get("/whoami", "nope");
    assert_eq!(status, 401);
    assert_eq!(body["error"]["code"], "unauthenticated");
}

#[test]
fn vlan_crud_respects_roles_and_references() {
    let h = up();
    let http = Http::new(&h);
    let guest = json!({"name": "guest", "vid": 300, "description": "visitors"});
    let (status, body) = http.post("/vlans", ADMIN, guest.clone());
    assert_eq!(status, 201);
    assert_eq!(body["staged"]["vid"], 300);
    assert_eq!(http.post("/vlans", ADMIN, guest.clone()).0, 409);
    assert_eq!(http.post("/vlans", MODERATOR, guest).0, 403);

    // staged only until applied
    let (status, body) = http.get("/vlans/guest", MODERATOR);
    assert_eq!(status, 200);
    assert_eq!(body["staged"]["vid"], 300);
    assert!(body["active"].is_null());

    let (status, body) = http.delete("/vlans/office", ADMIN);
    assert_eq!(status, 409, "{body}");
    assert!(!body["error"]["violations"].as_array().unwrap().is_empty());
    assert_eq!(http.delete("/vlans/ghost", ADMIN).0, 404);
    assert_eq!(http.put("/vlans/ghost", ADMIN, json!({"vid": 5})).0, 404);
    assert_eq!(http.put("/vlans/guest", ADMIN, json!({"name": "other", "vid": 5})).0, 422);
    // vid 0 breaks an invariant, not a reference
    assert_eq!(http.put("/vlans/guest", ADMIN, json!({"vid": 0})).0, 422);

    let edit = json!({"vid": 301, "description": "visitors"});
    let (s1, b1) = http.put("/vlans/guest", ADMIN, edit.clone());
    let fp1 = http.get("/config/diff", ADMIN).1["staged_fingerprint"].clone();
    let (s2, b2) = http.put("/vlans/guest", ADMIN, edit);
    let fp2 = http.get("/config/diff", ADMIN).1["staged_fingerprint"].clone();
    assert_eq!((s1, s2), (200, 200));
    assert_eq!(b1, b2);
    assert_eq!(fp1, fp2);

    assert_eq!(http.delete("/vlans/guest", ADMIN).0, 204);
    assert_eq!(http.get("/vlans/guest", ADMIN).0, 404);
}

#[test]
fn staged_edits_reach_switches_only_on_apply() {
    let h = up();
    let http = Http::new(&h);
    h.fabric.switch("sw1").unwrap().lock().unwrap().reset_capture();
    let active_before = h.service.controller.active_fingerprint();

    let block = json!({"name": "block", "rules": [{"dl_type": 0x800, "ip_proto": 17, "actions": {"allow": false}}]});
    assert_eq!(http.post("/acls", ADMIN, block).0, 201);
    let iface = json!({"name": "AS1", "description": "port 1.0.1", "native_vlan": "office", "acls_in": ["block", "allow-all"]});
    assert_eq!(http.put("/interfaces/sw1/1", ADMIN, iface).0, 200);
    assert_eq!(
        http.post("/interfaces", ADMIN, json!({"dp": "sw1", "port": 1, "native_vlan": "office"})).0,
        409
    );
    assert_eq!(http.post("/interfaces", ADMIN, json!({"dp": "sw9", "port": 1, "native_vlan": "office"})).0, 409);

    assert_eq!(h.fabric.switch("sw1").unwrap().lock().unwrap().flow_mods_received(), 0);
    assert_eq!(h.service.controller.active_fingerprint(), active_before);

    let (_, diff) = http.get("/config/diff", MODERATOR);
    assert_eq!(diff["active_fingerprint"], active_before.as_str());
    assert_eq!(diff["affected_datapaths"], json!(["sw1"]));
    assert!(diff["changes"].as_u64().unwrap() >= 2);

    assert_eq!(http.post("/config/apply", MODERATOR, json!({})).0, 403);
    let (status, report) = http.post("/config/apply", ADMIN, json!({}));
    assert_eq!(status, 200, "{report}");
    let staged = h.service.state.staged();
    assert_eq!(report["fingerprint"], fingerprint(&staged).as_str());
    assert_eq!(h.service.controller.active_fingerprint(), fingerprint(&staged));
    let table = h.fabric.read_flow_table(1).unwrap().compiled_only();
    assert!(table.same_entries(&compile_datapath(&staged, "sw1").unwrap()));
    assert!(h.fabric.switch("sw1").unwrap().lock().unwrap().flow_mods_received() > 0);
    assert_eq!(http.get("/config/diff", ADMIN).1["changes"], 0);
}

#[test]
fn yaml_round_trips_through_the_api() {
    let h = up();
    let http = Http::new(&h);
    let (status, text) = http.get("/config/yaml?version=active", MODERATOR);
    assert_eq!(status, 200);
    assert_eq!(parse_config(text.as_str().unwrap()).unwrap(), reference());

    let mut cfg = reference();
    cfg.vlans.get_mut("office").unwrap().description = "changed".into();
    let yaml = emit_config(&cfg).unwrap();
    let (status, body) = http.call("PUT", "/config/yaml", Some(ADMIN), Some(yaml));
    assert_eq!(status, 200);
    assert_eq!(body["staged_fingerprint"], fingerprint(&cfg).as_str());
    assert_eq!(http.call("PUT", "/config/yaml", Some(MODERATOR), Some(REFERENCE.into())).0, 403);

    let (status, body) = http.call("PUT", "/config/yaml", Some(ADMIN), Some("vlans: [".into()));
    assert_eq!(status, 422);
    assert_eq!(body["error"]["code"], "syntax");
    let broken = REFERENCE.replace("native_vlan: office\n        acls_in", "native_vlan: ghost\n        acls_in");
    assert_eq!(http.call("PUT", "/config/yaml", Some(ADMIN), Some(broken)).0, 422);
    // failed puts leave the staged document alone
    assert_eq!(h.service.state.staged(), cfg);
    let (_, staged) = http.get("/config/yaml", ADMIN);
    assert_eq!(parse_config(staged.as_str().unwrap()).unwrap(), cfg);
    assert_eq!(http.get("/config/yaml?version=next", ADMIN).0, 400);
}

#[test]
fn customers_see_only_their_ports() {
    let mut h = up();
    let http = Http::new(&h);
    let path = "/stats/ports?dp=sw1&port=2";
    // nothing scraped yet
    assert_eq!(http.get(path, CUSTOMER).0, 204);
    h.poll();
    assert_eq!(http.get(path, CUSTOMER).0, 204);
    h.advance(15_000);
    h.poll();
    let (status, body) = http.get(path, CUSTOMER);
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["dp"], "sw1");
    assert_eq!(body["samples"]["sdx_port_rx_bytes_total"].as_array().unwrap().len(), 2);
    // AS2 sends 100k frames of 1250 bytes a second; its first frame went
    // to the controller and was still received on the port
    let bits = body["rates"]["bits_in_per_sec"].as_f64().unwrap();
    assert_eq!(bits, 1e9);

    let (status, body) = http.get("/stats/ports?dp=sw1&port=1", CUSTOMER);
    assert_eq!(status, 403);
    assert_eq!(body["error"]["code"], "forbidden");
    assert_eq!(http.get("/stats/ports?dp=sw1&port=1", MODERATOR).0, 200);
    assert_eq!(http.get("/stats/ports?dp=sw1&port=9", ADMIN).0, 404);
    assert_eq!(http.get("/stats/ports?dp=sw1&port=2&window=0", ADMIN).0, 400);
    assert_eq!(http.get("/status", CUSTOMER).0, 403);
}

#[test]
fn users_are_managed_by_admins_and_persisted() {
    let path = std::env::temp_dir().join(format!("sdx-users-{}.json", std::process::id()));
    std::fs::write(&path, USERS).unwrap();
    let mut s = settings();
    s.users_path = Some(path.clone());
    let h = Harness::start(reference(), parse_topology(TWO_NODE).unwrap(), s).unwrap();
    let http = Http::new(&h);

    let as1 = json!({"username": "as1", "role": "customer", "token": "as1-token", "ports": [{"dp": "sw1", "port": 1}]});
    assert_eq!(http.post("/users", MODERATOR, as1.clone()).0, 403);
    let (status, body) = http.post("/users", ADMIN, as1.clone());
    assert_eq!(status, 201, "{body}");
    assert_eq!(http.post("/users", ADMIN, as1).0, 409);
    let clash = json!({"username": "x", "role": "admin", "token": ADMIN});
    assert_eq!(http.post("/users", ADMIN, clash).0, 409);

    assert_eq!(http.get("/stats/ports?dp=sw1&port=1", "as1-token").0, 204);
    let saved = UserDb::load(&path).unwrap();
    assert!(saved.get("as1").unwrap().owns("sw1", 1));
    let (_, list) = http.get("/users", ADMIN);
    assert_eq!(list.as_array().unwrap().len(), 4);
    assert!(list.as_array().unwrap().iter().all(|u| u.get("token").is_none()));

    assert_eq!(http.delete("/users/as1", ADMIN).0, 204);
    assert_eq!(http.get("/whoami", "as1-token").0, 401);
    assert!(UserDb::load(&path).unwrap().get("as1").is_none());
    std::fs::remove_file(&path).ok();
}

#[test]
fn status_and_metrics_endpoints() {
    let mut h = up();
    let http = Http::new(&h);
    let (status, body) = http.get("/status", MODERATOR);
    assert_eq!(status, 200);
    let names: Vec<_> = body["endpoints"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["listening"] == true)
        .map(|e| e["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(names.len(), 3, "{body}");
    assert_eq!(body["sessions"][0]["state"], "STEADY");
    assert_eq!(body["active_fingerprint"], fingerprint(&reference()).as_str());

    h.poll();
    h.advance(1000);
    h.poll();
    let mut resp = ureq::get(format!("http://{}/metrics", h.service.metrics_addr)).call().unwrap();
    let text = resp.body_mut().read_to_string().unwrap();
    assert!(text.contains("sdx_port_rx_bytes_total{dp=\"sw1\",port=\"2\"}"), "{text}");
    assert!(text.contains("sdx_scrape_duration_seconds{target=\"sw1\"}"));
    assert!(text.contains("process_resident_memory_bytes"));
}
