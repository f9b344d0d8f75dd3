//! CRUD over the staged configuration and the user list.

use std::collections::BTreeMap;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use sdx_core::config::{validate, AclRule, ConfigError, DatapathConfig, FabricConfig, InterfaceConfig, PortNo, VlanConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ApiError, ApiResult, SharedState};
use crate::users::{OwnedPort, Role, User, UserView};

pub(super) fn routes() -> Router<SharedState> {
    Router::new()
        .route("/vlans", get(list_vlans).post(create_vlan))
        .route("/vlans/{name}", get(get_vlan).put(put_vlan).delete(delete_vlan))
        .route("/datapaths", get(list_dps).post(create_dp))
        .route("/datapaths/{name}", get(get_dp).put(put_dp).delete(delete_dp))
        .route("/interfaces", get(list_ifaces).post(create_iface))
        .route("/interfaces/{dp}/{port}", get(get_iface).put(put_iface).delete(delete_iface))
        .route("/acls", get(list_acls).post(create_acl))
        .route("/acls/{name}", get(get_acl).put(put_acl).delete(delete_acl))
        .route("/users", get(list_users).post(create_user))
        .route("/users/{username}", get(get_user).put(put_user).delete(delete_user))
}

/// Apply `edit` to a copy of the staged config and keep it only if the
/// result still validates.
fn commit<T>(state: &SharedState, edit: impl FnOnce(&mut FabricConfig) -> ApiResult<T>) -> ApiResult<T> {
    let mut staged = state.staged.lock().unwrap();
    let mut candidate = staged.clone();
    let out = edit(&mut candidate)?;
    let report = validate(&candidate);
    if !report.is_valid() {
        return Err(ApiError::from_config(ConfigError::from_report(report)));
    }
    *staged = candidate;
    Ok(out)
}

fn both<T: Serialize>(staged: Option<T>, active: Option<T>, what: String) -> ApiResult<Json<serde_json::Value>> {
    if staged.is_none() && active.is_none() {
        return Err(ApiError::not_found(what));
    }
    Ok(Json(json!({ "staged": staged, "active": active })))
}

fn name_matches(path: &str, body: &Option<String>) -> ApiResult<()> {
    match body {
        Some(n) if n != path => Err(ApiError::unprocessable(format!("body names '{n}' but the path names '{path}'"))),
        _ => Ok(()),
    }
}

// --- VLANs ---

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlanBody {
    #[serde(default)]
    pub name: Option<String>,
    pub vid: u16,
    #[serde(default)]
    pub description: String,
}

fn vlan_view(name: &str, v: &VlanConfig) -> serde_json::Value {
    json!({ "name": name, "vid": v.vid, "description": v.description })
}

async fn list_vlans(State(s): State<SharedState>) -> Json<serde_json::Value> {
    let view = |c: &FabricConfig| c.vlans.iter().map(|(n, v)| vlan_view(n, v)).collect::<Vec<_>>();
    Json(json!({ "staged": view(&s.staged()), "active": view(&s.controller.active()) }))
}

async fn create_vlan(State(s): State<SharedState>, Json(b): Json<VlanBody>) -> ApiResult<Response> {
    let Some(name) = b.name.clone() else {
        return Err(ApiError::unprocessable("name is required"));
    };
    let view = commit(&s, |c| {
        if c.vlans.contains_key(&name) {
            return Err(ApiError::conflict(format!("vlan '{name}' already exists")));
        }
        let v = VlanConfig {
            vid: b.vid,
            description: b.description,
        };
        let view = vlan_view(&name, &v);
        c.vlans.insert(name.clone(), v);
        Ok(view)
    })?;
    Ok((StatusCode::CREATED, Json(json!({ "staged": view }))).into_response())
}

async fn get_vlan(State(s): State<SharedState>, Path(name): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let staged = s.staged().vlans.get(&name).map(|v| vlan_view(&name, v));
    let active = s.controller.active().vlans.get(&name).map(|v| vlan_view(&name, v));
    both(staged, active, format!("no vlan '{name}'"))
}

async fn put_vlan(State(s): State<SharedState>, Path(name): Path<String>, Json(b): Json<VlanBody>) -> ApiResult<Json<serde_json::Value>> {
    name_matches(&name, &b.name)?;
    let view = commit(&s, |c| {
        let v = c.vlans.get_mut(&name).ok_or_else(|| ApiError::not_found(format!("no vlan '{name}'")))?;
        v.vid = b.vid;
        v.description = b.description;
        Ok(vlan_view(&name, v))
    })?;
    Ok(Json(json!({ "staged": view })))
}

async fn delete_vlan(State(s): State<SharedState>, Path(name): Path<String>) -> ApiResult<StatusCode> {
    commit(&s, |c| {
        c.vlans.remove(&name).ok_or_else(|| ApiError::not_found(format!("no vlan '{name}'")))?;
        Ok(())
    })?;
    Ok(StatusCode::NO_CONTENT)
}

// --- datapaths ---

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum IntOrHex {
    Int(u64),
    Text(String),
}

impl IntOrHex {
    fn value(&self) -> ApiResult<u64> {
        match self {
            IntOrHex::Int(v) => Ok(*v),
            IntOrHex::Text(t) => {
                let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
                    Some(hex) => u64::from_str_radix(hex, 16),
                    None => t.parse(),
                };
                parsed.map_err(|_| ApiError::unprocessable(format!("'{t}' is not an integer")))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatapathBody {
    #[serde(default)]
    pub name: Option<String>,
    pub dp_id: IntOrHex,
    #[serde(default)]
    pub hardware: String,
    #[serde(default)]
    pub interfaces: Option<BTreeMap<PortNo, InterfaceConfig>>,
}

fn dp_view(name: &str, d: &DatapathConfig) -> serde_json::Value {
    json!({
        "name": name,
        "dp_id": format!("{:#x}", d.dp_id),
        "hardware": d.hardware,
        "interfaces": d.interfaces,
    })
}

async fn list_dps(State(s): State<SharedState>) -> Json<serde_json::Value> {
    let view = |c: &FabricConfig| c.dps.iter().map(|(n, d)| dp_view(n, d)).collect::<Vec<_>>();
    Json(json!({ "staged": view(&s.staged()), "active": view(&s.controller.active()) }))
}

async fn create_dp(State(s): State<SharedState>, Json(b): Json<DatapathBody>) -> ApiResult<Response> {
    let Some(name) = b.name.clone() else {
        return Err(ApiError::unprocessable("name is required"));
    };
    let dp_id = b.dp_id.value()?;
    let view = commit(&s, |c| {
        if c.dps.contains_key(&name) {
            return Err(ApiError::conflict(format!("datapath '{name}' already exists")));
        }
        if let Some((other, _)) = c.dp_by_id(dp_id) {
            return Err(ApiError::conflict(format!("dp_id {dp_id:#x} is already used by '{other}'")));
        }
        let d = DatapathConfig {
            dp_id,
            hardware: b.hardware,
            interfaces: b.interfaces.unwrap_or_default(),
        };
        let view = dp_view(&name, &d);
        c.dps.insert(name.clone(), d);
        Ok(view)
    })?;
    Ok((StatusCode::CREATED, Json(json!({ "staged": view }))).into_response())
}

async fn get_dp(State(s): State<SharedState>, Path(name): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let staged = s.staged().dps.get(&name).map(|d| dp_view(&name, d));
    let active = s.controller.active().dps.get(&name).map(|d| dp_view(&name, d));
    both(staged, active, format!("no datapath '{name}'"))
}

async fn put_dp(State(s): State<SharedState>, Path(name): Path<String>, Json(b): Json<DatapathBody>) -> ApiResult<Json<serde_json::Value>> {
    name_matches(&name, &b.name)?;
    let dp_id = b.dp_id.value()?;
    let view = commit(&s, |c| {
        if let Some((other, _)) = c.dp_by_id(dp_id).filter(|(n, _)| *n != name) {
            return Err(ApiError::conflict(format!("dp_id {dp_id:#x} is already used by '{other}'")));
        }
        let d = c.dps.get_mut(&name).ok_or_else(|| ApiError::not_found(format!("no datapath '{name}'")))?;
        d.dp_id = dp_id;
        d.hardware = b.hardware;
        if let Some(ifaces) = b.interfaces {
            d.interfaces = ifaces;
        }
        Ok(dp_view(&name, d))
    })?;
    Ok(Json(json!({ "staged": view })))
}

async fn delete_dp(State(s): State<SharedState>, Path(name): Path<String>) -> ApiResult<StatusCode> {
    commit(&s, |c| {
        c.dps.remove(&name).ok_or_else(|| ApiError::not_found(format!("no datapath '{name}'")))?;
        Ok(())
    })?;
    Ok(StatusCode::NO_CONTENT)
}

// --- interfaces ---

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceBody {
    #[serde(default)]
    pub dp: Option<String>,
    #[serde(default)]
    pub port: Option<PortNo>,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub native_vlan: String,
    #[serde(default)]
    pub acls_in: Vec<String>,
}

impl InterfaceBody {
    fn config(self) -> InterfaceConfig {
        InterfaceConfig {
            name: self.name,
            description: self.description,
            native_vlan: self.native_vlan,
            acls_in: self.acls_in,
        }
    }
}

fn iface_view(dp: &str, port: PortNo, i: &InterfaceConfig) -> serde_json::Value {
    json!({
        "dp": dp,
        "port": port,
        "name": i.name,
        "description": i.description,
        "native_vlan": i.native_vlan,
        "acls_in": i.acls_in,
    })
}

fn all_ifaces(c: &FabricConfig) -> Vec<serde_json::Value> {
    c.dps
        .iter()
        .flat_map(|(dp, d)| d.interfaces.iter().map(move |(p, i)| iface_view(dp, *p, i)))
        .collect()
}

fn find_iface(c: &FabricConfig, dp: &str, port: PortNo) -> Option<serde_json::Value> {
    c.dps.get(dp)?.interfaces.get(&port).map(|i| iface_view(dp, port, i))
}

async fn list_ifaces(State(s): State<SharedState>) -> Json<serde_json::Value> {
    Json(json!({ "staged": all_ifaces(&s.staged()), "active": all_ifaces(&s.controller.active()) }))
}

async fn create_iface(State(s): State<SharedState>, Json(b): Json<InterfaceBody>) -> ApiResult<Response> {
    let (Some(dp), Some(port)) = (b.dp.clone(), b.port) else {
        return Err(ApiError::unprocessable("dp and port are required"));
    };
    if port == 0 {
        return Err(ApiError::unprocessable("port numbers start at 1"));
    }
    let view = commit(&s, |c| {
        let d = c
            .dps
            .get_mut(&dp)
            .ok_or_else(|| ApiError::conflict(format!("datapath '{dp}' does not exist")))?;
        if d.interfaces.contains_key(&port) {
            return Err(ApiError::conflict(format!("interface {dp}:{port} already exists")));
        }
        let i = b.config();
        let view = iface_view(&dp, port, &i);
        d.interfaces.insert(port, i);
        Ok(view)
    })?;
    Ok((StatusCode::CREATED, Json(json!({ "staged": view }))).into_response())
}

async fn get_iface(State(s): State<SharedState>, Path((dp, port)): Path<(String, PortNo)>) -> ApiResult<Json<serde_json::Value>> {
    let staged = find_iface(&s.staged(), &dp, port);
    let active = find_iface(&s.controller.active(), &dp, port);
    both(staged, active, format!("no interface {dp}:{port}"))
}

async fn put_iface(
    State(s): State<SharedState>,
    Path((dp, port)): Path<(String, PortNo)>,
    Json(b): Json<InterfaceBody>,
) -> ApiResult<Json<serde_json::Value>> {
    if b.dp.as_deref().is_some_and(|d| d != dp) || b.port.is_some_and(|p| p != port) {
        return Err(ApiError::unprocessable("body names a different interface than the path"));
    }
    let view = commit(&s, |c| {
        let slot = c
            .dps
            .get_mut(&dp)
            .and_then(|d| d.interfaces.get_mut(&port))
            .ok_or_else(|| ApiError::not_found(format!("no interface {dp}:{port}")))?;
        *slot = b.config();
        Ok(iface_view(&dp, port, slot))
    })?;
    Ok(Json(json!({ "staged": view })))
}

async fn delete_iface(State(s): State<SharedState>, Path((dp, port)): Path<(String, PortNo)>) -> ApiResult<StatusCode> {
    commit(&s, |c| {
        c.dps
            .get_mut(&dp)
            .and_then(|d| d.interfaces.remove(&port))
            .ok_or_else(|| ApiError::not_found(format!("no interface {dp}:{port}")))?;
        Ok(())
    })?;
    Ok(StatusCode::NO_CONTENT)
}

// --- ACLs ---

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AclBody {
    #[serde(default)]
    pub name: Option<String>,
    pub rules: Vec<AclRule>,
}

fn acl_view(name: &str, rules: &[AclRule]) -> serde_json::Value {
    json!({ "name": name, "rules": rules })
}

async fn list_acls(State(s): State<SharedState>) -> Json<serde_json::Value> {
    let view = |c: &FabricConfig| c.acls.iter().map(|(n, r)| acl_view(n, r)).collect::<Vec<_>>();
    Json(json!({ "staged": view(&s.staged()), "active": view(&s.controller.active()) }))
}

async fn create_acl(State(s): State<SharedState>, Json(b): Json<AclBody>) -> ApiResult<Response> {
    let Some(name) = b.name.clone() else {
        return Err(ApiError::unprocessable("name is required"));
    };
    let view = commit(&s, |c| {
        if c.acls.contains_key(&name) {
            return Err(ApiError::conflict(format!("acl '{name}' already exists")));
        }
        let view = acl_view(&name, &b.rules);
        c.acls.insert(name.clone(), b.rules);
        Ok(view)
    })?;
    Ok((StatusCode::CREATED, Json(json!({ "staged": view }))).into_response())
}

async fn get_acl(State(s): State<SharedState>, Path(name): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let staged = s.staged().acls.get(&name).map(|r| acl_view(&name, r));
    let active = s.controller.active().acls.get(&name).map(|r| acl_view(&name, r));
    both(staged, active, format!("no acl '{name}'"))
}

async fn put_acl(State(s): State<SharedState>, Path(name): Path<String>, Json(b): Json<AclBody>) -> ApiResult<Json<serde_json::Value>> {
    name_matches(&name, &b.name)?;
    let view = commit(&s, |c| {
        let rules = c.acls.get_mut(&name).ok_or_else(|| ApiError::not_found(format!("no acl '{name}'")))?;
        *rules = b.rules;
        Ok(acl_view(&name, rules))
    })?;
    Ok(Json(json!({ "staged": view })))
}

async fn delete_acl(State(s): State<SharedState>, Path(name): Path<String>) -> ApiResult<StatusCode> {
    commit(&s, |c| {
        c.acls.remove(&name).ok_or_else(|| ApiError::not_found(format!("no acl '{name}'")))?;
        Ok(())
    })?;
    Ok(StatusCode::NO_CONTENT)
}

// --- users ---

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserBody {
    #[serde(default)]
    pub username: Option<String>,
    pub role: Role,
    pub token: String,
    #[serde(default)]
    pub ports: Vec<OwnedPort>,
}

fn save_users(s: &SharedState) {
    if let Some(path) = &s.users_path {
        let text = s.users.read().unwrap().to_json();
        if let Err(e) = std::fs::write(path, text) {
            tracing::warn!("cannot save users to {}: {e}", path.display());
        }
    }
}

fn upsert_user(s: &SharedState, name: String, b: UserBody, create: bool) -> ApiResult<UserView> {
    let user = User {
        username: name.clone(),
        role: b.role,
        token: b.token,
        ports: b.ports,
    };
    {
        let mut db = s.users.write().unwrap();
        let exists = db.get(&name).is_some();
        if create && exists {
            return Err(ApiError::conflict(format!("user '{name}' already exists")));
        }
        if !create && !exists {
            return Err(ApiError::not_found(format!("no user '{name}'")));
        }
        db.check(&user, (!create).then_some(name.as_str()))
            .map_err(|e| match e {
                crate::users::UserError::EmptyToken(_) => ApiError::unprocessable(e.to_string()),
                _ => ApiError::conflict(e.to_string()),
            })?;
        db.insert(user.clone());
    }
    save_users(s);
    Ok(UserView::from(&user))
}

async fn list_users(State(s): State<SharedState>) -> Json<Vec<UserView>> {
    Json(s.users.read().unwrap().list().map(UserView::from).collect())
}

async fn create_user(State(s): State<SharedState>, Json(b): Json<UserBody>) -> ApiResult<Response> {
    let Some(name) = b.username.clone().filter(|n| !n.is_empty()) else {
        return Err(ApiError::unprocessable("username is required"));
    };
    let view = upsert_user(&s, name, b, true)?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_user(State(s): State<SharedState>, Path(name): Path<String>) -> ApiResult<Json<UserView>> {
    s.users
        .read()
        .unwrap()
        .get(&name)
        .map(|u| Json(UserView::from(u)))
        .ok_or_else(|| ApiError::not_found(format!("no user '{name}'")))
}

async fn put_user(State(s): State<SharedState>, Path(name): Path<String>, Json(b): Json<UserBody>) -> ApiResult<Json<UserView>> {
    name_matches(&name, &b.username)?;
    Ok(Json(upsert_user(&s, name, b, false)?))
}

async fn delete_user(State(s): State<SharedState>, Path(name): Path<String>) -> ApiResult<StatusCode> {
    s.users
        .write()
        .unwrap()
        .remove(&name)
        .ok_or_else(|| ApiError::not_found(format!("no user '{name}'")))?;
    save_users(&s);
    Ok(StatusCode::NO_CONTENT)
}
