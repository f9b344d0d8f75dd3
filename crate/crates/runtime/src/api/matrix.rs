//! Which roles may call which (verb, route). Anything not listed here is
//! not a route. docs/api.md carries the same table for humans.

use crate::users::Role;

const A: &[Role] = &[Role::Admin];
const AM: &[Role] = &[Role::Admin, Role::Moderator];
const AMC: &[Role] = &[Role::Admin, Role::Moderator, Role::Customer];

pub struct RouteRule {
    pub method: &'static str,
    pub path: &'static str,
    pub roles: &'static [Role],
}

const fn r(method: &'static str, path: &'static str, roles: &'static [Role]) -> RouteRule {
    RouteRule { method, path, roles }
}

pub const ROUTES: &[RouteRule] = &[
    r("GET", "/whoami", AMC),
    r("GET", "/status", AM),
    r("GET", "/stats/ports", AMC),
    r("GET", "/config/yaml", AM),
    r("PUT", "/config/yaml", A),
    r("GET", "/config/diff", AM),
    r("POST", "/config/apply", A),
    r("GET", "/vlans", AM),
    r("POST", "/vlans", A),
    r("GET", "/vlans/{name}", AM),
    r("PUT", "/vlans/{name}", A),
    r("DELETE", "/vlans/{name}", A),
    r("GET", "/datapaths", AM),
    r("POST", "/datapaths", A),
    r("GET", "/datapaths/{name}", AM),
    r("PUT", "/datapaths/{name}", A),
    r("DELETE", "/datapaths/{name}", A),
    r("GET", "/interfaces", AM),
    r("POST", "/interfaces", A),
    r("GET", "/interfaces/{dp}/{port}", AM),
    r("PUT", "/interfaces/{dp}/{port}", A),
    r("DELETE", "/interfaces/{dp}/{port}", A),
    r("GET", "/acls", AM),
    r("POST", "/acls", A),
    r("GET", "/acls/{name}", AM),
    r("PUT", "/acls/{name}", A),
    r("DELETE", "/acls/{name}", A),
    r("GET", "/users", A),
    r("POST", "/users", A),
    r("GET", "/users/{username}", A),
    r("PUT", "/users/{username}", A),
    r("DELETE", "/users/{username}", A),
];

/// `None` if (method, path) is not a route.
pub fn allowed(role: Role, method: &str, path: &str) -> Option<bool> {
    ROUTES
        .iter()
        .find(|r| r.method == method && r.path == path)
        .map(|r| r.roles.contains(&role))
}
