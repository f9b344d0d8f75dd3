//! Static bearer-token users.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Admin,
    Moderator,
    Customer,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Admin, Role::Moderator, Role::Customer];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Admin => "admin",
            Role::Moderator => "moderator",
            Role::Customer => "customer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OwnedPort {
    pub dp: String,
    pub port: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub username: String,
    pub role: Role,
    pub token: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ports: Vec<OwnedPort>,
}

impl User {
    pub fn owns(&self, dp: &str, port: u32) -> bool {
        self.ports.iter().any(|p| p.dp == dp && p.port == port)
    }
}

/// What the API shows of a user: everything except the token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserView {
    pub username: String,
    pub role: Role,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ports: Vec<OwnedPort>,
}

impl From<&User> for UserView {
    fn from(u: &User) -> Self {
        UserView {
            username: u.username.clone(),
            role: u.role,
            ports: u.ports.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum UserError {
    #[error("cannot read users file: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad users file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("duplicate username '{0}'")]
    DuplicateName(String),
    #[error("duplicate token for '{0}'")]
    DuplicateToken(String),
    #[error("user '{0}' has an empty token")]
    EmptyToken(String),
}

#[derive(Debug, Deserialize, Serialize)]
struct UsersFile {
    users: Vec<User>,
}

#[derive(Debug, Clone, Default)]
pub struct UserDb {
    users: BTreeMap<String, User>,
}

impl UserDb {
    pub fn from_users(users: Vec<User>) -> Result<Self, UserError> {
        let mut db = UserDb::default();
        for u in users {
            db.check(&u, None)?;
            db.users.insert(u.username.clone(), u);
        }
        Ok(db)
    }

    /// Parse `{"users": [...]}`.
    pub fn parse(text: &str) -> Result<Self, UserError> {
        let f: UsersFile = serde_json::from_str(text)?;
        Self::from_users(f.users)
    }

    pub fn load(path: &Path) -> Result<Self, UserError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&UsersFile {
            users: self.users.values().cloned().collect(),
        })
        .expect("users serialize")
    }

    /// Check `u` against everyone except `replacing`.
    pub fn check(&self, u: &User, replacing: Option<&str>) -> Result<(), UserError> {
        if u.token.is_empty() {
            return Err(UserError::EmptyToken(u.username.clone()));
        }
        for (name, other) in &self.users {
            if Some(name.as_str()) == replacing {
                continue;
            }
            if *name == u.username {
                return Err(UserError::DuplicateName(name.clone()));
            }
            if other.token == u.token {
                return Err(UserError::DuplicateToken(u.username.clone()));
            }
        }
        Ok(())
    }

    pub fn by_token(&self, token: &str) -> Option<&User> {
        self.users.values().find(|u| u.token == token)
    }

    pub fn get(&self, name: &str) -> Option<&User> {
        self.users.get(name)
    }

    pub fn list(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn insert(&mut self, u: User) {
        self.users.insert(u.username.clone(), u);
    }

    pub fn remove(&mut self, name: &str) -> Option<User> {
        self.users.remove(name)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_duplicates() {
        let db = UserDb::parse(
            r#"{"users": [
                {"username": "root", "role": "admin", "token": "t1"},
                {"username": "as1", "role": "customer", "token": "t2", "ports": [{"dp": "sw1", "port": 1}]}
            ]}"#,
        )
        .unwrap();
        assert_eq!(db.by_token("t2").unwrap().username, "as1");
        assert!(db.get("as1").unwrap().owns("sw1", 1));
        assert!(!db.get("as1").unwrap().owns("sw1", 2));

        let dup = r#"{"users": [{"username": "a", "role": "admin", "token": "x"}, {"username": "b", "role": "admin", "token": "x"}]}"#;
        assert!(matches!(UserDb::parse(dup), Err(UserError::DuplicateToken(_))));
        let bad = r#"{"users": [{"username": "a", "role": "root", "token": "x"}]}"#;
        assert!(UserDb::parse(bad).is_err());
    }
}
