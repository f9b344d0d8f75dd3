use std::fmt;

use serde::Serialize;

use super::yaml::Pos;

/// Machine-readable classification of a configuration failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Syntax,
    UnknownKey,
    MissingSection,
    MissingField,
    InvalidValue,
    Unresolved,
    Invariant,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Syntax => "syntax",
            ErrorCode::UnknownKey => "unknown_key",
            ErrorCode::MissingSection => "missing_section",
            ErrorCode::MissingField => "missing_field",
            ErrorCode::InvalidValue => "invalid_value",
            ErrorCode::Unresolved => "unresolved",
            ErrorCode::Invariant => "invariant",
        }
    }

    /// Structural problems found while reading the document, as opposed to
    /// semantic violations found by validation.
    pub fn is_parse_error(self) -> bool {
        !matches!(self, ErrorCode::Unresolved | ErrorCode::Invariant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    VidRange,
    DuplicateVid,
    DpIdZero,
    DuplicateDpId,
    PortZero,
    UnresolvedVlan,
    UnresolvedAcl,
    IpProtoWithoutDlType,
    MirrorPortMissing,
    RedirectPortMissing,
    ConflictingDisposition,
    NoVlans,
    NoDatapaths,
}

impl ViolationKind {
    /// Violations of cross-object references, as opposed to value invariants.
    pub fn is_reference(self) -> bool {
        matches!(
            self,
            ViolationKind::UnresolvedVlan
                | ViolationKind::UnresolvedAcl
                | ViolationKind::MirrorPortMissing
                | ViolationKind::RedirectPortMissing
        )
    }

    /// Whether the violation only concerns the whole-config minimum
    /// (at least one VLAN / datapath).
    pub fn is_emptiness(self) -> bool {
        matches!(self, ViolationKind::NoVlans | ViolationKind::NoDatapaths)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
pub struct ConfigError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pos: Option<Pos>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ConfigError {
    pub fn new(code: ErrorCode, message: impl Into<String>, pos: Option<Pos>) -> Self {
        ConfigError {
            code,
            message: message.into(),
            pos,
            violations: Vec::new(),
        }
    }

    pub fn at(code: ErrorCode, message: impl Into<String>, pos: Pos) -> Self {
        Self::new(code, message, Some(pos))
    }

    pub fn from_report(report: ValidationReport) -> Self {
        let first = &report.violations[0];
        let code = if first.kind.is_reference() {
            ErrorCode::Unresolved
        } else {
            ErrorCode::Invariant
        };
        let message = if report.violations.len() == 1 {
            first.message.clone()
        } else {
            format!(
                "{} (and {} more violations)",
                first.message,
                report.violations.len() - 1
            )
        };
        ConfigError {
            code,
            message,
            pos: None,
            violations: report.violations,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code.as_str(), self.message)?;
        if let Some(pos) = self.pos {
            write!(f, " ({pos})")?;
        }
        Ok(())
    }
}

impl serde::Serialize for Pos {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Pos", 2)?;
        st.serialize_field("line", &self.line)?;
        st.serialize_field("column", &self.column)?;
        st.end()
    }
}
