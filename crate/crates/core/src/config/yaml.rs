//! Restricted YAML reader.
//!
//! Only plain/quoted scalars, block or flow maps and sequences are accepted.
//! Anchors, aliases, tags, block scalars and multi-document streams are
//! rejected so that a document has exactly one meaning and re-emits the
//! same way.

use std::fmt;

use yaml_rust2::parser::{Event, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

impl From<&Marker> for Pos {
    fn from(m: &Marker) -> Self {
        Pos {
            line: m.line(),
            column: m.col() + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Scalar { text: String, quoted: bool },
    Seq(Vec<Node>),
    Map(Vec<(Node, Node)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub pos: Pos,
}

impl Node {
    pub fn describe(&self) -> &'static str {
        match self.kind {
            NodeKind::Scalar { .. } => "scalar",
            NodeKind::Seq(_) => "sequence",
            NodeKind::Map(_) => "mapping",
        }
    }

    /// Plain (unquoted) scalar text, if this is one.
    pub fn plain(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Scalar { text, quoted: false } => Some(text),
            _ => None,
        }
    }

    pub fn scalar(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Scalar { text, .. } => Some(text),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self.plain(), Some("" | "~" | "null" | "Null" | "NULL"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YamlError {
    pub message: String,
    pub pos: Pos,
}

impl fmt::Display for YamlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.message, self.pos)
    }
}

impl std::error::Error for YamlError {}

fn err(message: impl Into<String>, pos: Pos) -> YamlError {
    YamlError {
        message: message.into(),
        pos,
    }
}

/// Parse a single YAML document into a node tree. An empty stream yields
/// `None`.
pub fn parse(text: &str) -> Result<Option<Node>, YamlError> {
    let mut parser = Parser::new_from_str(text);
    let mut reader = Reader {
        parser: &mut parser,
    };
    reader.stream()
}

struct Reader<'p, 'a> {
    parser: &'p mut Parser<std::str::Chars<'a>>,
}

impl Reader<'_, '_> {
    fn next(&mut self) -> Result<(Event, Pos), YamlError> {
        match self.parser.next_token() {
            Ok((ev, mark)) => Ok((ev, Pos::from(&mark))),
            Err(e) => Err(err(e.info().to_string(), Pos::from(e.marker()))),
        }
    }

    fn stream(&mut self) -> Result<Option<Node>, YamlError> {
        let (ev, pos) = self.next()?;
        if ev != Event::StreamStart {
            return Err(err("expected start of stream", pos));
        }
        let (ev, pos) = self.next()?;
        let root = match ev {
            Event::StreamEnd => return Ok(None),
            Event::DocumentStart => {
                let (ev, pos) = self.next()?;
                let node = self.node(ev, pos)?;
                let (ev, pos) = self.next()?;
                if ev != Event::DocumentEnd {
                    return Err(err("expected end of document", pos));
                }
                node
            }
            _ => return Err(err("expected document", pos)),
        };
        let (ev, pos) = self.next()?;
        match ev {
            Event::StreamEnd => Ok(Some(root)),
            _ => Err(err("multiple documents are not supported", pos)),
        }
    }

    fn node(&mut self, ev: Event, pos: Pos) -> Result<Node, YamlError> {
        match ev {
            Event::Alias(_) => Err(err("aliases are not supported", pos)),
            Event::Scalar(text, style, anchor, tag) => {
                reject_decorations(anchor, tag.is_some(), pos)?;
                let quoted = match style {
                    TScalarStyle::Plain => false,
                    TScalarStyle::SingleQuoted | TScalarStyle::DoubleQuoted => true,
                    TScalarStyle::Literal | TScalarStyle::Folded => {
                        return Err(err("block scalars are not supported", pos))
                    }
                };
                Ok(Node {
                    kind: NodeKind::Scalar { text, quoted },
                    pos,
                })
            }
            Event::SequenceStart(anchor, tag) => {
                reject_decorations(anchor, tag.is_some(), pos)?;
                let mut items = Vec::new();
                loop {
                    let (ev, p) = self.next()?;
                    if ev == Event::SequenceEnd {
                        break;
                    }
                    items.push(self.node(ev, p)?);
                }
                Ok(Node {
                    kind: NodeKind::Seq(items),
                    pos,
                })
            }
            Event::MappingStart(anchor, tag) => {
                reject_decorations(anchor, tag.is_some(), pos)?;
                let mut entries: Vec<(Node, Node)> = Vec::new();
                loop {
                    let (ev, p) = self.next()?;
                    if ev == Event::MappingEnd {
                        break;
                    }
                    let key = self.node(ev, p)?;
                    let Some(key_text) = key.scalar() else {
                        return Err(err("mapping keys must be scalars", key.pos));
                    };
                    if entries.iter().any(|(k, _)| k.scalar() == Some(key_text)) {
                        return Err(err(format!("duplicate key '{key_text}'"), key.pos));
                    }
                    let (ev, p) = self.next()?;
                    let value = self.node(ev, p)?;
                    entries.push((key, value));
                }
                Ok(Node {
                    kind: NodeKind::Map(entries),
                    pos,
                })
            }
            other => Err(err(format!("unexpected {other:?}"), pos)),
        }
    }
}

fn reject_decorations(anchor: usize, tagged: bool, pos: Pos) -> Result<(), YamlError> {
    if anchor != 0 {
        return Err(err("anchors are not supported", pos));
    }
    if tagged {
        return Err(err("tags are not supported", pos));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_structure() {
        let node = parse("a:\n  b: [x, \"y\"]\n").unwrap().unwrap();
        let NodeKind::Map(entries) = &node.kind else {
            panic!("not a map")
        };
        assert_eq!(entries[0].0.plain(), Some("a"));
        let NodeKind::Map(inner) = &entries[0].1.kind else {
            panic!("not a map")
        };
        let NodeKind::Seq(items) = &inner[0].1.kind else {
            panic!("not a seq")
        };
        assert_eq!(items[0].plain(), Some("x"));
        assert_eq!(items[1].plain(), None);
        assert_eq!(items[1].scalar(), Some("y"));
    }

    #[test]
    fn positions_are_one_based() {
        let node = parse("a: 1\nb:\n  c: 2\n").unwrap().unwrap();
        let NodeKind::Map(entries) = &node.kind else {
            panic!()
        };
        assert_eq!(entries[1].0.pos, Pos { line: 2, column: 1 });
        let NodeKind::Map(inner) = &entries[1].1.kind else {
            panic!()
        };
        assert_eq!(inner[0].0.pos, Pos { line: 3, column: 3 });
    }

    #[test]
    fn rejects_anchors_aliases_tags() {
        assert!(parse("a: &x 1\nb: *x\n").unwrap_err().message.contains("anchors"));
        assert!(parse("a: !!str 1\n").unwrap_err().message.contains("tags"));
        assert!(parse("a: |\n  text\n").unwrap_err().message.contains("block"));
    }

    #[test]
    fn rejects_duplicate_keys_and_multidoc() {
        assert!(parse("a: 1\na: 2\n").unwrap_err().message.contains("duplicate"));
        assert!(parse("a: 1\n---\nb: 2\n").unwrap_err().message.contains("multiple"));
    }

    #[test]
    fn empty_stream() {
        assert_eq!(parse("").unwrap(), None);
        assert_eq!(parse("# only a comment\n").unwrap(), None);
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse("a: [1, 2\nb: 3\n").unwrap_err();
        assert!(e.pos.line >= 1);
    }
}
