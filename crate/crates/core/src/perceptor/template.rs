//! Domain prefix templates applied identically to instructions and element
//! descriptions before embedding.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const DEFAULT_TEMPLATE: &str = "Represent the {domain} UI element: {text}";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("unknown placeholder {{{0}}} in prefix template (expected {{domain}} or {{text}})")]
    UnknownPlaceholder(String),
    #[error("unbalanced brace at byte {0} in prefix template")]
    Unbalanced(usize),
    #[error("prefix template has no {{text}} placeholder")]
    MissingText,
}

#[derive(Debug, Clone, PartialEq)]
enum Part {
    Literal(String),
    Domain,
    Text,
}

/// A parsed template with `{domain}` and `{text}` placeholders.
/// `{{` and `}}` produce literal braces.
#[derive(Clone, PartialEq)]
pub struct PrefixTemplate {
    source: String,
    parts: Vec<Part>,
}

impl PrefixTemplate {
    pub fn new(source: &str) -> Result<Self, TemplateError> {
        let mut parts = Vec::new();
        let mut literal = String::new();
        let bytes = source.as_bytes();
        let mut i = 0;
        while i < source.len() {
            let c = bytes[i];
            match c {
                b'{' if bytes.get(i + 1) == Some(&b'{') => {
                    literal.push('{');
                    i += 2;
                }
                b'}' if bytes.get(i + 1) == Some(&b'}') => {
                    literal.push('}');
                    i += 2;
                }
                b'{' => {
                    let close = source[i + 1..].find('}').ok_or(TemplateError::Unbalanced(i))?;
                    let name = &source[i + 1..i + 1 + close];
                    let part = match name {
                        "domain" => Part::Domain,
                        "text" => Part::Text,
                        other => return Err(TemplateError::UnknownPlaceholder(other.to_string())),
                    };
                    if !literal.is_empty() {
                        parts.push(Part::Literal(std::mem::take(&mut literal)));
                    }
                    parts.push(part);
                    i += close + 2;
                }
                b'}' => return Err(TemplateError::Unbalanced(i)),
                _ => {
                    let ch = source[i..].chars().next().expect("in bounds");
                    literal.push(ch);
                    i += ch.len_utf8();
                }
            }
        }
        if !literal.is_empty() {
            parts.push(Part::Literal(literal));
        }
        if !parts.contains(&Part::Text) {
            return Err(TemplateError::MissingText);
        }
        Ok(Self { source: source.to_string(), parts })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    pub fn render(&self, domain_tag: &str, text: &str) -> String {
        let mut out = String::new();
        for part in &self.parts {
            match part {
                Part::Literal(s) => out.push_str(s),
                Part::Domain => out.push_str(domain_tag),
                Part::Text => out.push_str(text),
            }
        }
        out
    }
}

impl Default for PrefixTemplate {
    fn default() -> Self {
        Self::new(DEFAULT_TEMPLATE).expect("default template parses")
    }
}

impl fmt::Debug for PrefixTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrefixTemplate({:?})", self.source)
    }
}

impl Serialize for PrefixTemplate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for PrefixTemplate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PrefixTemplate::new(&s).map_err(serde::de::Error::custom)
    }
}

/// One-shot substitution of `domain_tag` and `raw` into `template`.
pub fn build_prefixed_text(domain_tag: &str, raw: &str, template: &str) -> Result<String, TemplateError> {
    Ok(PrefixTemplate::new(template)?.render(domain_tag, raw))
}
