//! Versioned prompt templates, one file per stage under `prompts/`.
//!
//! File layout: a `key: value` header (`purpose`, `schema`, `version`,
//! `note`) terminated by a line `===`, then a `[system]` section and a
//! `[user]` section. Placeholders are written `{{name}}`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use super::extract::SchemaId;
use super::{LlmError, Message, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: String,
    pub purpose: Purpose,
    pub schema: Option<SchemaId>,
    pub version: u32,
    pub system: String,
    pub user: String,
}

const SOURCES: [(&str, &str); 10] = [
    ("schema", include_str!("../../prompts/schema.txt")),
    ("grammar", include_str!("../../prompts/grammar.txt")),
    ("assess", include_str!("../../prompts/assess.txt")),
    ("revise", include_str!("../../prompts/revise.txt")),
    ("params", include_str!("../../prompts/params.txt")),
    ("params_zero_shot", include_str!("../../prompts/params_zero_shot.txt")),
    ("rank_semantic", include_str!("../../prompts/rank_semantic.txt")),
    ("rank_size", include_str!("../../prompts/rank_size.txt")),
    ("refine", include_str!("../../prompts/refine.txt")),
    ("describe", include_str!("../../prompts/describe.txt")),
];

impl PromptTemplate {
    pub fn parse(name: &str, text: &str) -> Result<Self, LlmError> {
        let err = |m: String| LlmError::Template(format!("{name}: {m}"));
        let (header, body) = text
            .split_once("\n===\n")
            .ok_or_else(|| err("missing `===` header terminator".into()))?;
        let mut fields = BTreeMap::new();
        for line in header.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| err(format!("bad header line `{line}`")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let purpose = fields
            .get("purpose")
            .ok_or_else(|| err("header lacks `purpose`".into()))?
            .parse::<Purpose>()
            .map_err(err)?;
        let schema = match fields.get("schema").map(String::as_str) {
            None | Some("none") => None,
            Some(s) => Some(SchemaId::parse(s).ok_or_else(|| err(format!("unknown schema `{s}`")))?),
        };
        let version = fields
            .get("version")
            .ok_or_else(|| err("header lacks `version`".into()))?
            .parse::<u32>()
            .map_err(|e| err(format!("bad version: {e}")))?;
        let body = body.trim_start();
        let rest = body
            .strip_prefix("[system]\n")
            .ok_or_else(|| err("body must start with [system]".into()))?;
        let (system, user) = rest
            .split_once("\n[user]\n")
            .ok_or_else(|| err("missing [user] section".into()))?;
        Ok(PromptTemplate {
            name: name.to_string(),
            purpose,
            schema,
            version,
            system: system.trim().to_string(),
            user: user.trim().to_string(),
        })
    }

    /// Placeholder names used anywhere in the template.
    pub fn placeholders(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for text in [&self.system, &self.user] {
            let mut rest = text.as_str();
            while let Some(open) = rest.find("{{") {
                let after = &rest[open + 2..];
                match after.find("}}") {
                    Some(close) => {
                        out.insert(after[..close].trim().to_string());
                        rest = &after[close + 2..];
                    }
                    None => break,
                }
            }
        }
        out
    }
}

fn fill(text: &str, bindings: &BTreeMap<&str, String>) -> Result<String, LlmError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| LlmError::Template("unterminated `{{`".into()))?;
        let name = after[..close].trim();
        let value = bindings
            .get(name)
            .ok_or_else(|| LlmError::Template(format!("no binding for placeholder `{name}`")))?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders system and user messages. Every placeholder must be bound; extra
/// bindings are ignored.
pub fn render_prompt(
    template: &PromptTemplate,
    bindings: &BTreeMap<&str, String>,
) -> Result<Vec<Message>, LlmError> {
    Ok(vec![
        Message::system(fill(&template.system, bindings)?),
        Message::user(fill(&template.user, bindings)?),
    ])
}

fn library() -> &'static BTreeMap<&'static str, PromptTemplate> {
    static LIB: OnceLock<BTreeMap<&'static str, PromptTemplate>> = OnceLock::new();
    LIB.get_or_init(|| {
        SOURCES
            .iter()
            .map(|(name, text)| {
                let t = PromptTemplate::parse(name, text)
                    .unwrap_or_else(|e| panic!("shipped template is invalid: {e}"));
                (*name, t)
            })
            .collect()
    })
}

/// Shipped template by name (`schema`, `grammar`, ..., `params_zero_shot`).
pub fn template(name: &str) -> Result<&'static PromptTemplate, LlmError> {
    library()
        .get(name)
        .ok_or_else(|| LlmError::Template(format!("no template named `{name}`")))
}

pub fn template_names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(n, _)| *n)
}
