//! Versioned prompt templates.
//!
//! Templates ship as text files under `prompts/` and are compiled into the
//! crate. A file holds a `### system` and a `### user` section; placeholders
//! are written `{{name}}`.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::gateway::ChatMessage;

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub version: u32,
    system: String,
    user: String,
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([a-z_]+)\}\}").unwrap())
}

impl PromptTemplate {
    pub fn parse(name: &'static str, version: u32, text: &str) -> Result<Self> {
        let system_at = text
            .find("### system\n")
            .ok_or_else(|| Error::Config(format!("prompt {name}: missing system section")))?;
        let user_at = text
            .find("### user\n")
            .ok_or_else(|| Error::Config(format!("prompt {name}: missing user section")))?;
        if user_at < system_at {
            return Err(Error::Config(format!("prompt {name}: user section before system")));
        }
        let system = text[system_at + "### system\n".len()..user_at].trim_end().to_string();
        let user = text[user_at + "### user\n".len()..].trim_end().to_string();
        Ok(Self {
            name,
            version,
            system,
            user,
        })
    }

    /// Stable identifier such as `refine.v1`.
    pub fn id(&self) -> String {
        format!("{}.v{}", self.name, self.version)
    }

    pub fn placeholders(&self) -> BTreeSet<String> {
        placeholder_re()
            .captures_iter(&self.system)
            .chain(placeholder_re().captures_iter(&self.user))
            .map(|c| c[1].to_string())
            .collect()
    }

    /// Substitutes every placeholder. Missing values are an error; extra
    /// values are ignored.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<Vec<ChatMessage>> {
        let fill = |section: &str| -> Result<String> {
            let mut missing = None;
            let out = placeholder_re().replace_all(section, |c: &regex::Captures| {
                match vars.iter().find(|(k, _)| *k == &c[1]) {
                    Some((_, v)) => v.to_string(),
                    None => {
                        missing.get_or_insert_with(|| c[1].to_string());
                        String::new()
                    }
                }
            });
            match missing {
                Some(key) => Err(Error::Config(format!(
                    "prompt {}: no value for placeholder {key}",
                    self.id()
                ))),
                None => Ok(out.into_owned()),
            }
        };
        Ok(vec![
            ChatMessage::system(fill(&self.system)?),
            ChatMessage::user(fill(&self.user)?),
        ])
    }
}

macro_rules! shipped {
    ($fn_name:ident, $name:literal, $version:literal) => {
        pub fn $fn_name() -> &'static PromptTemplate {
            static CELL: OnceLock<PromptTemplate> = OnceLock::new();
            CELL.get_or_init(|| {
                PromptTemplate::parse(
                    $name,
                    $version,
                    include_str!(concat!("../prompts/", $name, ".v", $version, ".txt")),
                )
                .expect("shipped prompt parses")
            })
        }
    };
}

shipped!(verbalize, "verbalize", 1);
shipped!(initial_annotation, "initial_annotation", 1);
shipped!(refine, "refine", 1);
shipped!(refine_correction, "refine_correction", 1);
shipped!(cell_summary, "cell_summary", 1);

pub fn all() -> Vec<&'static PromptTemplate> {
    vec![
        verbalize(),
        initial_annotation(),
        refine(),
        refine_correction(),
        cell_summary(),
    ]
}
