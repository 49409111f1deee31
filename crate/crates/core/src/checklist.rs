//! CheckList documents: named capabilities, each with templates and a lexicon.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template::{parse_template, Lexicon, NonTerminalId, Template, TemplateError};

#[derive(Debug, Error)]
pub enum CheckListError {
    #[error("capability {capability:?}: template {template:?}: {source}")]
    Template {
        capability: String,
        template: String,
        source: TemplateError,
    },
    #[error(
        "capability {capability:?}: template {template:?} uses {id} which has no lexicon entry"
    )]
    MissingLexiconEntry {
        capability: String,
        template: String,
        id: NonTerminalId,
    },
    #[error("malformed CheckList JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Capability {
    pub name: String,
    pub templates: Vec<Template>,
    pub lexicon: Lexicon,
}

impl Capability {
    pub fn new(
        name: impl Into<String>,
        templates: Vec<Template>,
        lexicon: Lexicon,
    ) -> Result<Self, CheckListError> {
        let cap = Self {
            name: name.into(),
            templates,
            lexicon,
        };
        cap.validate()?;
        Ok(cap)
    }

    fn validate(&self) -> Result<(), CheckListError> {
        for t in &self.templates {
            for id in t.ids() {
                if !self.lexicon.contains(id) {
                    return Err(CheckListError::MissingLexiconEntry {
                        capability: self.name.clone(),
                        template: t.render(),
                        id: id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckList {
    pub language: String,
    pub capabilities: Vec<Capability>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCapability {
    name: String,
    templates: Vec<String>,
    lexicon: Lexicon,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCheckList {
    language: String,
    capabilities: Vec<RawCapability>,
}

impl CheckList {
    pub fn from_json(text: &str) -> Result<Self, CheckListError> {
        let raw: RawCheckList = serde_json::from_str(text)?;
        let mut capabilities = Vec::with_capacity(raw.capabilities.len());
        for cap in raw.capabilities {
            let mut templates = Vec::with_capacity(cap.templates.len());
            for text in &cap.templates {
                let t = parse_template(text).map_err(|source| CheckListError::Template {
                    capability: cap.name.clone(),
                    template: text.clone(),
                    source,
                })?;
                templates.push(t);
            }
            capabilities.push(Capability::new(cap.name, templates, cap.lexicon)?);
        }
        Ok(Self {
            language: raw.language,
            capabilities,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, CheckListError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CheckListError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("CheckList serializes");
        s.push('\n');
        s
    }

    pub fn capability(&self, name: &str) -> Option<&Capability> {
        self.capabilities.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "language": "en",
        "capabilities": [
            {"name": "Vocabulary", "templates": ["{CITY} is {ADJ}"],
             "lexicon": {"CITY": ["Delhi", "Paris", "New York"], "ADJ": ["nice", "famous"]}},
            {"name": "Empty", "templates": [], "lexicon": {}}
        ]
    }"#;

    #[test]
    fn round_trips_through_json() {
        let cl = CheckList::from_json(DOC).unwrap();
        assert_eq!(cl.capabilities.len(), 2);
        assert_eq!(
            cl.capabilities[0].templates[0].render(),
            "{CITY-0} is {ADJ-0}"
        );
        let again = CheckList::from_json(&cl.to_json()).unwrap();
        assert_eq!(again, cl);
    }

    #[test]
    fn missing_lexicon_entry_names_template() {
        let doc = r#"{"language": "en", "capabilities": [
            {"name": "c", "templates": ["{X} y"], "lexicon": {}}]}"#;
        let err = CheckList::from_json(doc).unwrap_err();
        assert!(err.to_string().contains("{X-0} y"), "{err}");
    }

    #[test]
    fn malformed_template_names_template() {
        let doc = r#"{"language": "en", "capabilities": [
            {"name": "c", "templates": ["{X-1} y"], "lexicon": {"X": ["a", "b"]}}]}"#;
        let err = CheckList::from_json(doc).unwrap_err();
        assert!(matches!(err, CheckListError::Template { .. }));
        assert!(err.to_string().contains("{X-1} y"));
    }

    #[test]
    fn rejects_unknown_keys() {
        let doc = r#"{"language": "en", "capabilities": [], "extra": 1}"#;
        assert!(CheckList::from_json(doc).is_err());
    }
}
