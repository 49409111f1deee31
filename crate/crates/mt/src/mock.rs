//! Rule-based stand-in for an MT system: word mapping, adjective agreement,
//! reordering and seeded corruption.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{MtError, Provider};

/// Form of `adjective` (any inflecting source word) when it agrees with a
/// noun of the given class: the noun right after it, or failing that the
/// nearest noun before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgreementSplit {
    pub adjective: String,
    pub noun_class: String,
    pub form: String,
}

/// When the translated tokens contain `pattern` (`*` matches any one token)
/// at some position, the leftmost match is rewritten so that output slot `i`
/// takes matched token `permutation[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReorderRule {
    pub pattern: Vec<String>,
    pub permutation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockRuleSet {
    /// Lowercased source token to target token; an empty target drops it.
    pub word_map: BTreeMap<String, String>,
    /// Lowercased source noun to its grammatical class.
    pub noun_classes: BTreeMap<String, String>,
    pub agreement_splits: Vec<AgreementSplit>,
    pub reorder: Vec<ReorderRule>,
    pub noise_rate: f64,
    pub seed: u64,
}

impl MockRuleSet {
    pub fn validate(&self) -> Result<(), MtError> {
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(MtError::Rules(format!(
                "noise_rate {} outside [0, 1]",
                self.noise_rate
            )));
        }
        for r in &self.reorder {
            let mut sorted = r.permutation.clone();
            sorted.sort_unstable();
            if r.pattern.is_empty() || sorted != (0..r.pattern.len()).collect::<Vec<_>>() {
                return Err(MtError::Rules(format!(
                    "reorder permutation {:?} does not permute pattern {:?}",
                    r.permutation, r.pattern
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, MtError> {
        let rules: Self = serde_json::from_str(text).map_err(|e| MtError::Rules(e.to_string()))?;
        rules.validate()?;
        Ok(rules)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, MtError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MtError::Rules(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn split_for(&self, adjective: &str, class: &str) -> Option<&str> {
        self.agreement_splits
            .iter()
            .find(|s| s.adjective == adjective && s.noun_class == class)
            .map(|s| s.form.as_str())
    }
}

fn split_punct(token: &str) -> (&str, &str) {
    let core = token.trim_end_matches(|c: char| c.is_ascii_punctuation());
    if core.is_empty() {
        (token, "")
    } else {
        (core, &token[core.len()..])
    }
}

fn apply_reorder(tokens: &mut [(String, String)], rule: &ReorderRule) {
    let n = rule.pattern.len();
    if tokens.len() < n {
        return;
    }
    let at = (0..=tokens.len() - n).find(|&i| {
        rule.pattern
            .iter()
            .zip(&tokens[i..i + n])
            .all(|(p, (core, _))| p == "*" || p == core)
    });
    if let Some(i) = at {
        let window: Vec<String> = tokens[i..i + n].iter().map(|(c, _)| c.clone()).collect();
        for (slot, &from) in rule.permutation.iter().enumerate() {
            tokens[i + slot].0 = window[from].clone();
        }
    }
}

fn text_rng(seed: u64, text: &str) -> ChaCha8Rng {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(text.as_bytes())
        .finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

pub fn mock_translate(rules: &MockRuleSet, text: &str) -> String {
    mock_translate_traced(rules, text).0
}

/// Translation plus whether a corruption was injected.
pub fn mock_translate_traced(rules: &MockRuleSet, text: &str) -> (String, bool) {
    let body = text.trim_end();
    let end_core = body.trim_end_matches(|c: char| c.is_ascii_punctuation());
    let final_punct = &body[end_core.len()..];
    let source: Vec<(&str, &str)> = end_core.split_whitespace().map(split_punct).collect();

    // punctuation stays attached to the token it followed
    let mut out: Vec<(String, String)> = Vec::with_capacity(source.len());
    for (i, (core, punct)) in source.iter().enumerate() {
        let key = core.to_lowercase();
        // the following noun if there is one, else the closest noun before
        let class_of = |(n, _): &(&str, &str)| rules.noun_classes.get(&n.to_lowercase());
        let class = source
            .get(i + 1)
            .and_then(class_of)
            .or_else(|| source[..i].iter().rev().find_map(class_of));
        let mapped = match class.and_then(|c| rules.split_for(&key, c)) {
            Some(form) => form.to_string(),
            None => rules
                .word_map
                .get(&key)
                .cloned()
                .unwrap_or_else(|| core.to_string()),
        };
        if !mapped.is_empty() {
            out.push((mapped, punct.to_string()));
        } else if let Some(last) = out.last_mut() {
            last.1.push_str(punct);
        }
    }
    for rule in &rules.reorder {
        apply_reorder(&mut out, rule);
    }

    let mut corrupted = false;
    if rules.noise_rate > 0.0 && !out.is_empty() {
        let mut rng = text_rng(rules.seed, text);
        if rng.random::<f64>() < rules.noise_rate {
            corrupted = true;
            let swap = out.len() >= 2 && rng.random::<bool>();
            if swap {
                let i = rng.random_range(0..out.len() - 1);
                if out[i].0 != out[i + 1].0 {
                    let (a, b) = (out[i].0.clone(), out[i + 1].0.clone());
                    out[i].0 = b;
                    out[i + 1].0 = a;
                } else {
                    out.insert(i, out[i].clone());
                }
            } else {
                let i = rng.random_range(0..out.len());
                out.insert(i, (out[i].0.clone(), String::new()));
            }
        }
    }

    let mut s = out
        .iter()
        .map(|(c, p)| format!("{c}{p}"))
        .collect::<Vec<_>>()
        .join(" ");
    s.push_str(final_punct);
    (s, corrupted)
}

pub struct MockProvider {
    rules: MockRuleSet,
}

impl MockProvider {
    pub fn new(rules: MockRuleSet) -> Result<Self, MtError> {
        rules.validate()?;
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &MockRuleSet {
        &self.rules
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn translate_batch(
        &self,
        texts: &[String],
        _src: &str,
        _tgt: &str,
    ) -> Result<Vec<String>, MtError> {
        Ok(texts
            .iter()
            .map(|t| mock_translate(&self.rules, t))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    fn hindi() -> MockRuleSet {
        MockRuleSet {
            word_map: map(&[
                ("this", "yah"),
                ("is", "hai"),
                ("a", ""),
                ("good", "acha"),
                ("aircraft", "viman"),
                ("service", "seva"),
            ]),
            noun_classes: map(&[("aircraft", "m"), ("service", "f")]),
            agreement_splits: vec![AgreementSplit {
                adjective: "good".into(),
                noun_class: "f".into(),
                form: "achi".into(),
            }],
            reorder: vec![ReorderRule {
                pattern: vec!["hai".into(), "*".into(), "*".into()],
                permutation: vec![1, 2, 0],
            }],
            ..Default::default()
        }
    }

    #[test]
    fn maps_and_drops_tokens() {
        let rules = MockRuleSet {
            word_map: map(&[("good", "acha"), ("is", "")]),
            ..Default::default()
        };
        assert_eq!(mock_translate(&rules, "A is good"), "A acha");
    }

    #[test]
    fn identity_rules_keep_text() {
        let rules = MockRuleSet::default();
        assert_eq!(
            mock_translate(&rules, "Delhi is nice, really."),
            "Delhi is nice, really."
        );
    }

    #[test]
    fn agreement_split_and_reorder() {
        let r = hindi();
        assert_eq!(
            mock_translate(&r, "This is a good aircraft."),
            "yah acha viman hai."
        );
        assert_eq!(
            mock_translate(&r, "This is a good service."),
            "yah achi seva hai."
        );
    }

    #[test]
    fn predicate_agrees_with_preceding_noun() {
        let mut r = hindi();
        r.word_map.insert("was".into(), "tha".into());
        r.word_map.insert("the".into(), String::new());
        r.agreement_splits.push(AgreementSplit {
            adjective: "was".into(),
            noun_class: "f".into(),
            form: "thi".into(),
        });
        r.reorder.clear();
        assert_eq!(
            mock_translate(&r, "The service was good."),
            "seva thi achi."
        );
        assert_eq!(
            mock_translate(&r, "The aircraft was good."),
            "viman tha acha."
        );
    }

    #[test]
    fn full_noise_corrupts_once_and_reproducibly() {
        let rules = MockRuleSet {
            noise_rate: 1.0,
            seed: 7,
            ..Default::default()
        };
        let (a, hit) = mock_translate_traced(&rules, "a b");
        assert!(hit);
        assert!(["b a", "a a b", "a b b"].contains(&a.as_str()), "{a}");
        assert_eq!(mock_translate(&rules, "a b"), a);
    }

    #[test]
    fn noise_rate_is_binomial() {
        let rules = MockRuleSet {
            noise_rate: 0.15,
            seed: 3,
            ..Default::default()
        };
        let hits = (0..1000)
            .filter(|i| mock_translate_traced(&rules, &format!("sentence number {i} here")).1)
            .count();
        assert!((125..=175).contains(&hits), "{hits}");
    }

    #[test]
    fn rules_validation() {
        assert!(MockRuleSet {
            noise_rate: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        let bad = MockRuleSet {
            reorder: vec![ReorderRule {
                pattern: vec!["a".into(), "b".into()],
                permutation: vec![0, 0],
            }],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(MockRuleSet::from_json(r#"{"word_map": {"a": "b"}, "bogus": 1}"#).is_err());
    }
}
