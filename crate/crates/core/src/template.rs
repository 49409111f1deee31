//! The restricted template grammar: literal text interleaved with
//! cardinal-annotated placeholders.
//!
//! Textual syntax: `{NAME-k}` is a placeholder for non-terminal `NAME` with
//! cardinal `k`, `{NAME}` is shorthand for `{NAME-0}`, and literal braces are
//! written `{{` and `}}`. Within one template, equal cardinals of a
//! non-terminal take the same terminal and distinct cardinals take distinct
//! terminals.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use indexmap::IndexSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("malformed placeholder in {text:?}: {reason}")]
    MalformedPlaceholder { text: String, reason: String },
    #[error("invalid non-terminal id {0:?}")]
    InvalidId(String),
    #[error("cardinal gap: {id}-{cardinal} appears before {id}-{prev}", prev = .cardinal - 1)]
    CardinalGap { id: NonTerminalId, cardinal: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpandError {
    #[error("no lexicon entry for non-terminal {0}")]
    MissingLexiconEntry(NonTerminalId),
    #[error("non-terminal {id} needs {needed} distinct terminals but the lexicon has {available}")]
    InsufficientTerminals {
        id: NonTerminalId,
        needed: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexiconError {
    #[error("lexicon entry {0} is empty")]
    EmptyEntry(NonTerminalId),
    #[error("lexicon entry {0} contains an empty terminal")]
    EmptyTerminal(NonTerminalId),
    #[error("lexicon entry {id} lists {terminal:?} twice")]
    DuplicateTerminal { id: NonTerminalId, terminal: String },
    #[error(transparent)]
    Id(#[from] TemplateError),
}

/// Name of a keyword (non-terminal). Letters, digits and underscore only.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NonTerminalId(String);

impl NonTerminalId {
    pub fn new(name: impl Into<String>) -> Result<Self, TemplateError> {
        let name = name.into();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(TemplateError::InvalidId(name));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NonTerminalId {
    type Error = TemplateError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<NonTerminalId> for String {
    fn from(id: NonTerminalId) -> Self {
        id.0
    }
}

impl fmt::Display for NonTerminalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Placeholder {
    pub id: NonTerminalId,
    pub cardinal: u32,
}

impl Placeholder {
    pub fn new(id: NonTerminalId, cardinal: u32) -> Self {
        Self { id, cardinal }
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}-{}}}", self.id, self.cardinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    Literal(String),
    Slot(Placeholder),
}

impl Segment {
    pub fn literal(text: impl Into<String>) -> Self {
        Segment::Literal(text.into())
    }

    pub fn slot(id: &NonTerminalId, cardinal: u32) -> Self {
        Segment::Slot(Placeholder::new(id.clone(), cardinal))
    }
}

/// Merge adjacent literals and drop empty ones so that structurally equal
/// templates compare equal.
fn normalize_segments(segments: impl IntoIterator<Item = Segment>) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for seg in segments {
        match seg {
            Segment::Literal(text) if text.is_empty() => {}
            Segment::Literal(text) => match out.last_mut() {
                Some(Segment::Literal(prev)) => prev.push_str(&text),
                _ => out.push(Segment::Literal(text)),
            },
            slot => out.push(slot),
        }
    }
    out
}

fn render_segments(segments: &[Segment], f: &mut impl fmt::Write) -> fmt::Result {
    for seg in segments {
        match seg {
            Segment::Literal(text) => {
                for c in text.chars() {
                    match c {
                        '{' => f.write_str("{{")?,
                        '}' => f.write_str("}}")?,
                        c => f.write_char(c)?,
                    }
                }
            }
            Segment::Slot(p) => write!(f, "{p}")?,
        }
    }
    Ok(())
}

/// A segment list whose cardinals need not follow the canonical convention.
/// Produced while rewriting templates; turn it into a [`Template`] with
/// [`canonicalize_cardinals`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawTemplate {
    segments: Vec<Segment>,
}

impl RawTemplate {
    pub fn new(segments: impl IntoIterator<Item = Segment>) -> Self {
        Self {
            segments: normalize_segments(segments),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn render(&self) -> String {
        self.to_string()
    }

    pub fn canonicalize(&self) -> Template {
        canonicalize_cardinals(self)
    }
}

impl fmt::Display for RawTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render_segments(&self.segments, f)
    }
}

/// A template satisfying the canonical-cardinal convention: cardinal `c > 0`
/// of a non-terminal first appears only after cardinal `c - 1` of the same
/// non-terminal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Template {
    segments: Vec<Segment>,
}

impl Template {
    pub fn new(segments: impl IntoIterator<Item = Segment>) -> Result<Self, TemplateError> {
        let segments = normalize_segments(segments);
        check_canonical(&segments)?;
        Ok(Self { segments })
    }

    /// A template with no placeholders.
    pub fn literal(text: impl Into<String>) -> Self {
        Self {
            segments: normalize_segments([Segment::Literal(text.into())]),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &Placeholder> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(p) => Some(p),
            Segment::Literal(_) => None,
        })
    }

    pub fn literals(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Literal(t) => Some(t.as_str()),
            Segment::Slot(_) => None,
        })
    }

    pub fn placeholder_count(&self) -> usize {
        self.placeholders().count()
    }

    /// Number of characters in literal segments.
    pub fn literal_len(&self) -> usize {
        self.literals().map(|t| t.chars().count()).sum()
    }

    /// Distinct ids in order of first appearance.
    pub fn ids(&self) -> Vec<&NonTerminalId> {
        let mut seen: IndexSet<&NonTerminalId> = IndexSet::new();
        for p in self.placeholders() {
            seen.insert(&p.id);
        }
        seen.into_iter().collect()
    }

    pub fn max_cardinal(&self, id: &NonTerminalId) -> Option<u32> {
        self.placeholders()
            .filter(|p| &p.id == id)
            .map(|p| p.cardinal)
            .max()
    }

    pub fn is_literal(&self) -> bool {
        self.placeholder_count() == 0
    }

    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Placeholder instances (same id and cardinal) that occur more than once.
    pub fn repeated_placeholders(&self) -> Vec<&Placeholder> {
        let mut counts: IndexSet<&Placeholder> = IndexSet::new();
        let mut repeated: IndexSet<&Placeholder> = IndexSet::new();
        for p in self.placeholders() {
            if !counts.insert(p) {
                repeated.insert(p);
            }
        }
        repeated.into_iter().collect()
    }

    pub fn into_raw(self) -> RawTemplate {
        RawTemplate {
            segments: self.segments,
        }
    }

    pub fn as_raw(&self) -> RawTemplate {
        RawTemplate {
            segments: self.segments.clone(),
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render_segments(&self.segments, f)
    }
}

impl std::str::FromStr for Template {
    type Err = TemplateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_template(s)
    }
}

impl Serialize for Template {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Template {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_template(&text).map_err(serde::de::Error::custom)
    }
}

fn check_canonical(segments: &[Segment]) -> Result<(), TemplateError> {
    let mut next: HashMap<&NonTerminalId, u32> = HashMap::new();
    for seg in segments {
        if let Segment::Slot(p) = seg {
            let expected = next.entry(&p.id).or_insert(0);
            if p.cardinal > *expected {
                return Err(TemplateError::CardinalGap {
                    id: p.id.clone(),
                    cardinal: p.cardinal,
                });
            }
            if p.cardinal == *expected {
                *expected += 1;
            }
        }
    }
    Ok(())
}

/// Parse the textual syntax without enforcing the cardinal convention.
pub fn parse_raw_template(text: &str) -> Result<RawTemplate, TemplateError> {
    let malformed = |reason: &str| TemplateError::MalformedPlaceholder {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                literal.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                literal.push('}');
            }
            '}' => return Err(malformed("unescaped '}'")),
            '{' => {
                let mut body = String::new();
                let mut closed = false;
                for c in chars.by_ref() {
                    if c == '}' {
                        closed = true;
                        break;
                    }
                    body.push(c);
                }
                if !closed {
                    return Err(malformed("unclosed '{'"));
                }
                let (name, cardinal) = match body.split_once('-') {
                    Some((name, card)) => {
                        if card.is_empty() || !card.chars().all(|c| c.is_ascii_digit()) {
                            return Err(malformed(&format!("bad cardinal {card:?}")));
                        }
                        let cardinal = card
                            .parse::<u32>()
                            .map_err(|_| malformed(&format!("cardinal {card:?} out of range")))?;
                        (name, cardinal)
                    }
                    None => (body.as_str(), 0),
                };
                let id = NonTerminalId::new(name)
                    .map_err(|_| malformed(&format!("bad non-terminal id {name:?}")))?;
                segments.push(Segment::Literal(std::mem::take(&mut literal)));
                segments.push(Segment::Slot(Placeholder::new(id, cardinal)));
            }
            c => literal.push(c),
        }
    }
    segments.push(Segment::Literal(literal));
    Ok(RawTemplate::new(segments))
}

pub fn parse_template(text: &str) -> Result<Template, TemplateError> {
    let raw = parse_raw_template(text)?;
    Template::new(raw.segments)
}

pub fn render_template(t: &Template) -> String {
    t.render()
}

/// Relabel cardinals per non-terminal by order of first occurrence.
pub fn canonicalize_cardinals(raw: &RawTemplate) -> Template {
    let mut relabel: HashMap<(&NonTerminalId, u32), u32> = HashMap::new();
    let mut next: HashMap<&NonTerminalId, u32> = HashMap::new();
    let segments = raw
        .segments
        .iter()
        .map(|seg| match seg {
            Segment::Literal(t) => Segment::Literal(t.clone()),
            Segment::Slot(p) => {
                let cardinal = *relabel.entry((&p.id, p.cardinal)).or_insert_with(|| {
                    let n = next.entry(&p.id).or_insert(0);
                    *n += 1;
                    *n - 1
                });
                Segment::Slot(Placeholder::new(p.id.clone(), cardinal))
            }
        })
        .collect();
    Template { segments }
}

/// Keyword → terminal strings. Lists are non-empty, terminals non-empty and
/// unique within one keyword.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<NonTerminalId, Vec<String>>")]
#[serde(into = "BTreeMap<NonTerminalId, Vec<String>>")]
pub struct Lexicon {
    entries: BTreeMap<NonTerminalId, Vec<String>>,
}

impl Lexicon {
    pub fn new(entries: BTreeMap<NonTerminalId, Vec<String>>) -> Result<Self, LexiconError> {
        for (id, terms) in &entries {
            check_entry(id, terms)?;
        }
        Ok(Self { entries })
    }

    /// Convenience constructor from string pairs.
    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self, LexiconError>
    where
        I: IntoIterator<Item = (S, Vec<T>)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut entries = BTreeMap::new();
        for (id, terms) in pairs {
            let id = NonTerminalId::new(id)?;
            entries.insert(id, terms.into_iter().map(Into::into).collect());
        }
        Self::new(entries)
    }

    pub fn insert(&mut self, id: NonTerminalId, terms: Vec<String>) -> Result<(), LexiconError> {
        check_entry(&id, &terms)?;
        self.entries.insert(id, terms);
        Ok(())
    }

    pub fn get(&self, id: &NonTerminalId) -> Option<&[String]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &NonTerminalId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NonTerminalId, &[String])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &NonTerminalId> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Restrict to the given ids, dropping everything else.
    pub fn restricted_to<'a>(&self, ids: impl IntoIterator<Item = &'a NonTerminalId>) -> Self {
        let mut entries = BTreeMap::new();
        for id in ids {
            if let Some(terms) = self.entries.get(id) {
                entries.insert(id.clone(), terms.clone());
            }
        }
        Self { entries }
    }
}

fn check_entry(id: &NonTerminalId, terms: &[String]) -> Result<(), LexiconError> {
    if terms.is_empty() {
        return Err(LexiconError::EmptyEntry(id.clone()));
    }
    let mut seen = IndexSet::new();
    for t in terms {
        if t.is_empty() {
            return Err(LexiconError::EmptyTerminal(id.clone()));
        }
        if !seen.insert(t) {
            return Err(LexiconError::DuplicateTerminal {
                id: id.clone(),
                terminal: t.clone(),
            });
        }
    }
    Ok(())
}

impl TryFrom<BTreeMap<NonTerminalId, Vec<String>>> for Lexicon {
    type Error = LexiconError;
    fn try_from(entries: BTreeMap<NonTerminalId, Vec<String>>) -> Result<Self, Self::Error> {
        Self::new(entries)
    }
}

impl From<Lexicon> for BTreeMap<NonTerminalId, Vec<String>> {
    fn from(lex: Lexicon) -> Self {
        lex.entries
    }
}

/// Distinct (id, cardinal) variables in order of first appearance.
fn variables(t: &Template) -> Vec<&Placeholder> {
    let mut vars: IndexSet<&Placeholder> = IndexSet::new();
    for p in t.placeholders() {
        vars.insert(p);
    }
    vars.into_iter().collect()
}

fn check_lexicon_covers(t: &Template, lex: &Lexicon) -> Result<(), ExpandError> {
    let mut needed: BTreeMap<&NonTerminalId, usize> = BTreeMap::new();
    for p in variables(t) {
        *needed.entry(&p.id).or_default() += 1;
    }
    for (id, needed) in needed {
        let terms = lex
            .get(id)
            .ok_or_else(|| ExpandError::MissingLexiconEntry(id.clone()))?;
        if terms.len() < needed {
            return Err(ExpandError::InsufficientTerminals {
                id: id.clone(),
                needed,
                available: terms.len(),
            });
        }
    }
    Ok(())
}

/// Every sentence the template generates, deduplicated in enumeration order.
/// With `limit`, a seeded uniform subsample of at most `limit` sentences is
/// kept, still in enumeration order.
pub fn expand(
    t: &Template,
    lex: &Lexicon,
    limit: Option<usize>,
    seed: u64,
) -> Result<Vec<String>, ExpandError> {
    check_lexicon_covers(t, lex)?;
    let vars = variables(t);
    let terms: Vec<&[String]> = vars
        .iter()
        .map(|p| lex.get(&p.id).expect("checked above"))
        .collect();
    let mut choice = vec![0usize; vars.len()];
    let mut out: IndexSet<String> = IndexSet::new();
    assign(t, &vars, &terms, 0, &mut choice, &mut out);
    let sentences: Vec<String> = out.into_iter().collect();
    Ok(match limit {
        Some(limit) => subsample(sentences, limit, seed),
        None => sentences,
    })
}

/// Seeded uniform subsample of at most `limit` items, in original order.
pub fn subsample<T>(items: Vec<T>, limit: usize, seed: u64) -> Vec<T> {
    if items.len() <= limit {
        return items;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = rand::seq::index::sample(&mut rng, items.len(), limit).into_vec();
    keep.sort_unstable();
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    keep.into_iter()
        .map(|i| slots[i].take().expect("indices are distinct"))
        .collect()
}

fn assign(
    t: &Template,
    vars: &[&Placeholder],
    terms: &[&[String]],
    depth: usize,
    choice: &mut Vec<usize>,
    out: &mut IndexSet<String>,
) {
    if depth == vars.len() {
        let mut sentence = String::new();
        for seg in t.segments() {
            match seg {
                Segment::Literal(text) => sentence.push_str(text),
                Segment::Slot(p) => {
                    let j = vars.iter().position(|v| *v == p).expect("variable");
                    sentence.push_str(&terms[j][choice[j]]);
                }
            }
        }
        out.insert(sentence);
        return;
    }
    'outer: for k in 0..terms[depth].len() {
        for j in 0..depth {
            if vars[j].id == vars[depth].id && choice[j] == k {
                continue 'outer;
            }
        }
        choice[depth] = k;
        assign(t, vars, terms, depth + 1, choice, out);
    }
}

/// Whether `sentence` is one of the sentences `t` generates under `lex`.
/// Backtracks over segments directly instead of enumerating.
pub fn generates(t: &Template, lex: &Lexicon, sentence: &str) -> bool {
    let mut bindings: Vec<(&Placeholder, &str)> = Vec::new();
    match_from(t.segments(), lex, sentence, &mut bindings)
}

fn match_from<'a>(
    segments: &'a [Segment],
    lex: &'a Lexicon,
    rest: &str,
    bindings: &mut Vec<(&'a Placeholder, &'a str)>,
) -> bool {
    let Some((first, tail)) = segments.split_first() else {
        return rest.is_empty();
    };
    match first {
        Segment::Literal(text) => {
            rest.starts_with(text.as_str()) && match_from(tail, lex, &rest[text.len()..], bindings)
        }
        Segment::Slot(p) => {
            if let Some(&(_, bound)) = bindings.iter().find(|(q, _)| *q == p) {
                return rest.starts_with(bound)
                    && match_from(tail, lex, &rest[bound.len()..], bindings);
            }
            let Some(terms) = lex.get(&p.id) else {
                return false;
            };
            for term in terms {
                if !rest.starts_with(term.as_str()) {
                    continue;
                }
                let taken = bindings
                    .iter()
                    .any(|(q, bound)| q.id == p.id && *bound == term.as_str());
                if taken {
                    continue;
                }
                bindings.push((p, term.as_str()));
                if match_from(tail, lex, &rest[term.len()..], bindings) {
                    return true;
                }
                bindings.pop();
            }
            false
        }
    }
}
