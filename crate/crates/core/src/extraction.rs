//! Word-graph terminal extraction.
//!
//! Sentences become a directed graph over unique tokens, bracketed by
//! sentence-start and sentence-end sentinels. Whenever two nodes are joined by
//! several short simple paths, the token strings along those paths are grouped
//! under a fresh keyword (`KEY_1`, `KEY_2`, ...).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template::{Lexicon, NonTerminalId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid extraction config: {0}")]
    InvalidConfig(String),
}

/// Deduplicated example sentences, first occurrence wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceCorpus {
    sentences: Vec<String>,
    pub source_template_id: Option<String>,
    pub language: String,
}

impl SentenceCorpus {
    pub fn new(
        sentences: impl IntoIterator<Item = impl Into<String>>,
        language: impl Into<String>,
    ) -> Result<Self, ExtractionError> {
        let unique: IndexSet<String> = sentences.into_iter().map(Into::into).collect();
        if unique.is_empty() {
            return Err(ExtractionError::EmptyCorpus);
        }
        Ok(Self {
            sentences: unique.into_iter().collect(),
            source_template_id: None,
            language: language.into(),
        })
    }

    /// One sentence per line; blank lines are skipped.
    pub fn from_lines(text: &str, language: impl Into<String>) -> Result<Self, ExtractionError> {
        Self::new(
            text.lines()
                .map(|l| l.trim_end_matches('\r'))
                .filter(|l| !l.trim().is_empty()),
            language,
        )
    }

    pub fn with_source(mut self, id: impl Into<String>) -> Self {
        self.source_template_id = Some(id.into());
        self
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tokenizer {
    #[default]
    Whitespace,
    /// Whitespace split with punctuation split off into separate tokens.
    UnicodeWord,
}

impl Tokenizer {
    pub fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().collect(),
            Tokenizer::UnicodeWord => {
                let mut out = Vec::new();
                for word in text.split_whitespace() {
                    let mut start = 0;
                    for (i, c) in word.char_indices() {
                        if is_punct(c) {
                            if start < i {
                                out.push(&word[start..i]);
                            }
                            out.push(&word[i..i + c.len_utf8()]);
                            start = i + c.len_utf8();
                        }
                    }
                    if start < word.len() {
                        out.push(&word[start..]);
                    }
                }
                out
            }
        }
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || matches!(c, '।' | '॥' | '“' | '”' | '‘' | '’' | '…' | '¿' | '¡')
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Maximum tokens per terminal.
    pub k: usize,
    pub min_group_size: usize,
    pub min_terminal_support: usize,
    pub tokenizer: Tokenizer,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            k: 2,
            min_group_size: 2,
            min_terminal_support: 1,
            tokenizer: Tokenizer::Whitespace,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        if self.k < 1 {
            return Err(ExtractionError::InvalidConfig(
                "k must be at least 1".into(),
            ));
        }
        if self.min_group_size < 2 {
            return Err(ExtractionError::InvalidConfig(
                "min_group_size must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Graph node. Ordering puts the start sentinel first and the end sentinel
/// last, tokens lexicographically in between.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Bos,
    Token(String),
    Eos,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Bos => f.write_str("<s>"),
            Node::Token(t) => f.write_str(t),
            Node::Eos => f.write_str("</s>"),
        }
    }
}

const BOS: usize = 0;
const EOS: usize = 1;

#[derive(Debug, Clone)]
pub struct WordGraph {
    nodes: Vec<Node>,
    /// Rank of each node in [`Node`] order.
    rank: Vec<usize>,
    edges: BTreeMap<(usize, usize), usize>,
    successors: Vec<Vec<usize>>,
    /// Each sentence as node indices, sentinels included.
    paths: Vec<Vec<usize>>,
}

impl WordGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Edges as (from, to, count), in node order.
    pub fn edges(&self) -> Vec<(&Node, &Node, usize)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|(&(a, b), &c)| (&self.nodes[a], &self.nodes[b], c))
            .collect();
        out.sort();
        out
    }

    pub fn edge_count(&self, from: &Node, to: &Node) -> usize {
        let find = |n: &Node| self.nodes.iter().position(|m| m == n);
        match (find(from), find(to)) {
            (Some(a), Some(b)) => self.edges.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Whether the token sequence is a start-to-end path in the graph.
    pub fn has_sentence_path(&self, tokens: &[&str]) -> bool {
        let mut prev = BOS;
        for tok in tokens {
            let Some(next) = self.successors[prev]
                .iter()
                .copied()
                .find(|&n| matches!(&self.nodes[n], Node::Token(t) if t == tok))
            else {
                return false;
            };
            prev = next;
        }
        self.successors[prev].contains(&EOS)
    }

    fn token(&self, i: usize) -> &str {
        match &self.nodes[i] {
            Node::Token(t) => t,
            _ => unreachable!("sentinels are never intermediate nodes"),
        }
    }
}

pub fn build_word_graph(
    corpus: &SentenceCorpus,
    cfg: &ExtractionConfig,
) -> Result<WordGraph, ExtractionError> {
    if corpus.is_empty() {
        return Err(ExtractionError::EmptyCorpus);
    }
    let mut nodes = vec![Node::Bos, Node::Eos];
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut paths = Vec::with_capacity(corpus.len());
    for sentence in corpus.sentences() {
        let mut path = vec![BOS];
        for tok in cfg.tokenizer.tokenize(sentence) {
            let next = nodes.len();
            let i = *index.entry(tok.to_string()).or_insert(next);
            if i == next {
                nodes.push(Node::Token(tok.to_string()));
            }
            path.push(i);
        }
        path.push(EOS);
        for w in path.windows(2) {
            *edges.entry((w[0], w[1])).or_default() += 1;
        }
        paths.push(path);
    }
    let mut successors = vec![Vec::new(); nodes.len()];
    for &(a, b) in edges.keys() {
        successors[a].push(b);
    }
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a].cmp(&nodes[b]));
    let mut rank = vec![0; nodes.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    for succ in &mut successors {
        succ.sort_by_key(|&n| rank[n]);
    }
    Ok(WordGraph {
        nodes,
        rank,
        edges,
        successors,
        paths,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TerminalGroup {
    pub id: NonTerminalId,
    #[serde(serialize_with = "serialize_anchor")]
    pub anchor: (Node, Node),
    /// Terminal → corpus occurrences flanked by the anchor.
    pub terminals: BTreeMap<String, usize>,
}

fn serialize_anchor<S: serde::Serializer>(anchor: &(Node, Node), s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&anchor.0.to_string())?;
    seq.serialize_element(&anchor.1.to_string())?;
    seq.end()
}

impl TerminalGroup {
    pub fn len(&self) -> usize {
        self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terminals.keys().map(String::as_str)
    }

    pub fn total_support(&self) -> usize {
        self.terminals.values().sum()
    }
}

/// Debug dump: `[{"id", "anchor": [l, r], "terminals": {term: support}}]`.
pub fn groups_to_json(groups: &[TerminalGroup]) -> String {
    serde_json::to_string_pretty(groups).expect("groups serialize")
}

type Anchored = BTreeMap<(usize, usize), BTreeMap<Vec<usize>, usize>>;

/// Count every contiguous window `u m_1 .. m_j v` (1 <= j <= k) whose nodes
/// are pairwise distinct, keyed by anchor ranks.
fn window_paths(g: &WordGraph, k: usize) -> Anchored {
    let mut out: Anchored = BTreeMap::new();
    for path in &g.paths {
        for start in 0..path.len() {
            for j in 1..=k {
                let end = start + j + 1;
                if end >= path.len() {
                    break;
                }
                let window = &path[start..=end];
                if !all_distinct(window) {
                    continue;
                }
                let key = (g.rank[window[0]], g.rank[window[j + 1]]);
                *out.entry(key)
                    .or_default()
                    .entry(window[1..=j].to_vec())
                    .or_default() += 1;
            }
        }
    }
    out
}

/// All simple paths with 1..=k intermediate nodes, support looked up from the
/// corpus windows (zero for paths the graph admits but no sentence contains).
fn graph_paths(g: &WordGraph, k: usize) -> Anchored {
    let windows = window_paths(g, k);
    let mut out: Anchored = BTreeMap::new();
    let mut stack = Vec::with_capacity(k + 2);
    for u in 0..g.nodes.len() {
        stack.clear();
        stack.push(u);
        extend_paths(g, k, &mut stack, &windows, &mut out);
    }
    out
}

fn extend_paths(
    g: &WordGraph,
    k: usize,
    stack: &mut Vec<usize>,
    windows: &Anchored,
    out: &mut Anchored,
) {
    let last = *stack.last().expect("non-empty");
    for &next in &g.successors[last] {
        if stack.contains(&next) {
            continue;
        }
        if stack.len() >= 2 {
            let key = (g.rank[stack[0]], g.rank[next]);
            let mids = stack[1..].to_vec();
            let support = windows
                .get(&key)
                .and_then(|m| m.get(&mids))
                .copied()
                .unwrap_or(0);
            out.entry(key).or_default().insert(mids, support);
        }
        if stack.len() <= k && next != EOS {
            stack.push(next);
            extend_paths(g, k, stack, windows, out);
            stack.pop();
        }
    }
}

fn all_distinct(nodes: &[usize]) -> bool {
    nodes
        .iter()
        .enumerate()
        .all(|(i, a)| nodes[i + 1..].iter().all(|b| a != b))
}

pub fn extract_terminal_groups(g: &WordGraph, cfg: &ExtractionConfig) -> Vec<TerminalGroup> {
    // Every path with nonzero support is a corpus window, so the graph walk is
    // only needed when zero-support paths may survive.
    let anchored = if cfg.min_terminal_support == 0 {
        graph_paths(g, cfg.k)
    } else {
        window_paths(g, cfg.k)
    };
    let mut by_rank = vec![0; g.nodes.len()];
    for (i, &r) in g.rank.iter().enumerate() {
        by_rank[r] = i;
    }
    let mut merged: Vec<((Node, Node), BTreeMap<String, usize>)> = Vec::new();
    let mut seen: HashMap<BTreeSet<String>, usize> = HashMap::new();
    for ((ru, rv), paths) in anchored {
        let terminals: BTreeMap<String, usize> = paths
            .into_iter()
            .filter(|&(_, support)| support >= cfg.min_terminal_support)
            .map(|(mids, support)| {
                let words: Vec<&str> = mids.iter().map(|&m| g.token(m)).collect();
                (words.join(" "), support)
            })
            .collect();
        if terminals.len() < cfg.min_group_size {
            continue;
        }
        let key: BTreeSet<String> = terminals.keys().cloned().collect();
        match seen.get(&key) {
            Some(&i) => {
                for (t, s) in terminals {
                    *merged[i].1.entry(t).or_default() += s;
                }
            }
            None => {
                seen.insert(key, merged.len());
                let anchor = (g.nodes[by_rank[ru]].clone(), g.nodes[by_rank[rv]].clone());
                merged.push((anchor, terminals));
            }
        }
    }
    merged
        .into_iter()
        .enumerate()
        .map(|(i, (anchor, terminals))| TerminalGroup {
            id: NonTerminalId::new(format!("KEY_{}", i + 1)).expect("valid id"),
            anchor,
            terminals,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupOrder {
    /// Higher support first, then longer terminal, then lexicographic.
    #[default]
    SupportDesc,
    /// Group order, then terminal order within the group.
    Insertion,
}

/// Ordered (terminal, keyword) pairs consumed by candidate generation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroupedLexicon {
    pairs: Vec<(String, NonTerminalId)>,
}

impl GroupedLexicon {
    /// Duplicate pairs after the first are dropped.
    pub fn new(pairs: impl IntoIterator<Item = (String, NonTerminalId)>) -> Self {
        let unique: IndexSet<(String, NonTerminalId)> = pairs.into_iter().collect();
        Self {
            pairs: unique.into_iter().collect(),
        }
    }

    pub fn pairs(&self) -> &[(String, NonTerminalId)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Keyword → terminals, in pair order.
    pub fn lexicon(&self) -> Lexicon {
        let mut entries: BTreeMap<NonTerminalId, Vec<String>> = BTreeMap::new();
        for (w, v) in &self.pairs {
            entries.entry(v.clone()).or_default().push(w.clone());
        }
        Lexicon::new(entries).expect("pairs are unique and non-empty")
    }
}

pub fn to_grouped_lexicon(groups: &[TerminalGroup], order: GroupOrder) -> GroupedLexicon {
    let mut pairs: Vec<(usize, usize, &str, &NonTerminalId)> = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        for (t, &support) in &g.terminals {
            pairs.push((gi, support, t, &g.id));
        }
    }
    if order == GroupOrder::SupportDesc {
        pairs.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| b.2.chars().count().cmp(&a.2.chars().count()))
                .then_with(|| a.2.cmp(b.2))
                .then_with(|| a.0.cmp(&b.0))
        });
    }
    GroupedLexicon::new(
        pairs
            .into_iter()
            .map(|(_, _, t, id)| (t.to_string(), id.clone())),
    )
}
