//! Template induction from example sentences.
//!
//! For every sentence, all templates that generate it from a given ordered
//! (terminal, keyword) list are enumerated; a greedy hitting set then picks a
//! small template set that generates every sentence. [`induce`] grows the
//! active keyword set one group at a time while the template count keeps
//! shrinking.

use std::collections::{BTreeMap, HashMap};

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checklist::{Capability, CheckListError};
use crate::extraction::{
    build_word_graph, extract_terminal_groups, to_grouped_lexicon, ExtractionConfig,
    ExtractionError, GroupOrder, GroupedLexicon, SentenceCorpus, TerminalGroup,
};
use crate::par::{self, Execution};
use crate::template::{
    canonicalize_cardinals, Lexicon, NonTerminalId, Placeholder, RawTemplate, Segment, Template,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InductionError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("candidate set for sentence {0} is empty")]
    EmptyCandidateSet(usize),
    #[error("invalid induction config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
}

/// How Step 3 ranks inactive keyword groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Usefulness {
    /// Sentences whose currently selected template still has one of the
    /// group's terminals in its literal text, times log2(1 + group size).
    #[default]
    Marginal,
    /// Sentences containing one of the group's terminals anywhere, times
    /// log2(1 + group size).
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InductionConfig {
    pub max_candidates_per_sentence: usize,
    pub max_occurrence_subsets: usize,
    pub min_template_support: usize,
    pub min_support_ratio: f64,
    pub max_active_nonterminals: usize,
    pub improvement_epsilon: f64,
    pub lexicon_order: GroupOrder,
    pub usefulness: Usefulness,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for InductionConfig {
    fn default() -> Self {
        Self {
            max_candidates_per_sentence: 10_000,
            max_occurrence_subsets: 64,
            min_template_support: 1,
            min_support_ratio: 0.0,
            max_active_nonterminals: 8,
            improvement_epsilon: 0.02,
            lexicon_order: GroupOrder::SupportDesc,
            usefulness: Usefulness::Marginal,
            execution: Execution::Parallel,
        }
    }
}

impl InductionConfig {
    /// Candidate and subset caps lifted; support filtering off.
    pub fn uncapped() -> Self {
        Self {
            max_candidates_per_sentence: usize::MAX,
            max_occurrence_subsets: usize::MAX,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), InductionError> {
        let bad = |m: &str| Err(InductionError::InvalidConfig(m.to_string()));
        if self.max_candidates_per_sentence < 1
            || self.max_occurrence_subsets < 1
            || self.max_active_nonterminals < 1
        {
            return bad("caps must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.min_support_ratio) {
            return bad("min_support_ratio must lie in [0, 1]");
        }
        if self.improvement_epsilon.is_nan() || self.improvement_epsilon < 0.0 {
            return bad("improvement_epsilon must be non-negative");
        }
        Ok(())
    }

    fn support_threshold(&self, n: usize) -> usize {
        let ratio = (self.min_support_ratio * n as f64).ceil() as usize;
        self.min_template_support.max(ratio)
    }
}

/// Byte ranges of every occurrence of `w` in `text`, overlapping ones included.
fn occurrences(text: &str, w: &str) -> Vec<usize> {
    if w.is_empty() {
        return Vec::new();
    }
    text.char_indices()
        .map(|(i, _)| i)
        .filter(|&i| text[i..].starts_with(w))
        .collect()
}

/// Subsets of non-overlapping occurrences, larger subsets first, each size in
/// lexicographic order, at most `cap` of them.
fn occurrence_subsets(occ: &[(usize, usize)], len: usize, cap: usize) -> Vec<Vec<usize>> {
    let overlaps = |a: (usize, usize), b: (usize, usize)| a.0 == b.0 && a.1.abs_diff(b.1) < len;
    // greedy leftmost selection is a maximum independent set for equal-length intervals
    let mut max = 0;
    let mut last: Option<(usize, usize)> = None;
    for &o in occ {
        if last.is_none_or(|l| !overlaps(l, o)) {
            max += 1;
            last = Some(o);
        }
    }
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(max);
    for size in (1..=max).rev() {
        choose(occ, &overlaps, 0, size, &mut chosen, &mut out, cap);
        if out.len() >= cap {
            break;
        }
    }
    out
}

fn choose(
    occ: &[(usize, usize)],
    overlaps: &impl Fn((usize, usize), (usize, usize)) -> bool,
    from: usize,
    size: usize,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    cap: usize,
) {
    if out.len() >= cap {
        return;
    }
    if chosen.len() == size {
        out.push(chosen.clone());
        return;
    }
    let need = size - chosen.len();
    for i in from..occ.len() {
        if occ.len() - i < need || out.len() >= cap {
            return;
        }
        if chosen.last().is_some_and(|&j| overlaps(occ[j], occ[i])) {
            continue;
        }
        chosen.push(i);
        choose(occ, overlaps, i + 1, size, chosen, out, cap);
        chosen.pop();
    }
}

/// Replace occurrences of terminal `w` in the literal text of `t` with a
/// placeholder for `v`.
///
/// Every non-empty set of pairwise non-overlapping occurrences yields one
/// template; all replaced occurrences share the new cardinal `h + 1`, where
/// `h` is the largest cardinal of `v` already present. At most `max_subsets`
/// templates are produced, larger replacement sets first. Returns nothing
/// when `w` does not occur.
pub fn replace_matched_string(
    t: &Template,
    w: &str,
    v: &NonTerminalId,
    max_subsets: usize,
) -> Vec<RawTemplate> {
    let segments = t.segments();
    let occ: Vec<(usize, usize)> = segments
        .iter()
        .enumerate()
        .flat_map(|(si, seg)| match seg {
            Segment::Literal(text) => occurrences(text, w)
                .into_iter()
                .map(|p| (si, p))
                .collect::<Vec<_>>(),
            Segment::Slot(_) => Vec::new(),
        })
        .collect();
    if occ.is_empty() {
        return Vec::new();
    }
    let cardinal = t.max_cardinal(v).map_or(0, |h| h + 1);
    let slot = Segment::Slot(Placeholder::new(v.clone(), cardinal));
    occurrence_subsets(&occ, w.len(), max_subsets)
        .into_iter()
        .map(|subset| {
            let mut out = Vec::with_capacity(segments.len() + 2 * subset.len());
            let mut picks = subset.iter().map(|&i| occ[i]).peekable();
            for (si, seg) in segments.iter().enumerate() {
                match seg {
                    Segment::Literal(text) => {
                        let mut pos = 0;
                        while let Some(&(_, p)) = picks.peek().filter(|(s, _)| *s == si) {
                            out.push(Segment::Literal(text[pos..p].to_string()));
                            out.push(slot.clone());
                            pos = p + w.len();
                            picks.next();
                        }
                        out.push(Segment::Literal(text[pos..].to_string()));
                    }
                    slot => out.push(slot.clone()),
                }
            }
            RawTemplate::new(out)
        })
        .collect()
}

/// The candidate templates of one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub sentence_index: usize,
    pub templates: Vec<Template>,
    /// The candidate cap was hit and lower-priority candidates were dropped.
    pub truncated: bool,
}

/// Truncation priority: more placeholders, less literal text, then render.
fn priority_cmp(a: &Template, b: &Template) -> std::cmp::Ordering {
    b.placeholder_count()
        .cmp(&a.placeholder_count())
        .then_with(|| a.literal_len().cmp(&b.literal_len()))
        .then_with(|| a.render().cmp(&b.render()))
}

/// Enumerate every template that generates `sentence` from `lexicon`,
/// starting from the literal sentence and trying each pair in order.
pub fn get_templates_per_example(
    sentence_index: usize,
    sentence: &str,
    lexicon: &GroupedLexicon,
    cfg: &InductionConfig,
) -> CandidateSet {
    let literal = Template::literal(sentence);
    let mut set: IndexSet<Template> = IndexSet::new();
    set.insert(literal.clone());
    let mut truncated = false;
    for (w, v) in lexicon.pairs() {
        if !sentence.contains(w.as_str()) {
            continue;
        }
        let mut fresh = Vec::new();
        for t in &set {
            if t.literals().any(|l| l.contains(w.as_str())) {
                fresh.extend(
                    replace_matched_string(t, w, v, cfg.max_occurrence_subsets)
                        .iter()
                        .map(canonicalize_cardinals),
                );
            }
        }
        set.extend(fresh);
        if set.len() > cfg.max_candidates_per_sentence {
            truncated = true;
            let mut rest: Vec<Template> = set.into_iter().filter(|t| *t != literal).collect();
            rest.sort_by(priority_cmp);
            rest.truncate(cfg.max_candidates_per_sentence - 1);
            set = std::iter::once(literal.clone()).chain(rest).collect();
        }
    }
    CandidateSet {
        sentence_index,
        templates: set.into_iter().collect(),
        truncated,
    }
}

pub fn candidate_sets(
    sentences: &[String],
    lexicon: &GroupedLexicon,
    cfg: &InductionConfig,
) -> Vec<CandidateSet> {
    par::map_indexed(cfg.execution, sentences, |i, s| {
        get_templates_per_example(i, s, lexicon, cfg)
    })
}

/// Result of the greedy hitting set over candidate sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    /// Selected templates in selection order, before support filtering.
    pub chosen: Vec<Template>,
    /// Number of candidate sets each chosen template belongs to.
    pub support: Vec<usize>,
    /// For each candidate set, the index into `chosen` of the template that
    /// covered it.
    pub assignment: Vec<usize>,
    /// Indices into `chosen` that meet the support threshold.
    pub kept: Vec<usize>,
    /// Candidate sets hit by no kept template.
    pub unexplained: Vec<usize>,
}

impl Cover {
    pub fn kept_templates(&self) -> impl Iterator<Item = (&Template, usize)> {
        self.kept
            .iter()
            .map(|&i| (&self.chosen[i], self.support[i]))
    }

    pub fn dropped_templates(&self) -> impl Iterator<Item = (&Template, usize)> {
        (0..self.chosen.len())
            .filter(|i| !self.kept.contains(i))
            .map(|i| (&self.chosen[i], self.support[i]))
    }
}

/// Greedy hitting set: repeatedly take the template present in the most
/// uncovered candidate sets (ties: more placeholders, fewer literal
/// characters, then render order). Chosen templates below the support
/// threshold are then dropped and the sets they alone hit are reported as
/// unexplained.
pub fn greedy_hitting_set(
    candidates: &[CandidateSet],
    cfg: &InductionConfig,
) -> Result<Cover, InductionError> {
    if let Some(c) = candidates.iter().find(|c| c.templates.is_empty()) {
        return Err(InductionError::EmptyCandidateSet(c.sentence_index));
    }
    let mut ids: HashMap<&Template, usize> = HashMap::new();
    let mut templates: Vec<&Template> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(candidates.len());
    for (si, c) in candidates.iter().enumerate() {
        let mut row = Vec::with_capacity(c.templates.len());
        for t in &c.templates {
            let id = *ids.entry(t).or_insert_with(|| {
                templates.push(t);
                members.push(Vec::new());
                templates.len() - 1
            });
            if members[id].last() != Some(&si) {
                members[id].push(si);
                row.push(id);
            }
        }
        sets.push(row);
    }
    let keys: Vec<(usize, usize, String)> = templates
        .iter()
        .map(|t| (t.placeholder_count(), t.literal_len(), t.render()))
        .collect();
    let mut count: Vec<usize> = members.iter().map(Vec::len).collect();
    let mut covered_by: Vec<Option<usize>> = vec![None; sets.len()];
    let mut remaining = sets.len();
    let mut chosen_ids = Vec::new();
    while remaining > 0 {
        let best = (0..templates.len())
            .filter(|&t| count[t] > 0)
            .min_by(|&a, &b| {
                count[b]
                    .cmp(&count[a])
                    .then_with(|| keys[b].0.cmp(&keys[a].0))
                    .then_with(|| keys[a].1.cmp(&keys[b].1))
                    .then_with(|| keys[a].2.cmp(&keys[b].2))
            })
            .expect("an uncovered set has a template");
        let pick = chosen_ids.len();
        chosen_ids.push(best);
        for &si in &members[best] {
            if covered_by[si].is_none() {
                covered_by[si] = Some(pick);
                remaining -= 1;
                for &t in &sets[si] {
                    count[t] -= 1;
                }
            }
        }
    }
    let threshold = cfg.support_threshold(candidates.len());
    let support: Vec<usize> = chosen_ids.iter().map(|&t| members[t].len()).collect();
    let kept: Vec<usize> = (0..chosen_ids.len())
        .filter(|&i| support[i] >= threshold)
        .collect();
    let kept_ids: Vec<usize> = kept.iter().map(|&i| chosen_ids[i]).collect();
    let unexplained = (0..sets.len())
        .filter(|&si| !sets[si].iter().any(|t| kept_ids.contains(t)))
        .collect();
    Ok(Cover {
        chosen: chosen_ids.iter().map(|&t| templates[t].clone()).collect(),
        support,
        assignment: covered_by
            .into_iter()
            .map(|c| c.expect("covered"))
            .collect(),
        kept,
        unexplained,
    })
}

/// Induced templates with the lexicon of the keywords they use.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedTemplateSet {
    pub templates: Vec<Template>,
    pub lexicon: Lexicon,
    pub support: IndexMap<Template, usize>,
    /// Sentences no kept template generates.
    pub unexplained: Vec<String>,
}

impl InducedTemplateSet {
    pub fn to_capability(&self, name: impl Into<String>) -> Result<Capability, CheckListError> {
        Capability::new(name, self.templates.clone(), self.lexicon.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub step: usize,
    pub activated: NonTerminalId,
    pub anchor: [String; 2],
    pub terminals: Vec<String>,
    pub usefulness: f64,
    pub templates_before: usize,
    pub templates_after: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeGroup {
    pub id: NonTerminalId,
    pub anchor: [String; 2],
    pub terminals: Vec<String>,
    pub overlaps: Vec<NonTerminalId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedTemplate {
    pub template: String,
    pub support: usize,
}

/// Diagnostic report written next to an induced capability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InductionReport {
    pub iterations: Vec<IterationRecord>,
    pub unexplained: Vec<String>,
    pub truncated_sentences: Vec<usize>,
    pub support: IndexMap<String, usize>,
    pub dropped: Vec<DroppedTemplate>,
    pub alternatives: Vec<AlternativeGroup>,
    pub groups_found: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Induction {
    pub result: InducedTemplateSet,
    pub report: InductionReport,
    /// Every group found by terminal extraction.
    pub groups: Vec<TerminalGroup>,
    /// Indices into `groups` that ended up active, in activation order.
    pub active: Vec<usize>,
    /// Candidate sets and cover of the final round.
    pub candidates: Vec<CandidateSet>,
    pub cover: Cover,
}

struct Round {
    lexicon: GroupedLexicon,
    candidates: Vec<CandidateSet>,
    cover: Cover,
}

fn run_round(
    sentences: &[String],
    groups: &[TerminalGroup],
    active: &[usize],
    cfg: &InductionConfig,
) -> Result<Round, InductionError> {
    let selected: Vec<TerminalGroup> = active.iter().map(|&i| groups[i].clone()).collect();
    let lexicon = to_grouped_lexicon(&selected, cfg.lexicon_order);
    let candidates = candidate_sets(sentences, &lexicon, cfg);
    let cover = greedy_hitting_set(&candidates, cfg)?;
    Ok(Round {
        lexicon,
        candidates,
        cover,
    })
}

fn mean_tokens_cmp(a: &TerminalGroup, b: &TerminalGroup) -> std::cmp::Ordering {
    let tokens = |g: &TerminalGroup| -> usize {
        g.terms().map(|t| t.split_whitespace().count().max(1)).sum()
    };
    (tokens(a) * b.len()).cmp(&(tokens(b) * a.len()))
}

fn score_groups(
    sentences: &[String],
    groups: &[TerminalGroup],
    active: &[usize],
    round: &Round,
    cfg: &InductionConfig,
) -> Option<(usize, f64)> {
    let inactive: Vec<usize> = (0..groups.len()).filter(|i| !active.contains(i)).collect();
    let texts: Vec<Vec<&str>> = match cfg.usefulness {
        Usefulness::Corpus => sentences.iter().map(|s| vec![s.as_str()]).collect(),
        Usefulness::Marginal => round
            .cover
            .assignment
            .iter()
            .map(|&c| round.cover.chosen[c].literals().collect())
            .collect(),
    };
    let scores = par::map(cfg.execution, &inactive, |&gi| {
        let g = &groups[gi];
        let coverage = texts
            .iter()
            .filter(|parts| parts.iter().any(|p| g.terms().any(|t| p.contains(t))))
            .count();
        (
            gi,
            coverage,
            coverage as f64 * (1.0 + g.len() as f64).log2(),
        )
    });
    scores
        .into_iter()
        .filter(|&(_, coverage, _)| coverage > 0)
        .min_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| mean_tokens_cmp(&groups[a.0], &groups[b.0]))
                .then_with(|| a.0.cmp(&b.0))
        })
        .map(|(gi, _, score)| (gi, score))
}

/// Extract keyword groups from the corpus, then activate them one at a time
/// (most useful first) while each activation shrinks the selected template
/// set by at least `improvement_epsilon` relative. The last non-improving
/// activation is rolled back.
pub fn induce(
    corpus: &SentenceCorpus,
    ecfg: &ExtractionConfig,
    icfg: &InductionConfig,
) -> Result<Induction, InductionError> {
    if corpus.is_empty() {
        return Err(InductionError::EmptyCorpus);
    }
    ecfg.validate()?;
    icfg.validate()?;
    let sentences = corpus.sentences();
    let graph = build_word_graph(corpus, ecfg)?;
    let groups = extract_terminal_groups(&graph, ecfg);

    let mut active: Vec<usize> = Vec::new();
    let mut round = run_round(sentences, &groups, &active, icfg)?;
    let mut iterations = Vec::new();
    while active.len() < icfg.max_active_nonterminals {
        let Some((gi, usefulness)) = score_groups(sentences, &groups, &active, &round, icfg) else {
            break;
        };
        let mut trial_active = active.clone();
        trial_active.push(gi);
        let trial = run_round(sentences, &groups, &trial_active, icfg)?;
        let before = round.cover.chosen.len();
        let after = trial.cover.chosen.len();
        let accepted =
            after < before && (before - after) as f64 >= icfg.improvement_epsilon * before as f64;
        let g = &groups[gi];
        iterations.push(IterationRecord {
            step: iterations.len() + 1,
            activated: g.id.clone(),
            anchor: [g.anchor.0.to_string(), g.anchor.1.to_string()],
            terminals: g.terms().map(str::to_string).collect(),
            usefulness,
            templates_before: before,
            templates_after: after,
            accepted,
        });
        if !accepted {
            break;
        }
        active = trial_active;
        round = trial;
    }

    let cover = round.cover;
    let full_lexicon = round.lexicon.lexicon();
    let templates: Vec<Template> = cover.kept_templates().map(|(t, _)| t.clone()).collect();
    let used: IndexSet<&NonTerminalId> = templates.iter().flat_map(|t| t.ids()).collect();
    let lexicon = full_lexicon.restricted_to(used.iter().copied());
    let support: IndexMap<Template, usize> = cover
        .kept_templates()
        .map(|(t, s)| (t.clone(), s))
        .collect();
    let unexplained: Vec<String> = cover
        .unexplained
        .iter()
        .map(|&i| sentences[i].clone())
        .collect();

    let active_terms: BTreeMap<&NonTerminalId, Vec<&str>> = active
        .iter()
        .map(|&i| (&groups[i].id, groups[i].terms().collect()))
        .collect();
    let alternatives = groups
        .iter()
        .enumerate()
        .filter(|(i, _)| !active.contains(i))
        .filter_map(|(_, g)| {
            let overlaps: Vec<NonTerminalId> = active_terms
                .iter()
                .filter(|(_, terms)| g.terms().any(|t| terms.contains(&t)))
                .map(|(id, _)| (*id).clone())
                .collect();
            (!overlaps.is_empty()).then(|| AlternativeGroup {
                id: g.id.clone(),
                anchor: [g.anchor.0.to_string(), g.anchor.1.to_string()],
                terminals: g.terms().map(str::to_string).collect(),
                overlaps,
            })
        })
        .collect();

    let report = InductionReport {
        iterations,
        unexplained: unexplained.clone(),
        truncated_sentences: round
            .candidates
            .iter()
            .filter(|c| c.truncated)
            .map(|c| c.sentence_index)
            .collect(),
        support: support.iter().map(|(t, &s)| (t.render(), s)).collect(),
        dropped: cover
            .dropped_templates()
            .map(|(t, s)| DroppedTemplate {
                template: t.render(),
                support: s,
            })
            .collect(),
        alternatives,
        groups_found: groups.len(),
    };
    Ok(Induction {
        result: InducedTemplateSet {
            templates,
            lexicon,
            support,
            unexplained,
        },
        report,
        groups,
        active,
        candidates: round.candidates,
        cover,
    })
}
