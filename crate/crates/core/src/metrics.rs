//! CheckList comparison metrics: failure rate, diversity counts,
//! cross-template BLEU, template matching and FR correlation.

use std::collections::{BTreeSet, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checklist::Capability;
use crate::par::{self, Execution};
use crate::template::{expand, ExpandError, Lexicon, Segment, Template};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("capability {0:?} has no prediction records")]
    EmptyCapability(String),
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("constant vector: correlation undefined")]
    ConstantVector,
    #[error("predictions line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("predictions line {0}: labels must be non-empty")]
    EmptyLabel(usize),
    #[error(transparent)]
    Expand(#[from] ExpandError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sentence: String,
    #[serde(rename = "expected")]
    pub expected_label: String,
    #[serde(rename = "predicted")]
    pub predicted_label: String,
    pub capability: String,
}

impl PredictionRecord {
    pub fn is_failure(&self) -> bool {
        self.expected_label != self.predicted_label
    }
}

/// Parse JSON-lines predictions, skipping blank lines.
pub fn read_predictions(text: &str) -> Result<Vec<PredictionRecord>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: PredictionRecord =
            serde_json::from_str(line).map_err(|source| MetricsError::Json {
                line: i + 1,
                source,
            })?;
        if r.expected_label.is_empty() || r.predicted_label.is_empty() {
            return Err(MetricsError::EmptyLabel(i + 1));
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRates {
    pub per_capability: IndexMap<String, f64>,
    /// Unweighted mean over capabilities.
    pub macro_fr: f64,
}

/// FR per capability (in first-appearance order) and its macro average.
pub fn failure_rate(records: &[PredictionRecord]) -> Result<FailureRates, MetricsError> {
    let names: Vec<String> = records
        .iter()
        .map(|r| r.capability.clone())
        .collect::<indexmap::IndexSet<_>>()
        .into_iter()
        .collect();
    failure_rate_over(records, &names)
}

/// FR over an explicit capability list; a listed capability with no records
/// is an error.
pub fn failure_rate_over(
    records: &[PredictionRecord],
    capabilities: &[String],
) -> Result<FailureRates, MetricsError> {
    let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
    for r in records {
        let e = tally.entry(r.capability.as_str()).or_default();
        e.0 += usize::from(r.is_failure());
        e.1 += 1;
    }
    let mut per_capability = IndexMap::new();
    for name in capabilities {
        let (fail, total) = tally
            .get(name.as_str())
            .copied()
            .ok_or_else(|| MetricsError::EmptyCapability(name.clone()))?;
        per_capability.insert(name.clone(), fail as f64 / total as f64);
    }
    let macro_fr = mean(per_capability.values().copied());
    Ok(FailureRates {
        per_capability,
        macro_fr,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// (distinct canonical templates, distinct terminal strings).
pub fn diversity_counts(cap: &Capability) -> (usize, usize) {
    diversity_counts_with(cap, true)
}

/// With `dedupe_across_ids` off, a terminal listed under two ids counts twice.
pub fn diversity_counts_with(cap: &Capability, dedupe_across_ids: bool) -> (usize, usize) {
    let temps = cap.templates.iter().collect::<BTreeSet<_>>().len();
    let terms = if dedupe_across_ids {
        cap.lexicon
            .iter()
            .flat_map(|(_, ts)| ts.iter())
            .collect::<BTreeSet<_>>()
            .len()
    } else {
        cap.lexicon.iter().map(|(_, ts)| ts.len()).sum()
    };
    (temps, terms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BleuConfig {
    pub max_order: usize,
    pub sample_per_template: usize,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            sample_per_template: 50,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

type NgramCounts<'a> = HashMap<&'a [&'a str], usize>;

fn ngram_counts<'a>(tokens: &'a [&'a str], max_order: usize) -> NgramCounts<'a> {
    let mut out = HashMap::new();
    for n in 1..=max_order {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

/// Reference side of sentence BLEU: per n-gram maximum count over all
/// references, plus the set of reference lengths.
#[derive(Debug, Default)]
pub struct References<'a> {
    max_counts: NgramCounts<'a>,
    lengths: BTreeSet<usize>,
}

impl<'a> References<'a> {
    pub fn new(refs: &[&'a [&'a str]], max_order: usize) -> Self {
        let mut r = Self::default();
        for toks in refs {
            r.add(toks, max_order);
        }
        r
    }

    fn add(&mut self, toks: &'a [&'a str], max_order: usize) {
        self.lengths.insert(toks.len());
        for (g, c) in ngram_counts(toks, max_order) {
            let e = self.max_counts.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }

    fn merge(&mut self, other: &References<'a>) {
        self.lengths.extend(&other.lengths);
        for (g, &c) in &other.max_counts {
            let e = self.max_counts.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Reference length closest to `len`, the shorter one on ties.
    fn closest_len(&self, len: usize) -> usize {
        self.lengths
            .iter()
            .copied()
            .min_by_key(|&r| (r.abs_diff(len), r))
            .unwrap_or(0)
    }
}

/// Sentence BLEU with add-one smoothing on every order's precision and the
/// standard brevity penalty.
pub fn sentence_bleu(hyp: &[&str], refs: &References<'_>, max_order: usize) -> f64 {
    if hyp.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let counts = ngram_counts(hyp, max_order);
    let mut matched = vec![0usize; max_order + 1];
    for (g, &c) in &counts {
        matched[g.len()] += c.min(refs.max_counts.get(g).copied().unwrap_or(0));
    }
    let log_p: f64 = (1..=max_order)
        .map(|n| {
            let total = hyp.len().saturating_sub(n - 1);
            ((matched[n] + 1) as f64 / (total + 1) as f64).ln()
        })
        .sum::<f64>()
        / max_order as f64;
    let c = hyp.len() as f64;
    let r = refs.closest_len(hyp.len()) as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * log_p.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcBleu {
    /// Mean sentence BLEU over all scored samples.
    pub raw_mean: f64,
    /// `raw_mean` divided by the template count.
    pub normalized: f64,
    pub templates: usize,
    pub scored_sentences: usize,
}

fn template_seed(seed: u64, t: &Template) -> u64 {
    // FNV-1a over the render, so samples do not depend on template position
    t.render()
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325 ^ seed, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
}

/// Cross-template BLEU of a capability. Each template's sampled expansions
/// are scored against the pooled samples of every template with a different
/// canonical form. A capability with fewer than two templates scores 0.
pub fn cc_bleu(cap: &Capability, cfg: &BleuConfig) -> Result<CcBleu, MetricsError> {
    let n = cap.templates.len();
    let zero = CcBleu {
        raw_mean: 0.0,
        normalized: 0.0,
        templates: n,
        scored_sentences: 0,
    };
    if n < 2 {
        return Ok(zero);
    }
    let samples: Vec<Vec<String>> = cap
        .templates
        .iter()
        .map(|t| {
            expand(
                t,
                &cap.lexicon,
                Some(cfg.sample_per_template),
                template_seed(cfg.seed, t),
            )
        })
        .collect::<Result<_, _>>()?;
    let tokens: Vec<Vec<Vec<&str>>> = samples
        .iter()
        .map(|ss| ss.iter().map(|s| s.split_whitespace().collect()).collect())
        .collect();
    let per_template: Vec<References<'_>> = tokens
        .iter()
        .map(|ts| {
            let refs: Vec<&[&str]> = ts.iter().map(Vec::as_slice).collect();
            References::new(&refs, cfg.max_order)
        })
        .collect();
    let indices: Vec<usize> = (0..n).collect();
    let scores: Vec<Vec<f64>> = par::map(cfg.execution, &indices, |&i| {
        let mut pool = References::default();
        for j in (0..n).filter(|&j| cap.templates[j] != cap.templates[i]) {
            pool.merge(&per_template[j]);
        }
        if pool.is_empty() {
            return Vec::new();
        }
        tokens[i]
            .iter()
            .map(|h| sentence_bleu(h, &pool, cfg.max_order))
            .collect()
    });
    let flat: Vec<f64> = scores.into_iter().flatten().collect();
    if flat.is_empty() {
        return Ok(zero);
    }
    let raw_mean = mean(flat.iter().copied());
    Ok(CcBleu {
        raw_mean,
        normalized: raw_mean / n as f64,
        templates: n,
        scored_sentences: flat.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Part {
    Literal(String),
    Slot(usize, u32),
}

/// Template shape with ids renamed by first appearance; in strict mode each
/// renamed id also carries its terminal set.
fn signature(t: &Template, lex: &Lexicon, mode: MatchMode) -> (Vec<Part>, Vec<BTreeSet<String>>) {
    let ids = t.ids();
    let parts = t
        .segments()
        .iter()
        .map(|s| match s {
            Segment::Literal(l) => Part::Literal(l.clone()),
            Segment::Slot(p) => Part::Slot(
                ids.iter().position(|i| *i == &p.id).expect("id listed"),
                p.cardinal,
            ),
        })
        .collect();
    let terms = match mode {
        MatchMode::Lenient => Vec::new(),
        MatchMode::Strict => ids
            .iter()
            .map(|id| lex.get(id).unwrap_or_default().iter().cloned().collect())
            .collect(),
    };
    (parts, terms)
}

/// Outcome of matching candidate templates against reference templates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub precision: f64,
    pub recall: f64,
    pub matched: usize,
    pub unmatched_candidate: Vec<usize>,
    pub unmatched_reference: Vec<usize>,
}

/// Maximum matching between two template lists, each template paired with
/// the lexicon its ids refer to. Matching is an equivalence on signatures,
/// so a greedy pairing within each signature class is a maximum bipartite
/// matching. An empty side gives 1.0 for the ratio over it.
pub fn match_templates(
    candidate: &[(&Template, &Lexicon)],
    reference: &[(&Template, &Lexicon)],
    mode: MatchMode,
) -> MatchResult {
    let mut free: HashMap<_, Vec<usize>> = HashMap::new();
    for (i, (t, lex)) in reference.iter().enumerate().rev() {
        free.entry(signature(t, lex, mode)).or_default().push(i);
    }
    let mut used = vec![false; reference.len()];
    let mut unmatched_candidate = Vec::new();
    for (i, (t, lex)) in candidate.iter().enumerate() {
        match free.get_mut(&signature(t, lex, mode)).and_then(Vec::pop) {
            Some(j) => used[j] = true,
            None => unmatched_candidate.push(i),
        }
    }
    let matched = candidate.len() - unmatched_candidate.len();
    let ratio = |d: usize| {
        if d == 0 {
            1.0
        } else {
            matched as f64 / d as f64
        }
    };
    MatchResult {
        precision: ratio(candidate.len()),
        recall: ratio(reference.len()),
        matched,
        unmatched_candidate,
        unmatched_reference: (0..reference.len()).filter(|&j| !used[j]).collect(),
    }
}

fn paired(cap: &Capability) -> Vec<(&Template, &Lexicon)> {
    cap.templates.iter().map(|t| (t, &cap.lexicon)).collect()
}

/// (precision, recall) of candidate templates against reference templates.
pub fn template_match(
    candidate: &Capability,
    reference: &Capability,
    mode: MatchMode,
) -> (f64, f64) {
    let r = match_templates(&paired(candidate), &paired(reference), mode);
    (r.precision, r.recall)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    let ma = mean(a.iter().copied());
    let mb = mean(b.iter().copied());
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricsError::ConstantVector);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// (Pearson, Spearman) between two per-capability FR vectors.
pub fn fr_correlation(a: &[f64], b: &[f64]) -> Result<(f64, f64), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(MetricsError::TooShort(a.len()));
    }
    Ok((
        pearson(a, b)?,
        pearson(&average_ranks(a), &average_ranks(b))?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapabilityMetrics {
    /// Absent when no predictions were supplied.
    pub fr: Option<f64>,
    pub temp_count: usize,
    pub term_count: usize,
    pub cc_bleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub per_capability: IndexMap<String, CapabilityMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroMetrics {
    pub fr: Option<f64>,
    pub temp_count: f64,
    pub term_count: f64,
    pub cc_bleu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub bleu: BleuConfig,
    pub dedupe_terms_across_ids: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            bleu: BleuConfig::default(),
            dedupe_terms_across_ids: true,
        }
    }
}

/// Metrics for every capability; FR is filled in when predictions are given.
pub fn metric_report(
    capabilities: &[Capability],
    predictions: Option<&[PredictionRecord]>,
    opts: &ReportOptions,
) -> Result<MetricReport, MetricsError> {
    let fr = match predictions {
        Some(records) => {
            let names: Vec<String> = capabilities.iter().map(|c| c.name.clone()).collect();
            Some(failure_rate_over(records, &names)?)
        }
        None => None,
    };
    let mut per_capability = IndexMap::new();
    for cap in capabilities {
        let (temp_count, term_count) = diversity_counts_with(cap, opts.dedupe_terms_across_ids);
        per_capability.insert(
            cap.name.clone(),
            CapabilityMetrics {
                fr: fr.as_ref().map(|f| f.per_capability[&cap.name]),
                temp_count,
                term_count,
                cc_bleu: cc_bleu(cap, &opts.bleu)?.normalized,
            },
        );
    }
    let avg = |f: fn(&CapabilityMetrics) -> f64| mean(per_capability.values().map(f));
    let macro_avg = MacroMetrics {
        fr: fr.map(|f| f.macro_fr),
        temp_count: avg(|m| m.temp_count as f64),
        term_count: avg(|m| m.term_count as f64),
        cc_bleu: avg(|m| m.cc_bleu),
    };
    Ok(MetricReport {
        per_capability,
        macro_avg,
    })
}

impl MetricReport {
    /// One row per capability plus a trailing macro row.
    pub fn to_csv(&self) -> String {
        let fr = |f: Option<f64>| f.map(|v| format!("{v:.4}")).unwrap_or_default();
        let mut out = String::from("capability,fr,temp_count,term_count,cc_bleu\n");
        for (name, m) in &self.per_capability {
            let name = if name.contains([',', '"']) {
                format!("\"{}\"", name.replace('"', "\"\""))
            } else {
                name.clone()
            };
            out += &format!(
                "{name},{},{},{},{:.4}\n",
                fr(m.fr),
                m.temp_count,
                m.term_count,
                m.cc_bleu
            );
        }
        let m = &self.macro_avg;
        out += &format!(
            "macro,{},{:.2},{:.2},{:.4}\n",
            fr(m.fr),
            m.temp_count,
            m.term_count,
            m.cc_bleu
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::parse_template;

    fn rec(cap: &str, ok: bool) -> PredictionRecord {
        PredictionRecord {
            sentence: "s".into(),
            expected_label: "pos".into(),
            predicted_label: if ok { "pos" } else { "neg" }.into(),
            capability: cap.into(),
        }
    }

    fn cap(templates: &[&str], lex: &[(&str, &[&str])]) -> Capability {
        let lexicon = Lexicon::from_pairs(lex.iter().map(|(k, v)| (*k, v.to_vec()))).unwrap();
        let templates = templates
            .iter()
            .map(|t| parse_template(t).unwrap())
            .collect();
        Capability::new("c", templates, lexicon).unwrap()
    }

    #[test]
    fn fr_direct_ratio() {
        let rs: Vec<_> = (0..10).map(|i| rec("a", i >= 3)).collect();
        let fr = failure_rate(&rs).unwrap();
        assert!((fr.per_capability["a"] - 0.3).abs() < 1e-12);
        let ok: Vec<_> = (0..5).map(|_| rec("a", true)).collect();
        assert_eq!(failure_rate(&ok).unwrap().macro_fr, 0.0);
    }

    #[test]
    fn fr_macro_is_unweighted() {
        let mut rs: Vec<_> = (0..10).map(|i| rec("small", i >= 2)).collect();
        rs.extend((0..1000).map(|i| rec("big", i >= 400)));
        let fr = failure_rate(&rs).unwrap();
        assert!((fr.macro_fr - 0.3).abs() < 1e-12);
    }

    #[test]
    fn fr_listed_capability_without_records() {
        let err = failure_rate_over(&[rec("a", true)], &["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, MetricsError::EmptyCapability(n) if n == "b"));
    }

    #[test]
    fn predictions_jsonl() {
        let text = "{\"sentence\":\"x\",\"expected\":\"pos\",\"predicted\":\"neg\",\"capability\":\"c\"}\n\n";
        let rs = read_predictions(text).unwrap();
        assert!(rs[0].is_failure());
        let bad =
            "{\"sentence\":\"x\",\"expected\":\"\",\"predicted\":\"neg\",\"capability\":\"c\"}";
        assert!(matches!(
            read_predictions(bad),
            Err(MetricsError::EmptyLabel(1))
        ));
        assert!(matches!(
            read_predictions("nope"),
            Err(MetricsError::Json { line: 1, .. })
        ));
    }

    #[test]
    fn diversity_dedupes_across_ids() {
        let c = cap(
            &["{A} and {B}", "{B} or {A}"],
            &[("A", &["x", "y"]), ("B", &["y", "z"])],
        );
        assert_eq!(diversity_counts(&c), (2, 3));
        assert_eq!(diversity_counts_with(&c, false), (2, 4));
        assert_eq!(diversity_counts(&cap(&[], &[])), (0, 0));
    }

    #[test]
    fn bleu_identical_is_one() {
        let h = ["a", "b", "c", "d", "e"];
        let refs = References::new(&[&h[..]], 4);
        assert!((sentence_bleu(&h, &refs, 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_disjoint_hits_smoothing_floor() {
        let h = ["a", "b", "c", "d", "e"];
        let r = ["v", "w", "x", "y", "z"];
        let refs = References::new(&[&r[..]], 4);
        // same lengths, so no brevity penalty; p_n = 1 / (L - n + 2)
        let floor: f64 = (1..=4)
            .map(|n| 1.0 / (5 - n + 2) as f64)
            .product::<f64>()
            .powf(0.25);
        assert!((sentence_bleu(&h, &refs, 4) - floor).abs() < 1e-12);
    }

    #[test]
    fn brevity_penalty_uses_closest_length() {
        let h = ["a", "b"];
        let r1 = ["a", "b", "c"];
        let r2 = ["a", "b", "c", "d", "e", "f"];
        let refs = References::new(&[&r1[..], &r2[..]], 1);
        let expected = (1.0f64 - 1.5).exp() * (3.0 / 3.0);
        assert!((sentence_bleu(&h, &refs, 1) - expected).abs() < 1e-12);
    }

    #[test]
    fn cc_bleu_single_template_is_zero() {
        let c = cap(&["{A} x"], &[("A", &["p", "q"])]);
        assert_eq!(cc_bleu(&c, &BleuConfig::default()).unwrap().normalized, 0.0);
    }

    #[test]
    fn cc_bleu_disjoint_below_floor() {
        let c = cap(
            &["{A} b c d", "{B} w x y"],
            &[("A", &["a1", "a2"]), ("B", &["b1", "b2"])],
        );
        let s = cc_bleu(&c, &BleuConfig::default()).unwrap();
        let floor: f64 = (1..=4)
            .map(|n| 1.0 / (4 - n + 2) as f64)
            .product::<f64>()
            .powf(0.25);
        assert!(s.raw_mean <= floor + 1e-12);
        assert!((s.normalized - s.raw_mean / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cc_bleu_duplicate_templates_halve() {
        let base = ["{A} is good", "{A} was bad today", "nothing about {A}"];
        let lex: &[(&str, &[&str])] = &[("A", &["x", "y", "z"])];
        let one = cc_bleu(&cap(&base, lex), &BleuConfig::default()).unwrap();
        let doubled: Vec<&str> = base.iter().chain(base.iter()).copied().collect();
        let two = cc_bleu(&cap(&doubled, lex), &BleuConfig::default()).unwrap();
        assert!((two.raw_mean - one.raw_mean).abs() < 1e-9);
        assert!((two.normalized - one.normalized / 2.0).abs() < 1e-9);
    }

    #[test]
    fn cc_bleu_order_invariant() {
        let lex: &[(&str, &[&str])] = &[("A", &["x", "y", "z"])];
        let a = cc_bleu(
            &cap(&["{A} is good", "{A} was good"], lex),
            &BleuConfig::default(),
        )
        .unwrap();
        let b = cc_bleu(
            &cap(&["{A} was good", "{A} is good"], lex),
            &BleuConfig::default(),
        )
        .unwrap();
        assert!((a.normalized - b.normalized).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&a.normalized));
    }

    #[test]
    fn match_identical_and_lexicon_split() {
        let a = cap(&["{A} is {B}"], &[("A", &["x", "y"]), ("B", &["p"])]);
        assert_eq!(template_match(&a, &a, MatchMode::Strict), (1.0, 1.0));
        assert_eq!(template_match(&a, &a, MatchMode::Lenient), (1.0, 1.0));
        let b = cap(&["{A} is {B}"], &[("A", &["u"]), ("B", &["v"])]);
        assert_eq!(template_match(&a, &b, MatchMode::Strict), (0.0, 0.0));
        assert_eq!(template_match(&a, &b, MatchMode::Lenient), (1.0, 1.0));
    }

    #[test]
    fn match_renames_ids_and_keeps_cardinals() {
        let a = cap(
            &["{A} is {B}", "{A} and {A-1}"],
            &[("A", &["x", "y"]), ("B", &["p"])],
        );
        let b = cap(
            &["{K2} is {K1}", "{K2} and {K2}"],
            &[("K2", &["x", "y"]), ("K1", &["p"])],
        );
        assert_eq!(template_match(&a, &b, MatchMode::Strict), (0.5, 0.5));
        let (p, r) = template_match(
            &a,
            &cap(&["{K2} is {K1}"], &[("K2", &["x", "y"]), ("K1", &["p"])]),
            MatchMode::Strict,
        );
        assert_eq!((p, r), (0.5, 1.0));
    }

    #[test]
    fn match_detail_lists_unmatched() {
        let a = cap(
            &["{A} is {B}", "x {A}"],
            &[("A", &["x", "y"]), ("B", &["p"])],
        );
        let b = cap(
            &["{A} is {B}", "{A} z"],
            &[("A", &["x", "y"]), ("B", &["p"])],
        );
        let r = match_templates(&paired(&a), &paired(&b), MatchMode::Strict);
        assert_eq!(r.matched, 1);
        assert_eq!(r.unmatched_candidate, vec![1]);
        assert_eq!(r.unmatched_reference, vec![1]);
        let (p, r) = template_match(&a, &b, MatchMode::Lenient);
        let (p2, r2) = template_match(&b, &a, MatchMode::Lenient);
        assert_eq!((p, r), (r2, p2));
    }

    #[test]
    fn correlation_examples() {
        let (p, s) = fr_correlation(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((p - 1.0).abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        let (p, s) = fr_correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((p + 1.0).abs() < 1e-12 && (s + 1.0).abs() < 1e-12);
        let (p, s) = fr_correlation(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert!((s - 0.8).abs() < 1e-12);
        assert!((p - 0.8).abs() < 1e-12);
        assert!(matches!(
            fr_correlation(&[1.0, 1.0], &[1.0, 2.0]),
            Err(MetricsError::ConstantVector)
        ));
        assert!(matches!(
            fr_correlation(&[1.0], &[1.0]),
            Err(MetricsError::TooShort(1))
        ));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 10.0, 30.0]),
            vec![1.5, 3.0, 1.5, 4.0]
        );
    }

    #[test]
    fn report_and_csv() {
        let c = cap(&["{A} is good", "{A} is bad"], &[("A", &["x", "y"])]);
        let rs = vec![rec("c", true), rec("c", false)];
        let r = metric_report(&[c], Some(&rs), &ReportOptions::default()).unwrap();
        assert_eq!(r.per_capability["c"].fr, Some(0.5));
        let csv = r.to_csv();
        assert!(csv.starts_with("capability,fr,temp_count,term_count,cc_bleu\nc,0.5000,2,2,"));
        assert!(csv
            .lines()
            .last()
            .unwrap()
            .starts_with("macro,0.5000,2.00,2.00,"));
    }
}
