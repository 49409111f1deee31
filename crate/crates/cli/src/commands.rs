use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use amcg_core::checklist::{Capability, CheckList};
use amcg_core::extraction::SentenceCorpus;
use amcg_core::induction::{induce as induce_corpus, InductionError};
use amcg_core::metrics::{
    match_templates, metric_report, read_predictions, BleuConfig, MatchMode, ReportOptions,
};
use amcg_core::template::{expand as expand_template, subsample, Lexicon, Template};
use amcg_mt::TranslationRequest;
use indexmap::IndexSet;
use serde::Serialize;

use crate::config::ProviderConfig;
use crate::{
    build_translator, commit, json_bytes, lines_to_bytes, read_input, read_lines, slug, CliError,
    Context, DiffMode,
};

pub fn load_checklist(path: &Path) -> Result<CheckList, CliError> {
    CheckList::from_json(&read_input(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Every sentence of a capability, in template order, deduplicated. With
/// `limit`, a seeded subsample in that same order.
pub fn expand_capability(
    cap: &Capability,
    limit: Option<usize>,
    seed: u64,
) -> Result<Vec<String>, CliError> {
    let mut all: IndexSet<String> = IndexSet::new();
    for t in &cap.templates {
        let sentences = expand_template(t, &cap.lexicon, limit, seed).map_err(|e| {
            CliError::Input(format!(
                "capability {:?}: template {:?}: {e}",
                cap.name,
                t.render()
            ))
        })?;
        all.extend(sentences);
    }
    let all: Vec<String> = all.into_iter().collect();
    Ok(match limit {
        Some(l) => subsample(all, l, seed),
        None => all,
    })
}

pub fn expand(
    ctx: &Context,
    checklist: &Path,
    capability: Option<&str>,
    limit: Option<usize>,
) -> Result<(), CliError> {
    let cl = load_checklist(checklist)?;
    let caps: Vec<&Capability> = match capability {
        Some(name) => vec![cl
            .capability(name)
            .ok_or_else(|| CliError::Input(format!("no capability named {name:?}")))?],
        None => cl.capabilities.iter().collect(),
    };
    let mut files = Vec::new();
    for cap in caps {
        let sentences = expand_capability(cap, limit, ctx.cfg.seed)?;
        let path = ctx.out.join(format!("{}.txt", slug(&cap.name)));
        ctx.status(format!("{}: {} sentences", path.display(), sentences.len()));
        files.push((path, lines_to_bytes(&sentences)));
    }
    commit(&files)
}

pub fn translate(
    ctx: &Context,
    sentences: &Path,
    pc: &ProviderConfig,
    from: &str,
    to: &str,
) -> Result<(), CliError> {
    let lines = read_lines(sentences)?;
    let out = if lines.is_empty() {
        Vec::new()
    } else {
        let translator = build_translator(pc)?;
        translator.translate(&TranslationRequest::new(lines, from, to)?)?
    };
    let stem = sentences
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sentences".into());
    let path = ctx.out.join(format!("{stem}.{to}.txt"));
    ctx.status(format!("{}: {} translations", path.display(), out.len()));
    commit(&[(path, lines_to_bytes(&out))])
}

pub fn induction_error(e: InductionError) -> CliError {
    match e {
        InductionError::EmptyCandidateSet(_) => CliError::Empty(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

pub fn induce(
    ctx: &Context,
    sentences: &Path,
    name: Option<&str>,
    language: Option<&str>,
) -> Result<(), CliError> {
    let lines = read_lines(sentences)?;
    if lines.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no sentences",
            sentences.display()
        )));
    }
    let language = language
        .map(str::to_string)
        .or_else(|| ctx.cfg.target_lang.clone())
        .unwrap_or_else(|| "und".into());
    let name = name.map(str::to_string).unwrap_or_else(|| {
        sentences
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "induced".into())
    });
    let corpus = SentenceCorpus::new(lines, language.clone())
        .map_err(|e| CliError::Input(e.to_string()))?
        .with_source(sentences.display().to_string());
    let out =
        induce_corpus(&corpus, &ctx.cfg.extraction, &ctx.cfg.induction).map_err(induction_error)?;
    if out.result.templates.is_empty() {
        return Err(CliError::Empty(format!(
            "all {} sentences are unexplained at the configured support threshold",
            corpus.len()
        )));
    }
    let cap = out
        .result
        .to_capability(name)
        .map_err(|e| CliError::Output(e.to_string()))?;
    ctx.status(format!(
        "{} templates, {} keywords, {} unexplained",
        cap.templates.len(),
        cap.lexicon.len(),
        out.result.unexplained.len()
    ));
    let cl = CheckList {
        language,
        capabilities: vec![cap],
    };
    commit(&[
        (ctx.out.join("checklist.json"), cl.to_json().into_bytes()),
        (ctx.out.join("report.json"), json_bytes(&out.report)),
    ])
}

pub fn metrics(
    ctx: &Context,
    checklist: &Path,
    predictions: Option<&Path>,
    csv: bool,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let cl = load_checklist(checklist)?;
    let predictions = predictions.or(ctx.cfg.predictions.as_deref());
    let records = match predictions {
        Some(p) => {
            Some(read_predictions(&read_input(p)?).map_err(|e| CliError::Input(e.to_string()))?)
        }
        None => None,
    };
    let opts = ReportOptions {
        bleu: BleuConfig {
            sample_per_template: ctx.cfg.metrics.sample_per_template,
            seed: ctx.cfg.seed,
            ..Default::default()
        },
        dedupe_terms_across_ids: ctx.cfg.metrics.dedupe_terms,
    };
    let report = metric_report(&cl.capabilities, records.as_deref(), &opts)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let table = report.to_csv();
    let mut files = vec![(ctx.out.join("metrics.json"), json_bytes(&report))];
    if csv || ctx.cfg.metrics.csv {
        files.push((ctx.out.join("metrics.csv"), table.clone().into_bytes()));
    }
    commit(&files)?;
    write!(stdout, "{table}").map_err(|e| CliError::Output(e.to_string()))
}

#[derive(Serialize)]
struct DiffReport {
    mode: &'static str,
    precision: f64,
    recall: f64,
    matched: usize,
    unmatched_candidate: Vec<String>,
    unmatched_reference: Vec<String>,
}

fn flatten(cl: &CheckList) -> Vec<(&Template, &Lexicon, &str)> {
    cl.capabilities
        .iter()
        .flat_map(|c| {
            c.templates
                .iter()
                .map(move |t| (t, &c.lexicon, c.name.as_str()))
        })
        .collect()
}

pub fn diff(
    candidate: &Path,
    reference: &Path,
    mode: DiffMode,
    as_json: bool,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let a = load_checklist(candidate)?;
    let b = load_checklist(reference)?;
    let (fa, fb) = (flatten(&a), flatten(&b));
    let pa: Vec<_> = fa.iter().map(|(t, l, _)| (*t, *l)).collect();
    let pb: Vec<_> = fb.iter().map(|(t, l, _)| (*t, *l)).collect();
    let (mm, label) = match mode {
        DiffMode::Strict => (MatchMode::Strict, "strict"),
        DiffMode::Lenient => (MatchMode::Lenient, "lenient"),
    };
    let r = match_templates(&pa, &pb, mm);
    let show = |f: &[(&Template, &Lexicon, &str)], idx: &[usize]| -> Vec<String> {
        idx.iter()
            .map(|&i| format!("[{}] {}", f[i].2, f[i].0))
            .collect()
    };
    let report = DiffReport {
        mode: label,
        precision: r.precision,
        recall: r.recall,
        matched: r.matched,
        unmatched_candidate: show(&fa, &r.unmatched_candidate),
        unmatched_reference: show(&fb, &r.unmatched_reference),
    };
    let text = if as_json {
        String::from_utf8(json_bytes(&report)).expect("utf-8")
    } else {
        let mut s = format!(
            "mode: {}\nprecision: {:.4}\nrecall: {:.4}\nmatched: {}\n",
            report.mode, report.precision, report.recall, report.matched
        );
        s += &format!(
            "unmatched candidate templates ({}):\n",
            report.unmatched_candidate.len()
        );
        for t in &report.unmatched_candidate {
            s += &format!("  {t}\n");
        }
        s += &format!(
            "unmatched reference templates ({}):\n",
            report.unmatched_reference.len()
        );
        for t in &report.unmatched_reference {
            s += &format!("  {t}\n");
        }
        s
    };
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Output(e.to_string()))
}

/// Warnings for a parsed CheckList; each line names the capability.
pub fn lint_checklist(cl: &CheckList) -> Vec<String> {
    let mut out = Vec::new();
    for cap in &cl.capabilities {
        let name = &cap.name;
        if cap.templates.is_empty() {
            out.push(format!("{name}: no templates"));
        }
        let mut seen = IndexSet::new();
        for t in &cap.templates {
            if !seen.insert(t) {
                out.push(format!("{name}: duplicate template {t}"));
            }
            if t.is_literal() {
                out.push(format!("{name}: template {t} has no placeholders"));
            }
            for p in t.repeated_placeholders() {
                out.push(format!(
                    "{name}: template {t} repeats {p}, so both slots take one terminal"
                ));
            }
            for id in t.ids() {
                let needed = t.max_cardinal(id).map_or(0, |c| c as usize + 1);
                let available = cap.lexicon.get(id).map_or(0, <[String]>::len);
                if needed > available {
                    out.push(format!(
                        "{name}: template {t} needs {needed} distinct {id} terminals, lexicon has {available}"
                    ));
                }
            }
        }
        let used: IndexSet<_> = cap.templates.iter().flat_map(|t| t.ids()).collect();
        for id in cap.lexicon.ids() {
            if !used.contains(id) {
                out.push(format!("{name}: lexicon entry {id} is unused"));
            }
        }
        let mut owners: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for (id, terms) in cap.lexicon.iter() {
            for t in terms {
                owners.entry(t.as_str()).or_default().push(id.to_string());
            }
        }
        for (term, ids) in owners.into_iter().filter(|(_, ids)| ids.len() > 1) {
            out.push(format!(
                "{name}: terminal {term:?} listed under {}",
                ids.join(", ")
            ));
        }
    }
    out
}

pub fn lint(checklist: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cl = load_checklist(checklist)?;
    let warnings = lint_checklist(&cl);
    let mut text = String::new();
    for w in &warnings {
        text += &format!("warning: {w}\n");
    }
    text += &format!("{} warning(s)\n", warnings.len());
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Output(e.to_string()))
}
