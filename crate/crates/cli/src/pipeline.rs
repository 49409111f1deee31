//! expand → translate → induce over every source template, then merge the
//! induced templates per capability and evaluate.

use std::path::PathBuf;

use amcg_core::checklist::{Capability, CheckList};
use amcg_core::extraction::SentenceCorpus;
use amcg_core::induction::{induce, IterationRecord};
use amcg_core::metrics::{
    metric_report, read_predictions, BleuConfig, MetricReport, ReportOptions,
};
use amcg_core::par;
use amcg_core::template::{expand, Lexicon, NonTerminalId, Segment, Template};
use amcg_mt::{TranslationRequest, Translator};
use indexmap::{IndexMap, IndexSet};
use serde::Serialize;
use serde_json::json;

use crate::commands::{induction_error, load_checklist};
use crate::config::Config;
use crate::{build_translator, commit, json_bytes, read_input, sha256_hex, CliError, Context};

#[derive(Debug, Clone, Serialize)]
pub struct SourceOutcome {
    pub template: String,
    pub sentences: usize,
    /// Distinct translated sentences fed to induction.
    pub translations: usize,
    pub induced: Vec<String>,
    pub unexplained: Vec<String>,
    pub truncated_sentences: usize,
    pub iterations: Vec<IterationRecord>,
    #[serde(skip)]
    templates: Vec<Template>,
    #[serde(skip)]
    lexicon: Lexicon,
}

#[derive(Debug, Clone, Serialize)]
pub struct MergedTemplate {
    pub template: String,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapabilityReport {
    pub name: String,
    pub sources: Vec<SourceOutcome>,
    /// Target templates induced from more than one source template.
    pub merged: Vec<MergedTemplate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub source_templates: usize,
    pub induced_templates: usize,
    pub mean_induced_per_source: f64,
    pub target_templates: usize,
    pub unexplained_sentences: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub capabilities: Vec<CapabilityReport>,
    pub summary: Summary,
}

pub struct PipelineOutput {
    pub checklist: CheckList,
    pub report: PipelineReport,
    pub metrics: MetricReport,
}

fn process(
    cfg: &Config,
    cap: &Capability,
    t: &Template,
    translator: &Translator,
    target: &str,
) -> Result<SourceOutcome, CliError> {
    let sentences = expand(t, &cap.lexicon, Some(cfg.expand_limit), cfg.seed).map_err(|e| {
        CliError::Input(format!(
            "capability {:?}: template {:?}: {e}",
            cap.name,
            t.render()
        ))
    })?;
    let translated = translator.translate(&TranslationRequest::new(
        sentences.clone(),
        &cfg.source_lang,
        target,
    )?)?;
    let corpus = SentenceCorpus::new(translated, target)
        .map_err(|e| CliError::Input(e.to_string()))?
        .with_source(t.render());
    let out = induce(&corpus, &cfg.extraction, &cfg.induction).map_err(induction_error)?;
    Ok(SourceOutcome {
        template: t.render(),
        sentences: sentences.len(),
        translations: corpus.len(),
        induced: out.result.templates.iter().map(Template::render).collect(),
        unexplained: out.result.unexplained.clone(),
        truncated_sentences: out.report.truncated_sentences.len(),
        iterations: out.report.iterations.clone(),
        templates: out.result.templates,
        lexicon: out.result.lexicon,
    })
}

/// Rename ids to positional placeholders `_0`, `_1`, .. so structurally
/// identical templates compare equal.
fn shape(t: &Template) -> (Template, Vec<NonTerminalId>) {
    let ids: Vec<NonTerminalId> = t.ids().into_iter().cloned().collect();
    let segments = t.segments().iter().map(|s| match s {
        Segment::Slot(p) => {
            let pos = ids.iter().position(|i| *i == p.id).expect("listed");
            Segment::slot(
                &NonTerminalId::new(format!("_{pos}")).expect("valid id"),
                p.cardinal,
            )
        }
        lit => lit.clone(),
    });
    (
        Template::new(segments).expect("renaming keeps cardinals canonical"),
        ids,
    )
}

/// Merge per-source induced templates of one capability: structurally equal
/// templates become one with unioned lexicons, and ids are shared between
/// templates whose keyword slots hold the same terminal set.
fn merge(
    name: &str,
    sources: &[SourceOutcome],
) -> Result<(Capability, Vec<MergedTemplate>), CliError> {
    struct Entry {
        terms: Vec<IndexSet<String>>,
        sources: IndexSet<String>,
    }
    let mut shapes: IndexMap<Template, Entry> = IndexMap::new();
    for src in sources {
        for t in &src.templates {
            let (key, ids) = shape(t);
            let e = shapes.entry(key).or_insert_with(|| Entry {
                terms: vec![IndexSet::new(); ids.len()],
                sources: IndexSet::new(),
            });
            for (slot, id) in e.terms.iter_mut().zip(&ids) {
                slot.extend(src.lexicon.get(id).unwrap_or_default().iter().cloned());
            }
            e.sources.insert(src.template.clone());
        }
    }
    let mut ids: IndexMap<(Vec<String>, usize), NonTerminalId> = IndexMap::new();
    let mut lexicon = Lexicon::default();
    let mut templates = Vec::new();
    let mut merged = Vec::new();
    for (key, entry) in &shapes {
        let mut assigned = Vec::with_capacity(entry.terms.len());
        for (pos, terms) in entry.terms.iter().enumerate() {
            let mut sorted: Vec<String> = terms.iter().cloned().collect();
            sorted.sort();
            let twin = entry.terms[..pos]
                .iter()
                .filter(|t| {
                    let mut s: Vec<String> = t.iter().cloned().collect();
                    s.sort();
                    s == sorted
                })
                .count();
            let next = ids.len() + 1;
            let id = ids
                .entry((sorted, twin))
                .or_insert_with(|| NonTerminalId::new(format!("KEY_{next}")).expect("valid id"))
                .clone();
            if !lexicon.contains(&id) {
                lexicon
                    .insert(id.clone(), terms.iter().cloned().collect())
                    .map_err(|e| CliError::Output(e.to_string()))?;
            }
            assigned.push(id);
        }
        let segments = key.segments().iter().map(|s| match s {
            Segment::Slot(p) => {
                let pos: usize = p.id.as_str()[1..].parse().expect("positional id");
                Segment::slot(&assigned[pos], p.cardinal)
            }
            lit => lit.clone(),
        });
        let t = Template::new(segments).expect("canonical");
        if entry.sources.len() > 1 {
            merged.push(MergedTemplate {
                template: t.render(),
                sources: entry.sources.iter().cloned().collect(),
            });
        }
        templates.push(t);
    }
    let cap =
        Capability::new(name, templates, lexicon).map_err(|e| CliError::Output(e.to_string()))?;
    Ok((cap, merged))
}

pub fn run_pipeline(cfg: &Config) -> Result<PipelineOutput, CliError> {
    let source = cfg
        .source_checklist
        .as_ref()
        .ok_or_else(|| CliError::Input("config has no source_checklist".into()))?;
    let target = cfg
        .target_lang
        .clone()
        .ok_or_else(|| CliError::Input("config has no target_lang".into()))?;
    let cl = load_checklist(source)?;
    let translator = build_translator(&cfg.provider)?;
    let records = match &cfg.predictions {
        Some(p) => {
            Some(read_predictions(&read_input(p)?).map_err(|e| CliError::Input(e.to_string()))?)
        }
        None => None,
    };

    let jobs: Vec<(usize, &Template)> = cl
        .capabilities
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.templates.iter().map(move |t| (ci, t)))
        .collect();
    let results = par::with_threads(cfg.workers(), |exec| {
        par::map(exec, &jobs, |&(ci, t)| {
            process(cfg, &cl.capabilities[ci], t, &translator, &target)
        })
    });
    let mut outcomes: Vec<Vec<SourceOutcome>> = vec![Vec::new(); cl.capabilities.len()];
    for ((ci, _), r) in jobs.iter().zip(results) {
        outcomes[*ci].push(r?);
    }

    let mut capabilities = Vec::new();
    let mut reports = Vec::new();
    for (cap, sources) in cl.capabilities.iter().zip(outcomes) {
        let (merged_cap, merged) = merge(&cap.name, &sources)?;
        capabilities.push(merged_cap);
        reports.push(CapabilityReport {
            name: cap.name.clone(),
            sources,
            merged,
        });
    }
    let all_sources: Vec<&SourceOutcome> = reports.iter().flat_map(|r| &r.sources).collect();
    let induced: usize = all_sources.iter().map(|s| s.induced.len()).sum();
    let target_templates: usize = capabilities.iter().map(|c| c.templates.len()).sum();
    if target_templates == 0 {
        return Err(CliError::Empty("induction produced no templates".into()));
    }
    let summary = Summary {
        source_templates: all_sources.len(),
        induced_templates: induced,
        mean_induced_per_source: induced as f64 / all_sources.len().max(1) as f64,
        target_templates,
        unexplained_sentences: all_sources.iter().map(|s| s.unexplained.len()).sum(),
    };
    let opts = ReportOptions {
        bleu: BleuConfig {
            sample_per_template: cfg.metrics.sample_per_template,
            seed: cfg.seed,
            ..Default::default()
        },
        dedupe_terms_across_ids: cfg.metrics.dedupe_terms,
    };
    let metrics = metric_report(&capabilities, records.as_deref(), &opts)
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(PipelineOutput {
        checklist: CheckList {
            language: target,
            capabilities,
        },
        report: PipelineReport {
            capabilities: reports,
            summary,
        },
        metrics,
    })
}

/// Output files of a pipeline run, manifest last.
pub fn pipeline_files(
    ctx: &Context,
    out: &PipelineOutput,
) -> Result<Vec<(PathBuf, Vec<u8>)>, CliError> {
    let cfg = &ctx.cfg;
    let mut files = vec![
        (
            ctx.out.join("checklist.json"),
            out.checklist.to_json().into_bytes(),
        ),
        (ctx.out.join("report.json"), json_bytes(&out.report)),
        (ctx.out.join("metrics.json"), json_bytes(&out.metrics)),
    ];
    if cfg.metrics.csv {
        files.push((
            ctx.out.join("metrics.csv"),
            out.metrics.to_csv().into_bytes(),
        ));
    }
    let hash_file = |p: &Option<PathBuf>| -> Result<Option<String>, CliError> {
        p.as_ref()
            .map(|p| {
                std::fs::read(p)
                    .map(|b| sha256_hex(&b))
                    .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
            })
            .transpose()
    };
    let config_json = serde_json::to_string(cfg).expect("config serializes");
    let outputs: IndexMap<String, String> = files
        .iter()
        .map(|(p, b)| {
            let name = p
                .file_name()
                .expect("file name")
                .to_string_lossy()
                .into_owned();
            (name, sha256_hex(b))
        })
        .collect();
    let manifest = json!({
        "tool": "amcg",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": amcg_core::VERSION,
        "config_sha256": sha256_hex(config_json.as_bytes()),
        "config": serde_json::from_str::<serde_json::Value>(&config_json).expect("json"),
        "inputs": {
            "source_checklist": hash_file(&cfg.source_checklist)?,
            "mock_rules": hash_file(&cfg.provider.rules)?,
            "predictions": hash_file(&cfg.predictions)?,
        },
        "outputs": outputs,
    });
    files.push((ctx.out.join("manifest.json"), json_bytes(&manifest)));
    Ok(files)
}

pub fn cmd_pipeline(ctx: &Context) -> Result<(), CliError> {
    if ctx.config_path.is_none() {
        return Err(CliError::Input("pipeline needs --config".into()));
    }
    let out = run_pipeline(&ctx.cfg)?;
    let files = pipeline_files(ctx, &out)?;
    commit(&files)?;
    let s = &out.report.summary;
    ctx.status(format!(
        "{} source templates -> {} induced ({:.2} per source), {} after merging; {} unexplained sentences",
        s.source_templates, s.induced_templates, s.mean_induced_per_source, s.target_templates, s.unexplained_sentences
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use amcg_core::template::parse_template;

    fn outcome(src: &str, templates: &[&str], lex: &[(&str, &[&str])]) -> SourceOutcome {
        SourceOutcome {
            template: src.into(),
            sentences: 0,
            translations: 0,
            induced: templates.iter().map(|t| t.to_string()).collect(),
            unexplained: Vec::new(),
            truncated_sentences: 0,
            iterations: Vec::new(),
            templates: templates
                .iter()
                .map(|t| parse_template(t).unwrap())
                .collect(),
            lexicon: Lexicon::from_pairs(lex.iter().map(|(k, v)| (*k, v.to_vec()))).unwrap(),
        }
    }

    #[test]
    fn merge_unions_equal_shapes_and_shares_ids() {
        let a = outcome("s1", &["yah {KEY_1} hai"], &[("KEY_1", &["acha", "bura"])]);
        let b = outcome(
            "s2",
            &["yah {KEY_2} hai", "vah {KEY_1} tha"],
            &[("KEY_2", &["sundar"]), ("KEY_1", &["acha", "bura"])],
        );
        let (cap, merged) = merge("c", &[a, b]).unwrap();
        let renders: Vec<String> = cap.templates.iter().map(Template::render).collect();
        assert_eq!(renders, vec!["yah {KEY_1-0} hai", "vah {KEY_2-0} tha"]);
        assert_eq!(
            cap.lexicon
                .get(&NonTerminalId::new("KEY_1").unwrap())
                .unwrap(),
            ["acha", "bura", "sundar"]
        );
        assert_eq!(
            cap.lexicon
                .get(&NonTerminalId::new("KEY_2").unwrap())
                .unwrap(),
            ["acha", "bura"]
        );
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].sources, vec!["s1", "s2"]);
    }

    #[test]
    fn merge_keeps_distinct_ids_within_a_template() {
        let a = outcome(
            "s",
            &["{A} and {B}"],
            &[("A", &["x", "y"]), ("B", &["y", "x"])],
        );
        let (cap, _) = merge("c", &[a]).unwrap();
        assert_eq!(cap.templates[0].render(), "{KEY_1-0} and {KEY_2-0}");
    }
}
