//! Template grammar, terminal extraction, template induction and metrics for
//! multilingual CheckList generation.

pub mod checklist;
pub mod extraction;
pub mod induction;
pub mod metrics;
pub mod par;
pub mod template;

pub use checklist::{Capability, CheckList, CheckListError};
pub use extraction::{
    build_word_graph, extract_terminal_groups, to_grouped_lexicon, ExtractionConfig,
    ExtractionError, GroupOrder, GroupedLexicon, SentenceCorpus, TerminalGroup, Tokenizer,
    WordGraph,
};
pub use induction::{
    get_templates_per_example, greedy_hitting_set, induce, replace_matched_string, CandidateSet,
    InducedTemplateSet, Induction, InductionConfig, InductionError, InductionReport,
};
pub use par::Execution;
pub use template::{
    canonicalize_cardinals, expand, generates, parse_template, render_template, Lexicon,
    NonTerminalId, Placeholder, RawTemplate, Segment, Template, TemplateError,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
