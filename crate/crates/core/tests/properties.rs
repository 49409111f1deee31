use amcg_core::extraction::{ExtractionConfig, SentenceCorpus};
use amcg_core::induction::{induce, InductionConfig};
use amcg_core::template::{
    canonicalize_cardinals, expand, generates, parse_raw_template, parse_template, Lexicon,
};
use proptest::prelude::*;

fn raw_template() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-c ]{1,3}",
        (0..3usize, 0..3u32).prop_map(|(i, c)| format!("{{{}-{c}}}", ["A", "B", "C"][i])),
    ];
    prop::collection::vec(piece, 1..6).prop_map(|v| v.concat())
}

fn lexicon() -> Lexicon {
    Lexicon::from_pairs([
        ("A", vec!["x", "y", "z"]),
        ("B", vec!["p", "q", "r"]),
        ("C", vec!["m", "n", "o"]),
    ])
    .unwrap()
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent(text in raw_template()) {
        let raw = parse_raw_template(&text).unwrap();
        let once = canonicalize_cardinals(&raw);
        prop_assert_eq!(canonicalize_cardinals(&once.as_raw()), once.clone());
        prop_assert_eq!(parse_template(&once.render()).unwrap(), once);
    }

    #[test]
    fn expansions_are_generated(text in raw_template()) {
        let t = canonicalize_cardinals(&parse_raw_template(&text).unwrap());
        let lex = lexicon();
        for s in expand(&t, &lex, Some(50), 0).unwrap() {
            prop_assert!(generates(&t, &lex, &s), "{} does not generate {:?}", t, s);
        }
    }

    #[test]
    fn induced_templates_cover_corpus(
        picks in prop::collection::btree_set((0..4usize, 0..4usize, 0..3usize), 1..10)
    ) {
        let subj = ["tom", "ana", "raj", "li"];
        let verb = ["runs", "sings", "reads", "cooks"];
        let tail = ["today", "well", "often"];
        let sentences: Vec<String> = picks
            .iter()
            .map(|&(a, b, c)| format!("{} {} {}", subj[a], verb[b], tail[c]))
            .collect();
        let corpus = SentenceCorpus::new(sentences.clone(), "en").unwrap();
        let out = induce(&corpus, &ExtractionConfig::default(), &InductionConfig::default()).unwrap();
        prop_assert!(out.result.unexplained.is_empty());
        prop_assert!(out.result.templates.len() <= sentences.len());
        for s in &sentences {
            prop_assert!(out.result.templates.iter().any(|t| generates(t, &out.result.lexicon, s)));
        }
    }
}
