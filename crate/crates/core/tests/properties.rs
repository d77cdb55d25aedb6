use std::collections::BTreeSet;

use proptest::prelude::*;
use vff_core::cleaning::{apply_exclusions, AnnotatedRecord, Annotation, CleaningRules};
use vff_core::corpus::{
    parse_sentences, render_corpus, AlternationClass, CorpusRecords, Lexicon, SentenceRecord, VerbEntry,
};
use vff_core::frames::{
    coarse_label, parse_argument_annotation, AnnotationError, Argument, Arguments, Atom, FrameSignature, PhraseTag,
    TreeFrame, INTRANSITIVE,
};
use vff_core::stats::{log_odds, ols_fit, Clamp};
use vff_core::treebank::{base_label, parse_tree, serialize_tree, TreeNode};
use vff_core::vff::{bin_low_frequency, relabel, RelabelMap, VerbFrameTable, OTHER};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(500)
}

fn label() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["S", "NP", "VP", "PP", "SBAR", "PRP$", ".", ",", "-NONE-", "-LRB-"])
            .prop_map(String::from),
        "(NP|S|PP)-(SBJ|TMP|CLR)(-[1-9])?",
    ]
}

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z]{1,8}",
        prop::sample::select(vec!["O'Brien", "café", "'s", "1,000", "$", "--", "``", "''"]).prop_map(String::from),
    ]
}

fn tree() -> impl Strategy<Value = TreeNode> {
    let leaf = (label(), token()).prop_map(|(l, t)| TreeNode::leaf(&l, &t));
    leaf.prop_recursive(5, 40, 4, |inner| {
        (label(), prop::collection::vec(inner, 1..4)).prop_map(|(l, c)| TreeNode::branch(&l, c))
    })
}

fn canonical(t: &TreeNode) -> TreeNode {
    let label = base_label(&t.label);
    match t.token() {
        Some(tok) => TreeNode::leaf(label, tok),
        None => TreeNode::branch(label, t.children().iter().map(canonical).collect()),
    }
}

fn tag() -> impl Strategy<Value = PhraseTag> {
    prop::sample::select(PhraseTag::ALL.to_vec())
}

fn span() -> impl Strategy<Value = String> {
    "[a-z]{1,6}( [a-z,']{1,6}){0,3}"
}

fn table() -> impl Strategy<Value = VerbFrameTable> {
    let frames = vec![
        "NP",
        "NP-NP",
        "NP-PP_to",
        "PP_on",
        "PP_on-PP_about",
        "SBAR",
        INTRANSITIVE,
        "S",
        "NP-S",
    ];
    prop::collection::vec((0..12usize, prop::sample::select(frames), 1..50u64), 1..60).prop_map(|cells| {
        let mut t = VerbFrameTable::new("llm");
        for (v, f, n) in cells {
            t.add(&format!("verb{v}"), f, n);
        }
        t
    })
}

fn lexicon() -> Lexicon {
    let v = |l: &str, f: [&str; 5]| VerbEntry::new(l, &f, AlternationClass::None, &[]).unwrap();
    Lexicon::new(vec![
        v("give", ["give", "gives", "gave", "given", "giving"]),
        v("load", ["load", "loads", "loaded", "loaded", "loading"]),
        v("sleep", ["sleep", "sleeps", "slept", "slept", "sleeping"]),
    ])
}

const TEXTS: [(&str, &str); 9] = [
    ("give", "She gave the kids a book, then left."),
    ("give", "The book was given to the kids."),
    ("give", "We will give it time."),
    ("load", "They loaded hay onto the truck."),
    ("load", "The truck got loaded quickly."),
    ("load", "A load of laundry"),
    ("sleep", "I slept."),
    ("sleep", "The cat is sleeping on the mat."),
    ("ghost", "Nobody is here."),
];

fn annotation() -> impl Strategy<Value = Annotation> {
    let spans = vec![
        "the kids",
        "a book",
        "hay",
        "onto the truck",
        "on the mat",
        "a unicorn",
        "it",
    ];
    let arg = (prop::sample::select(spans), tag()).prop_map(|(s, t)| Argument::new(s, t));
    prop_oneof![
        Just(Annotation::Missing("unparseable".into())),
        Just(Annotation::Llm(Arguments::NotAVerb)),
        Just(Annotation::Llm(Arguments::Intransitive)),
        Just(Annotation::Tree(TreeFrame::NotFound)),
        Just(Annotation::Tree(TreeFrame::NotAVerb)),
        prop::collection::vec(arg, 1..3).prop_map(|a| Annotation::Llm(Arguments::Args(a))),
    ]
}

fn records() -> impl Strategy<Value = Vec<AnnotatedRecord>> {
    prop::collection::vec((prop::sample::select(TEXTS.to_vec()), annotation()), 0..40).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(id, ((v, text), annotation))| AnnotatedRecord {
                sentence: SentenceRecord {
                    id: id as u64,
                    verb_lemma: v.into(),
                    context_number: None,
                    text: text.into(),
                    batch_id: "b".into(),
                },
                source: "llm".into(),
                annotation,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn trees_round_trip_up_to_functional_tags(t in tree()) {
        let s = serialize_tree(&t);
        let back = parse_tree(&s).unwrap();
        prop_assert_eq!(&back, &canonical(&t));
        prop_assert_eq!(serialize_tree(&back), serialize_tree(&canonical(&t)));
        prop_assert_eq!(back.leaves(), t.leaves());
    }

    #[test]
    fn sentences_round_trip(rows in prop::collection::vec(
        ("[a-z]{2,8}", prop::option::of(1..500u32), "[A-Z][^\n\r]{0,40}", "gen-[0-9]{5}"), 1..10,
    )) {
        let sentences: Vec<SentenceRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (verb_lemma, context_number, text, batch_id))| SentenceRecord {
                id: i as u64 + 1,
                verb_lemma,
                context_number,
                text,
                batch_id,
            })
            .collect();
        let text = render_corpus(&CorpusRecords::Sentences(sentences.clone())).unwrap();
        let back = parse_sentences(&text, "t").unwrap();
        prop_assert_eq!(&back, &sentences);
        prop_assert_eq!(render_corpus(&CorpusRecords::Sentences(back)).unwrap(), text);
    }

    #[test]
    fn rendered_annotations_parse_back(args in prop::collection::vec((span(), tag()), 1..5)) {
        let text: Vec<String> = args.iter().map(|(s, t)| format!("[{s}]_{t}")).collect();
        let parsed = parse_argument_annotation(&text.join(" ")).unwrap();
        let expected: Vec<Argument> = args.iter().map(|(s, t)| Argument::new(s, *t)).collect();
        prop_assert_eq!(parsed, Arguments::Args(expected));
    }

    #[test]
    fn tags_outside_the_alphabet_are_rejected(s in span(), bad in "[A-Z]{1,7}") {
        prop_assume!(bad.parse::<PhraseTag>().is_err());
        let r = parse_argument_annotation(&format!("[{s}]_{bad}"));
        prop_assert!(matches!(r, Err(AnnotationError::UnknownTag(_))));
    }

    #[test]
    fn frame_strings_round_trip(atoms in prop::collection::vec(
        prop_oneof![tag().prop_map(Atom::plain), "[a-z]{1,6}".prop_map(|p| Atom::pp(&p))], 0..4,
    )) {
        let f = FrameSignature::new(atoms);
        let s = f.to_string();
        prop_assert_eq!(FrameSignature::parse(&s), Some(f.clone()));
        let coarse = coarse_label(&s);
        prop_assert_eq!(coarse_label(&coarse), coarse.clone());
        prop_assert!(!coarse.contains('_'));
    }

    #[test]
    fn binning_conserves_counts(t in table(), p in 1.0..=100.0f64) {
        let b = bin_low_frequency(&t, p).unwrap();
        prop_assert_eq!(b.total(), t.total());
        for v in t.verbs() {
            prop_assert_eq!(b.verb_total(v), t.verb_total(v));
        }
        let binning = b.binning.clone().unwrap();
        let totals = b.frame_totals();
        for f in &binning.binned {
            prop_assert!(!totals.contains_key(f.as_str()));
        }
        for (f, &n) in &totals {
            prop_assert!(*f == OTHER || n >= binning.threshold);
        }
    }

    #[test]
    fn pp_relabel_conserves_counts(t in table()) {
        let r = relabel(&t, &RelabelMap::pp_as_intransitive()).unwrap();
        prop_assert_eq!(r.total(), t.total());
        for v in t.verbs() {
            prop_assert_eq!(r.verb_total(v), t.verb_total(v));
        }
        prop_assert!(r.frame_totals().keys().all(|f| !FrameSignature::parse(f).unwrap().is_pp_only()));
    }

    #[test]
    fn exclusions_partition_and_are_idempotent(input in records()) {
        let lex = lexicon();
        let rules = CleaningRules::default();
        let (kept, ledger) = apply_exclusions(input.clone(), &lex, &rules);
        prop_assert_eq!(kept.len() + ledger.len(), input.len());
        let kept_ids: BTreeSet<u64> = kept.iter().map(|r| r.sentence.id).collect();
        for r in &input {
            prop_assert!(kept_ids.contains(&r.sentence.id) != ledger.contains(r.sentence.id));
        }
        let (again, ledger2) = apply_exclusions(kept.clone(), &lex, &rules);
        prop_assert_eq!(again, kept);
        prop_assert!(ledger2.is_empty());
    }

    #[test]
    fn log_odds_is_antisymmetric_and_bounded(a in 0..10_000u64, b in 0..10_000u64) {
        prop_assume!(a + b > 0);
        let x = log_odds(a, b).unwrap();
        prop_assert!((x + log_odds(b, a).unwrap()).abs() < 1e-12);
        prop_assert!(x.abs() <= Clamp::default().cap() + 1e-12);
        prop_assert!(log_odds(a + 1, b).unwrap() >= x);
        if b > 0 {
            prop_assert!(log_odds(a, b + 1).unwrap() <= x);
        }
    }

    #[test]
    fn exact_lines_are_recovered(
        slope in -5.0..5.0f64,
        intercept in -5.0..5.0f64,
        xs in prop::collection::btree_set(-100i32..100, 3..20),
    ) {
        let xs: Vec<f64> = xs.into_iter().map(|x| x as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| intercept + slope * x).collect();
        let fit = ols_fit(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-8);
        prop_assert!((fit.intercept - intercept).abs() < 1e-8);
    }

    #[test]
    fn r_squared_lies_in_unit_interval(pts in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 3..30)) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        if let Ok(fit) = ols_fit(&xs, &ys) {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&fit.r2));
            prop_assert!((0.0..=1.0).contains(&fit.p_value));
        }
    }
}
