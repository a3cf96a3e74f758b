use std::collections::BTreeSet;
use std::path::PathBuf;

use proptest::prelude::*;

use pileak_core::analysis::Analyzer;
use pileak_core::fixture::{generate, FixtureSpec};
use pileak_core::gui::ViewElement;
use pileak_core::ir::{parse_code_unit, parse_rtable};
use pileak_core::pi::{classify, tokenize, Lexicon, PiKind};
use pileak_core::report::{aggregate, AppReport};
use pileak_core::sourcesink::SinkRegistry;

const REGS: [&str; 4] = ["$a", "$b", "r0", "this"];
const WRITABLE: [&str; 3] = ["$a", "$b", "r0"];

fn atom() -> impl Strategy<Value = String> {
    prop_oneof![
        (0..REGS.len()).prop_map(|i| REGS[i].to_owned()),
        any::<i64>().prop_map(|v| v.to_string()),
        "[ -~]{0,8}".prop_map(|s| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))),
        Just("null".to_owned()),
    ]
}

fn statement() -> impl Strategy<Value = String> {
    let dst = (0..WRITABLE.len()).prop_map(|i| WRITABLE[i]);
    let reg = (0..REGS.len()).prop_map(|i| REGS[i]);
    prop_oneof![
        (dst.clone(), atom()).prop_map(|(d, a)| format!("{d} = {a}")),
        (dst.clone(), reg.clone()).prop_map(|(d, r)| format!("{d} = (java.lang.String[]) {r}")),
        (dst.clone(), reg.clone()).prop_map(|(d, r)| format!("{d} = {r}.<p.C: java.lang.Object f>")),
        dst.clone().prop_map(|d| format!("{d} = <p.C: int s>")),
        (reg.clone(), atom()).prop_map(|(r, a)| format!("{r}.<p.C: java.lang.Object f> = {a}")),
        atom().prop_map(|a| format!("<p.C: int s> = {a}")),
        (dst.clone(), reg.clone(), atom(), atom()).prop_map(|(d, r, x, y)| format!(
            "{d} = virtualinvoke {r}.<p.C: java.lang.Object g(int,java.lang.String)>({x}, {y})"
        )),
        (reg.clone(), atom()).prop_map(|(r, x)| format!("interfaceinvoke {r}.<p.I: void h(java.lang.Object)>({x})")),
        reg.clone().prop_map(|r| format!("specialinvoke {r}.<java.lang.Object: void init()>()")),
        (dst, atom()).prop_map(|(d, x)| format!("{d} = staticinvoke <q.D: int k(long)>({x})")),
        atom().prop_map(|a| format!("return {a}")),
        Just("return".to_owned()),
    ]
}

fn unit_text() -> impl Strategy<Value = String> {
    (prop::collection::vec(statement(), 0..12), prop::collection::vec(statement(), 0..6), any::<bool>()).prop_map(
        |(a, b, with_super)| {
            let mut t = String::from("class p.C");
            if with_super {
                t.push_str(" extends android.app.Activity");
            }
            t.push_str("\nfield java.lang.Object f\nfield int s\n");
            t.push_str("method void m(int $a, java.lang.String $b, java.lang.Object r0):\n");
            for s in a {
                t.push_str(&format!("    {s}\n"));
            }
            t.push_str("method java.lang.Object n(long $a, long $b, long r0):\n");
            for s in b {
                t.push_str(&format!("  {s}\n"));
            }
            t
        },
    )
}

fn view(id: Option<String>, hint: Option<String>, text: Option<String>) -> ViewElement {
    ViewElement {
        view_class: "EditText".into(),
        id_name: id,
        numeric_id: None,
        hint,
        text,
        layout_file: PathBuf::new(),
        pi: None,
    }
}

fn signal() -> impl Strategy<Value = Option<String>> {
    prop::option::of("[a-zA-Z_ 0-9]{0,24}")
}

proptest! {
    #[test]
    fn jtac_render_parse_round_trip(text in unit_text()) {
        let unit = parse_code_unit(&text).unwrap();
        let rendered = unit.to_jtac();
        let again = parse_code_unit(&rendered).unwrap();
        prop_assert_eq!(&again, &unit);
        prop_assert_eq!(again.to_jtac(), rendered);
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_code_unit(&text);
    }

    #[test]
    fn parser_never_panics_on_near_misses(text in unit_text(), cut in 0usize..400, junk in "[<>(),.=:\"$ a-z0-9]{0,6}") {
        let mut t = text.clone();
        let at = (0..=cut.min(t.len())).rev().find(|&i| t.is_char_boundary(i)).unwrap_or(0);
        t.insert_str(at, &junk);
        if let Err(e) = parse_code_unit(&t) {
            let (_, line, column) = e.location();
            prop_assert!(line >= 1 && column >= 1);
        }
    }

    #[test]
    fn rtable_text_round_trip(ids in prop::collection::btree_map("[a-z][a-z0-9_]{0,10}", any::<u32>(), 0..20)) {
        let mut seen = BTreeSet::new();
        let text: String = ids
            .iter()
            .filter(|(_, v)| seen.insert(**v))
            .map(|(k, v)| format!("id {k} {v}\n"))
            .collect();
        let t = parse_rtable(&text, std::path::Path::new("r")).unwrap();
        prop_assert_eq!(parse_rtable(&t.to_text(), std::path::Path::new("r")).unwrap(), t);
    }

    #[test]
    fn tokens_are_lowercased_letters(s in "\\PC{0,40}") {
        for t in tokenize(&s) {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(char::is_alphabetic));
            prop_assert_eq!(t.to_lowercase(), t);
        }
    }

    #[test]
    fn id_signal_outranks_hint_and_text(id in signal(), hint in signal(), text in signal()) {
        let lex = Lexicon::builtin();
        let by_id = classify(&view(id.clone(), None, None), &lex);
        let all = classify(&view(id, hint.clone(), text.clone()), &lex);
        match by_id {
            Some(k) => prop_assert_eq!(all, Some(k)),
            None => {
                let by_hint = classify(&view(None, hint, None), &lex);
                if by_hint.is_some() {
                    prop_assert_eq!(all, by_hint);
                }
            }
        }
    }

    #[test]
    fn adding_a_term_never_unlabels(id in signal(), hint in signal(), word in "[a-z]{2,8}", k in 0usize..17) {
        let lex = Lexicon::builtin();
        let v = view(id, hint, None);
        let before = classify(&v, &lex);
        let mut more = lex.clone();
        if more.add_term(PiKind::ALL[k], &word).is_ok() && before.is_some() {
            prop_assert!(classify(&v, &more).is_some());
        }
    }
}

type LeakKey = (String, String, String, String);

fn leak_keys(a: &pileak_core::analysis::Analysis) -> BTreeSet<LeakKey> {
    a.leaks
        .iter()
        .map(|l| {
            (
                l.source.stmt.to_string(),
                l.sink_stmt.to_string(),
                l.sink_spec.category.name().to_owned(),
                l.sink_spec.sig.to_string(),
            )
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn more_sinks_never_fewer_leaks(seed in 0u64..10_000, keep in prop::collection::vec(any::<bool>(), 59)) {
        let dir = tempfile::tempdir().unwrap();
        generate(&FixtureSpec { seed, n_sources: 6, ..FixtureSpec::default() }, dir.path()).unwrap();
        let full = Analyzer::default();
        let mut subset = Analyzer::default();
        let mut reg = SinkRegistry::default();
        for (spec, k) in full.sinks.specs().iter().zip(keep.iter().chain(std::iter::repeat(&true))) {
            if *k {
                reg.push(spec.clone()).unwrap();
            }
        }
        subset.sinks = reg;
        let small = leak_keys(&subset.analyze_dir(dir.path()).unwrap());
        let big = leak_keys(&full.analyze_dir(dir.path()).unwrap());
        prop_assert!(small.is_subset(&big));

        let none = Analyzer { sinks: SinkRegistry::default(), ..Analyzer::default() };
        prop_assert!(none.analyze_dir(dir.path()).unwrap().leaks.is_empty());
    }

    #[test]
    fn aggregate_ignores_report_order(seeds in prop::collection::vec(0u64..500, 1..6), rot in 0usize..6) {
        let analyzer = Analyzer::default();
        let reports: Vec<AppReport> = seeds
            .iter()
            .map(|&seed| {
                let dir = tempfile::tempdir().unwrap();
                generate(&FixtureSpec { seed, n_sources: 4, ..FixtureSpec::default() }, dir.path()).unwrap();
                pileak_core::report::emit_report(&analyzer.analyze_dir(dir.path()).unwrap(), "t")
            })
            .collect();
        let mut shuffled = reports.clone();
        let n = shuffled.len();
        shuffled.rotate_left(rot % n);
        shuffled.reverse();
        let a = aggregate(&reports).unwrap();
        prop_assert_eq!(&aggregate(&shuffled).unwrap(), &a);

        let cells: u64 = a.destinations.iter().map(|d| d.first_party + d.third_party).sum();
        let per_app: u64 = reports.iter().map(|r| r.leaks.len() as u64).sum();
        prop_assert_eq!(cells, per_app);
        prop_assert!(a.prevalence.iter().all(|p| (0.0..=1.0).contains(&p.fraction)));
        prop_assert!(a.pi_by_destination.iter().all(|r| r.total <= a.apps as u64
            && [r.net, r.local_store, r.log, r.file_io].iter().all(|&c| c <= a.apps as u64)));
    }
}
