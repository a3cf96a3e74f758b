//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary so the lines always reach the output.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use pileak_core::analysis::Analyzer;
use pileak_core::fixture::{generate, ChainLen, ExpectedLeak, FixtureSpec};
use pileak_core::gui::ViewElement;
use pileak_core::ir::{parse_code_unit, AppBundle, LayoutDoc, RTable};
use pileak_core::pi::{classify, Lexicon, PiKind};
use pileak_core::report::{AppReport, Diagnostics, LeakRecord, PathStep, SCHEMA_VERSION};
use pileak_core::sourcesink::{SinkCategory, SourceTally};
use pileak_core::taint::{classify_party, Party};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pileak")
}

fn testdata(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/testdata").join(name)
}

fn pileak(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("run pileak")
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    if t > limit {
        Err(format!("took {t:?}, limit {limit:?}"))
    } else {
        Ok(t)
    }
}

fn golden(app: &str, want_pi: PiKind, want_party: Party, sink_name: &str) -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report_path = tmp.path().join("report.json");
    let dir = testdata(app);
    let out = pileak(&["analyze", "--app", dir.to_str().unwrap(), "--out", report_path.to_str().unwrap()]);
    ensure!(out.status.code() == Some(0), "analyze exited {:?}", out.status.code());
    let r = AppReport::read(&report_path).map_err(|e| e.to_string())?;
    ensure!(r.leaks.len() == 1, "expected exactly 1 leak, got {}", r.leaks.len());
    let l = &r.leaks[0];
    ensure!(l.pi == want_pi, "pi {:?}", l.pi);
    ensure!(l.party == want_party, "party {:?}", l.party);
    ensure!(l.category == SinkCategory::LocalStore, "category {:?}", l.category);
    let out = pileak(&["explain", "--report", report_path.to_str().unwrap(), "--leak", "0"]);
    ensure!(out.status.code() == Some(0), "explain exited {:?}", out.status.code());
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let last = text.lines().last().unwrap_or_default();
    ensure!(last.ends_with(" SINK") && last.contains(sink_name), "trace ends with `{last}`");
    let t = within(Duration::from_secs(1), start)?;
    Ok(format!("{:?}/{:?}/LocalStore, path_len {}, {t:.0?}", l.pi, l.party, l.path_len))
}

fn c3_classifier() -> Check {
    let lex = Lexicon::builtin();
    let view = |id: Option<&str>, text: Option<&str>| ViewElement {
        view_class: "EditText".into(),
        id_name: id.map(str::to_owned),
        numeric_id: None,
        hint: None,
        text: text.map(str::to_owned),
        layout_file: PathBuf::new(),
        pi: None,
    };
    let table = [
        (PiKind::MedicalHistory, &["Surgery", "Allergy"][..]),
        (PiKind::Medication, &["Prescription", "Dosage", "Dose", "Drug"]),
        (PiKind::Blood, &["Glucose", "Cholesterol", "Oxygen", "Pressure"]),
        (PiKind::MentalHealth, &["Stress", "Panic", "Anxiety", "Depress"]),
    ];
    let mut cases: Vec<(ViewElement, PiKind, String)> = Vec::new();
    for (kind, terms) in table {
        for t in terms {
            cases.push((view(None, Some(t)), kind, format!("text `{t}`")));
            let id = format!("{}Input", t.to_lowercase());
            cases.push((view(Some(&id), None), kind, format!("id `{id}`")));
        }
    }
    cases.push((view(Some("weightEditText"), None), PiKind::Weight, "weightEditText".into()));
    cases.push((view(Some("user_birthday_button"), None), PiKind::Age, "user_birthday_button".into()));
    let failures: Vec<String> = cases
        .iter()
        .filter_map(|(v, want, what)| {
            let got = classify(v, &lex);
            (got != Some(*want)).then(|| format!("{what}: {got:?} != {want:?}"))
        })
        .collect();
    ensure!(failures.is_empty(), "{}", failures.join("; "));
    Ok(format!("{} cases", cases.len()))
}

/// Statements of a random single-method fixture, before rendering.
#[derive(Clone)]
enum G {
    Source { dst: usize, view: i64 },
    Copy { dst: usize, src: usize },
    Const { dst: usize },
    FieldWrite { field: usize, src: usize },
    FieldRead { dst: usize, field: usize },
    Opaque { dst: usize, recv: usize },
    LogSink { arg: usize },
    PrefSink { arg: usize },
}

const REGS: [&str; 6] = ["$a", "$b", "$c", "$d", "$e", "$f"];
const FIELDS: [&str; 2] = ["f", "g"];
const CLASS: &str = "com.r.app.Main";
const EDITOR: &str = "android.content.SharedPreferences$Editor";

fn render(g: &G) -> String {
    match g {
        G::Source { dst, view } => format!(
            "{} = virtualinvoke this.<android.app.Activity: android.view.View findViewById(int)>({view})",
            REGS[*dst]
        ),
        G::Copy { dst, src } => format!("{} = {}", REGS[*dst], REGS[*src]),
        G::Const { dst } => format!("{} = 42", REGS[*dst]),
        G::FieldWrite { field, src } => format!("this.<{CLASS}: java.lang.Object {}> = {}", FIELDS[*field], REGS[*src]),
        G::FieldRead { dst, field } => format!("{} = this.<{CLASS}: java.lang.Object {}>", REGS[*dst], FIELDS[*field]),
        G::Opaque { dst, recv } => format!(
            "{} = virtualinvoke {}.<java.lang.Object: java.lang.String toString()>()",
            REGS[*dst], REGS[*recv]
        ),
        G::LogSink { arg } => format!(
            "staticinvoke <android.util.Log: int d(java.lang.String,java.lang.String)>(\"t\", {})",
            REGS[*arg]
        ),
        G::PrefSink { arg } => format!(
            "interfaceinvoke e.<{EDITOR}: {EDITOR} putString(java.lang.String,java.lang.String)>(\"k\", {})",
            REGS[*arg]
        ),
    }
}

fn random_fixture(rng: &mut ChaCha8Rng) -> Vec<G> {
    let n = rng.gen_range(2..=11); // plus the trailing return
    let mut defined: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for i in 0..n {
        let pick_use = |rng: &mut ChaCha8Rng, defined: &[usize]| *defined.choose(rng).unwrap();
        let dst = rng.gen_range(0..REGS.len());
        let g = if i == 0 || rng.gen_bool(0.1) {
            G::Source { dst, view: [101, 102, 103][rng.gen_range(0..3)] }
        } else {
            match rng.gen_range(0..100) {
                0..=29 => G::Copy { dst, src: pick_use(rng, &defined) },
                30..=34 => G::Const { dst },
                35..=46 => G::FieldWrite { field: rng.gen_range(0..2), src: pick_use(rng, &defined) },
                47..=58 => G::FieldRead { dst, field: rng.gen_range(0..2) },
                59..=70 => G::Opaque { dst, recv: pick_use(rng, &defined) },
                71..=87 => G::LogSink { arg: pick_use(rng, &defined) },
                _ => G::PrefSink { arg: pick_use(rng, &defined) },
            }
        };
        match &g {
            G::Source { dst, .. } | G::Copy { dst, .. } | G::Const { dst } | G::FieldRead { dst, .. } | G::Opaque { dst, .. } => {
                defined.push(*dst)
            }
            _ => {}
        }
        out.push(g);
    }
    out.shuffle(rng);
    out
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum N {
    Reg(usize),
    Field(usize),
    Editor,
    This,
}

/// Edges of the fixture's propagation relation, written from the rules
/// directly: (from, to, inducing statement ordinal).
fn oracle_edges(stmts: &[G]) -> Vec<(N, N, usize)> {
    let mut e = Vec::new();
    for (k, g) in stmts.iter().enumerate() {
        match *g {
            G::Source { dst, .. } => e.push((N::This, N::Reg(dst), k)),
            G::Copy { dst, src } => e.push((N::Reg(src), N::Reg(dst), k)),
            G::Const { .. } => {}
            G::FieldWrite { field, src } => e.push((N::Reg(src), N::Field(field), k)),
            G::FieldRead { dst, field } => e.push((N::Field(field), N::Reg(dst), k)),
            G::Opaque { dst, recv } => e.push((N::Reg(recv), N::Reg(dst), k)),
            G::LogSink { .. } => {}
            G::PrefSink { arg } => e.push((N::Reg(arg), N::Editor, k)),
        }
    }
    e
}

/// Shortest, then lexicographically smallest, label sequence from `from`
/// to `to` by exhaustive simple-path enumeration.
fn brute_force(edges: &[(N, N, usize)], from: N, to: N) -> Option<Vec<usize>> {
    fn go(edges: &[(N, N, usize)], at: N, to: N, seen: &mut Vec<N>, acc: &mut Vec<usize>, best: &mut Option<Vec<usize>>) {
        if at == to {
            let better = match best {
                None => true,
                Some(b) => (acc.len(), &*acc) < (b.len(), &*b),
            };
            if better {
                *best = Some(acc.clone());
            }
            return;
        }
        for &(a, b, label) in edges {
            if a != at || seen.contains(&b) {
                continue;
            }
            seen.push(b);
            acc.push(label);
            go(edges, b, to, seen, acc, best);
            acc.pop();
            seen.pop();
        }
    }
    let mut best = None;
    go(edges, from, to, &mut vec![from], &mut Vec::new(), &mut best);
    best
}

fn fixture_bundle(stmts: &[G]) -> AppBundle {
    let mut text = format!(
        "class {CLASS} extends android.app.Activity\nfield java.lang.Object f\nfield java.lang.Object g\nmethod void m({EDITOR} e):\n"
    );
    for g in stmts {
        text.push_str("    ");
        text.push_str(&render(g));
        text.push('\n');
    }
    text.push_str("    return\n");
    let unit = parse_code_unit(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let mut rtable = RTable::default();
    rtable.insert("email", 101).unwrap();
    rtable.insert("user_age", 102).unwrap();
    rtable.insert("submit", 103).unwrap();
    AppBundle {
        root: PathBuf::new(),
        app_package: "com.r.app".into(),
        layouts: vec![LayoutDoc {
            path: "res/layout/main.xml".into(),
            source: r#"<LinearLayout xmlns:android="http://schemas.android.com/apk/res/android">
                <EditText android:id="@+id/email"/>
                <EditText android:id="@+id/user_age"/>
                <Button android:id="@+id/submit" android:text="Submit"/>
              </LinearLayout>"#
                .into(),
        }],
        rtable,
        code_units: [(CLASS.to_owned(), unit)].into(),
    }
}

fn c4_shortest_paths() -> Check {
    let start = Instant::now();
    let analyzer = Analyzer::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut pairs = 0usize;
    for case in 0..1000 {
        let stmts = random_fixture(&mut rng);
        let a = analyzer.analyze(fixture_bundle(&stmts)).map_err(|e| e.to_string())?;
        let edges = oracle_edges(&stmts);

        let mut expected: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (s, src) in stmts.iter().enumerate() {
            let G::Source { dst, view } = *src else { continue };
            if view == 103 {
                continue; // unlabeled view
            }
            for (k, sink) in stmts.iter().enumerate() {
                let (G::LogSink { arg } | G::PrefSink { arg }) = *sink else { continue };
                if let Some(labels) = brute_force(&edges, N::Reg(dst), N::Reg(arg)) {
                    let mut path = vec![s];
                    path.extend(labels);
                    path.push(k);
                    expected.insert((s, k), path);
                }
            }
        }

        let mut got: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for l in &a.leaks {
            let key = (l.source.stmt.ordinal as usize, l.sink_stmt.ordinal as usize);
            let path: Vec<usize> = l.path.iter().map(|s| s.ordinal as usize).collect();
            ensure!(l.path_len == path.len() - 1, "case {case}: path_len {} for {path:?}", l.path_len);
            ensure!(got.insert(key, path).is_none(), "case {case}: two leaks for pair {key:?}");
        }
        if got != expected {
            let listing: Vec<String> = stmts.iter().enumerate().map(|(i, g)| format!("{i}: {}", render(g))).collect();
            return Err(format!(
                "case {case}: detector {got:?} vs oracle {expected:?}\n{}",
                listing.join("\n")
            ));
        }
        pairs += expected.len();
    }
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!("1000 fixtures, {pairs} source-sink pairs, {t:.2?}"))
}

fn detected(dir: &Path, analyzer: &Analyzer) -> Result<BTreeSet<ExpectedLeak>, String> {
    let a = analyzer.analyze_dir(dir).map_err(|e| e.to_string())?;
    Ok(a.leaks
        .iter()
        .map(|l| ExpectedLeak {
            pi: l.pi,
            party: l.party,
            category: l.sink_spec.category,
            source_id: l.source.view.id_name.clone().unwrap_or_default(),
            sink_signature: l.sink_spec.sig.to_string(),
        })
        .collect())
}

fn c5_oracle_corpus() -> Check {
    let start = Instant::now();
    let analyzer = Analyzer::default();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (mut planted, mut third, mut decoys) = (0, 0, 0);
    for i in 0..200u64 {
        let spec = FixtureSpec {
            seed: 9000 + i,
            n_sources: (i % 13) as usize,
            party_mix: (i % 5) as f64 * 0.25,
            n_decoys: (i % 7) as usize,
            chain_len: ChainLen { min: 1, max: 1 + (i % 6) as usize },
            ..FixtureSpec::default()
        };
        let dir = tmp.path().join(format!("f{i}"));
        let gt = generate(&spec, &dir).map_err(|e| e.to_string())?;
        planted += gt.leaks.len();
        third += gt.leaks.iter().filter(|l| l.party == Party::Third).count();
        decoys += spec.n_decoys;
        let want: BTreeSet<ExpectedLeak> = gt.leaks.into_iter().collect();
        let got = detected(&dir, &analyzer)?;
        let missed: Vec<_> = want.difference(&got).collect();
        let extra: Vec<_> = got.difference(&want).collect();
        ensure!(missed.is_empty() && extra.is_empty(), "seed {}: missed {missed:?}, extra {extra:?}", spec.seed);
    }
    let t = within(Duration::from_secs(30), start)?;
    Ok(format!("200 bundles, {planted} planted flows ({third} third-party), {decoys} decoys, recall 100%, 0 extras, {t:.2?}"))
}

fn c6_party_matrix() -> Check {
    use pileak_core::ir::StmtId;
    let app = "com.gotokeep.yoga.intl";
    let at = |class: &str| StmtId {
        class: class.into(),
        method: "m()".into(),
        ordinal: 0,
    };
    let cases: &[(&[&str], Party)] = &[
        (&["com.gotokeep.yoga.intl.MainActivity"], Party::First),
        (&["com.gotokeep.yoga.intl.profile.GenderActivity"], Party::First),
        (&["com.gotokeep.yoga.Settings"], Party::First),
        (&["com.gotokeep.other.Util"], Party::First),
        (&["com.gotokeep.Root"], Party::First),
        (&["com.gotokeep.a.b.c.Deep"], Party::First),
        (&["io.branch.referral.PrefHelper"], Party::Third),
        (&["io.branch.ref.PrefHelper"], Party::Third),
        (&["com.facebook.appevents.Logger"], Party::Third),
        (&["com.gotokeepx.Util"], Party::Third),
        (&["com.google.firebase.Analytics"], Party::Third),
        (&["Toplevel"], Party::Third),
        (&["android.app.Activity"], Party::First),
        (&["androidx.appcompat.app.AppCompatActivity"], Party::First),
        (&["java.lang.String"], Party::First),
        (&["javax.crypto.Cipher"], Party::First),
        (&["kotlin.collections.CollectionsKt"], Party::First),
        (&["kotlinx.coroutines.Job"], Party::First),
        (&["dalvik.system.DexClassLoader"], Party::First),
        (&["com.gotokeep.yoga.intl.A", "android.util.Log"], Party::First),
        (&["com.gotokeep.yoga.intl.A", "io.branch.referral.PrefHelper", "com.gotokeep.yoga.intl.B"], Party::Third),
        (&["android.app.Activity", "io.branch.referral.PrefHelper"], Party::Third),
        (&["com.gotokeep.yoga.intl.A", "com.facebook.X", "android.app.Activity"], Party::Third),
        (&["androidx.core.Foo", "java.util.List", "com.gotokeep.other.Y"], Party::First),
    ];
    let mut failures = Vec::new();
    for (classes, want) in cases {
        let path: Vec<StmtId> = classes.iter().map(|c| at(c)).collect();
        let got = classify_party(&path, app);
        if got != *want {
            failures.push(format!("{classes:?}: {got:?}"));
        }
    }

    // renaming registers leaves the party unchanged
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let renamed = tmp.path().join("keep_yoga");
    for e in walkdir::WalkDir::new(testdata("keep_yoga")) {
        let e = e.map_err(|e| e.to_string())?;
        let rel = e.path().strip_prefix(testdata("keep_yoga")).unwrap();
        let dst = renamed.join(rel);
        if e.file_type().is_dir() {
            fs::create_dir_all(&dst).map_err(|e| e.to_string())?;
        } else {
            let mut text = fs::read_to_string(e.path()).map_err(|e| e.to_string())?;
            if rel.extension().is_some_and(|x| x == "jtac") {
                for (from, to) in [("$z0", "$genderFlag"), ("r11", "$view"), ("$r6", "$radio"), ("$r1", "$ed")] {
                    text = text.replace(from, to);
                }
            }
            fs::write(&dst, text).map_err(|e| e.to_string())?;
        }
    }
    let analyzer = Analyzer::default();
    let parties = |dir: &Path| -> Result<Vec<Party>, String> {
        Ok(analyzer.analyze_dir(dir).map_err(|e| e.to_string())?.leaks.iter().map(|l| l.party).collect())
    };
    let (orig, ren) = (parties(&testdata("keep_yoga"))?, parties(&renamed)?);
    if orig != ren || orig != [Party::Third] {
        failures.push(format!("register renaming changed parties: {orig:?} vs {ren:?}"));
    }
    ensure!(failures.is_empty(), "{}", failures.join("; "));
    Ok(format!("{} package cases plus a register-renamed bundle", cases.len()))
}

fn record(pi: PiKind, category: SinkCategory, party: Party, n: usize) -> LeakRecord {
    LeakRecord {
        pi,
        category,
        party,
        source_view_id: Some("v".into()),
        source_view_class: "EditText".into(),
        sink_signature: "<a.B: void c(java.lang.String)>".into(),
        path_len: 1,
        path: vec![PathStep {
            stmt: pileak_core::ir::StmtId {
                class: "a.B".into(),
                method: "m()".into(),
                ordinal: n as u32,
            },
            jtac: "return".into(),
        }],
        third_party_alternative: false,
    }
}

fn hand_report(name: &str, groups: &[(PiKind, SinkCategory, Party, usize)]) -> AppReport {
    let mut leaks = Vec::new();
    for &(pi, cat, party, count) in groups {
        for _ in 0..count {
            leaks.push(record(pi, cat, party, leaks.len()));
        }
    }
    AppReport {
        schema_version: SCHEMA_VERSION,
        app_package: format!("com.hand.{name}"),
        analyzed_at: "1970-01-01T00:00:00Z".into(),
        views_total: 0,
        views_labeled: 0,
        views: Vec::new(),
        leaks,
        diagnostics: Diagnostics {
            find_view_by_id: SourceTally::default(),
            unmatched_ids: Vec::new(),
        },
    }
}

fn c7_aggregation() -> Check {
    use PiKind::*;
    use SinkCategory::*;
    // first-party counts {0,1,1,2,320}, third-party {0,0,7,2,2856}
    let reports = [
        hand_report("a", &[]),
        hand_report("b", &[(Email, Net, Party::First, 1)]),
        hand_report("c", &[(Email, Net, Party::First, 1), (Email, Net, Party::Third, 3), (Age, Log, Party::Third, 4)]),
        hand_report("d", &[(Email, Net, Party::First, 2), (Email, Net, Party::Third, 2)]),
        hand_report("e", &[(Email, Net, Party::First, 320), (Phone, FileIO, Party::Third, 2856)]),
    ];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rdir = tmp.path().join("reports");
    fs::create_dir_all(&rdir).map_err(|e| e.to_string())?;
    for r in &reports {
        r.write(&rdir.join(format!("{}.json", r.app_package))).map_err(|e| e.to_string())?;
    }
    let out_dir = tmp.path().join("summary");
    let out = pileak(&["aggregate", "--reports", rdir.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    ensure!(out.status.code() == Some(0), "aggregate exited {:?}", out.status.code());
    let read = |f: &str| fs::read_to_string(out_dir.join(f)).map_err(|e| e.to_string());

    // hand computation: all apps
    //   first {0,1,1,2,320}: median 1, mean 324/5, max 320
    //   third {0,0,2,7,2856}: median 2, mean 2865/5, max 2856
    //   total {0,1,4,8,3176}: median 4, mean 3189/5, max 3176
    // apps with a leak (b..e), lower median of four values
    //   first {1,1,2,320}: 1, 81.00; third {0,2,7,2856}: 2, 716.25; total {1,4,8,3176}: 4, 797.25
    let want_stats = "basis,apps,statistic,first_party,third_party,total
all_apps,5,median,1,2,4
all_apps,5,average,64.80,573.00,637.80
all_apps,5,max,320,2856,3176
apps_with_leaks,4,median,1,2,4
apps_with_leaks,4,average,81.00,716.25,797.25
apps_with_leaks,4,max,320,2856,3176
";
    let got = read("leak_stats.csv")?;
    ensure!(got == want_stats, "leak_stats.csv:\n{got}");

    // paths per destination: Net 324 first + 5 third; Log 4; FileIO 2856
    let dest = read("destinations.csv")?;
    for line in ["Net,324,5,329,", "LocalStore,0,0,0,0.00", "Log,0,4,4,", "FileIO,0,2856,2856,"] {
        ensure!(dest.lines().any(|l| l.starts_with(line)), "destinations.csv lacks `{line}`:\n{dest}");
    }
    // apps per PI and destination, once each
    let pi = read("pi_by_destination.csv")?;
    for line in ["Email,4,0,0,0,4", "Age,0,0,1,0,1", "Phone,0,0,0,1,1", "Weight,0,0,0,0,0"] {
        ensure!(pi.lines().any(|l| l == line), "pi_by_destination.csv lacks `{line}`:\n{pi}");
    }
    ensure!(pi.lines().count() == 18, "pi_by_destination.csv has {} lines", pi.lines().count());
    ensure!(read("prevalence.csv")?.lines().count() == 17, "prevalence.csv row count");
    Ok("median/average/max on both bases, destination paths and per-app PI cells exact".into())
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(dir).unwrap().display().to_string();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}

fn c8_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |s: &str| tmp.path().join(s).to_str().unwrap().to_owned();
    let run = |args: &[&str]| -> Result<(), String> {
        let out = pileak(args);
        if out.status.code() == Some(0) {
            Ok(())
        } else {
            Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))
        }
    };
    run(&["gen-fixtures", "--seed", "4242", "--count", "40", "--out", &p("apps")])?;
    run(&["gen-fixtures", "--seed", "4242", "--count", "40", "--out", &p("apps2")])?;
    ensure!(files(&tmp.path().join("apps")) == files(&tmp.path().join("apps2")), "fixture bytes differ");
    run(&["corpus", "--apps", &p("apps"), "--out", &p("r1"), "-j", "1"])?;
    run(&["corpus", "--apps", &p("apps"), "--out", &p("r2"), "-j", "1"])?;
    run(&["corpus", "--apps", &p("apps"), "--out", &p("r4"), "-j", "4"])?;
    let r1 = files(&tmp.path().join("r1"));
    ensure!(r1.len() == 40, "{} reports", r1.len());
    ensure!(r1 == files(&tmp.path().join("r2")), "reports differ between runs");
    ensure!(r1 == files(&tmp.path().join("r4")), "reports differ between -j1 and -j4");
    run(&["aggregate", "--reports", &p("r1"), "--out", &p("s1")])?;
    run(&["aggregate", "--reports", &p("r4"), "--out", &p("s4")])?;
    let s1 = files(&tmp.path().join("s1"));
    ensure!(s1.len() == 6, "{} summary files", s1.len());
    ensure!(s1 == files(&tmp.path().join("s4")), "summary or CSV bytes differ");
    Ok("40 bundles: reports and CSVs byte-identical across runs and -j1/-j4".into())
}

type Criterion = (&'static str, Box<dyn Fn() -> Check>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("golden trace A (first-party)", Box::new(|| golden("panic_shield", PiKind::MentalHealth, Party::First, "putString"))),
        ("golden trace B (third-party)", Box::new(|| golden("keep_yoga", PiKind::Gender, Party::Third, "putBoolean"))),
        ("classifier conformance", Box::new(c3_classifier)),
        ("shortest-path correctness", Box::new(c4_shortest_paths)),
        ("oracle corpus", Box::new(c5_oracle_corpus)),
        ("party attribution", Box::new(c6_party_matrix)),
        ("aggregation semantics", Box::new(c7_aggregation)),
        ("determinism", Box::new(c8_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
