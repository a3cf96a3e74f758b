//! Seeded synthetic bundles with planted flows and their ground truth.
//!
//! Every planted flow lives in its own method with its own registers,
//! fields and helper methods, so flows never share a graph node and the
//! detector must report exactly the planted set. Decoys reuse none of
//! them either.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::parse_method_sig;
use crate::pi::PiKind;
use crate::sourcesink::SinkCategory;
use crate::taint::Party;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLen {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_sources: usize,
    /// Weights keyed by collected-PI item name; missing items weigh 0.
    pub pi_mix: BTreeMap<String, f64>,
    /// Fraction of flows routed through third-party code.
    pub party_mix: f64,
    /// Weights keyed by destination name; missing destinations weigh 0.
    pub destination_mix: BTreeMap<String, f64>,
    pub n_decoys: usize,
    /// Intermediate hops per flow, inclusive.
    pub chain_len: ChainLen,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 0,
            n_sources: 8,
            pi_mix: PiKind::COLLECTED_ITEMS.iter().map(|k| (k.to_string(), 1.0)).collect(),
            party_mix: 0.3,
            destination_mix: SinkCategory::ALL.iter().map(|c| (c.name().to_owned(), 1.0)).collect(),
            n_decoys: 3,
            chain_len: ChainLen { min: 1, max: 4 },
        }
    }
}

fn weights<K>(mix: &BTreeMap<String, f64>, keys: &[K], name: impl Fn(&K) -> &str, what: &str) -> Result<Vec<f64>, FixtureError>
where
    K: Copy,
{
    for (k, w) in mix {
        if !keys.iter().any(|x| name(x).eq_ignore_ascii_case(k)) {
            return Err(FixtureError::InvalidSpec(format!("unknown {what} `{k}`")));
        }
        if !w.is_finite() || *w < 0.0 {
            return Err(FixtureError::InvalidSpec(format!("{what} weight for `{k}` must be a nonnegative number")));
        }
    }
    let out: Vec<f64> = keys
        .iter()
        .map(|x| {
            mix.iter()
                .filter(|(k, _)| name(x).eq_ignore_ascii_case(k))
                .map(|(_, w)| *w)
                .sum()
        })
        .collect();
    if !out.iter().any(|&w| w > 0.0) {
        return Err(FixtureError::InvalidSpec(format!("{what} weights need at least one positive entry")));
    }
    Ok(out)
}

impl FixtureSpec {
    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let spec: FixtureSpec = serde_json::from_str(text).map_err(|e| FixtureError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        self.pi_weights()?;
        self.destination_weights()?;
        if !(0.0..=1.0).contains(&self.party_mix) {
            return Err(FixtureError::InvalidSpec("party_mix must lie in [0, 1]".into()));
        }
        if self.chain_len.min < 1 || self.chain_len.min > self.chain_len.max {
            return Err(FixtureError::InvalidSpec("chain_len needs 1 <= min <= max".into()));
        }
        Ok(())
    }

    fn pi_weights(&self) -> Result<Vec<f64>, FixtureError> {
        weights(&self.pi_mix, &PiKind::COLLECTED_ITEMS, |k| k, "PI item")
    }

    fn destination_weights(&self) -> Result<Vec<f64>, FixtureError> {
        weights(&self.destination_mix, &SinkCategory::ALL, |c| c.name(), "destination")
    }
}

/// One planted flow, as the detector should report it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExpectedLeak {
    pub pi: PiKind,
    pub party: Party,
    pub category: SinkCategory,
    pub source_id: String,
    pub sink_signature: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub app_package: String,
    pub leaks: Vec<ExpectedLeak>,
}

fn party_name(p: Party) -> &'static str {
    match p {
        Party::First => "First",
        Party::Third => "Third",
    }
}

impl GroundTruth {
    /// `pi  party  category  source_id  sink_signature`, tab-separated.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for l in &self.leaks {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                l.pi.name(),
                party_name(l.party),
                l.category.name(),
                l.source_id,
                l.sink_signature
            );
        }
        s
    }

    pub fn parse_tsv(text: &str) -> Result<Vec<ExpectedLeak>, String> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, line)| {
                let f: Vec<&str> = line.split('\t').collect();
                let [pi, party, category, source_id, sink_signature] = f[..] else {
                    return Err(format!("line {}: expected 5 fields", i + 1));
                };
                Ok(ExpectedLeak {
                    pi: pi.parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                    party: match party {
                        "First" => Party::First,
                        "Third" => Party::Third,
                        other => return Err(format!("line {}: bad party `{other}`", i + 1)),
                    },
                    category: category.parse().map_err(|e| format!("line {}: {e}", i + 1))?,
                    source_id: source_id.to_owned(),
                    sink_signature: sink_signature.to_owned(),
                })
            })
            .collect()
    }
}

/// Id stems that the shipped lexicon maps to each kind.
pub fn id_stems(kind: PiKind) -> &'static [&'static str] {
    use PiKind::*;
    match kind {
        Email => &["email", "eMail", "user_email"],
        FirstName => &["first_name", "firstName", "given_name"],
        LastName => &["last_name", "surname", "family_name"],
        Phone => &["phone", "phone_number", "telephone"],
        Address => &["address", "street", "home_address"],
        Zip => &["zip", "postcode", "zipcode"],
        Ssn => &["ssn", "social_security"],
        CreditCard => &["credit_card", "card_number", "cvv"],
        Age => &["age", "birthday", "dob"],
        Height => &["height", "user_height"],
        Weight => &["weight", "body_weight"],
        Gender => &["gender", "sex"],
        MedicalHistory => &["medical_history", "allergy", "surgery"],
        Medication => &["medication", "dosage", "prescription"],
        Blood => &["blood_pressure", "glucose", "cholesterol"],
        MentalHealth => &["anxiety", "stress", "phobia"],
        SmokeAlcohol => &["smoking", "alcohol"],
    }
}

pub const ID_SUFFIXES: [&str; 4] = ["", "Input", "Field", "EditText"];

const INPUT_WIDGETS: [&str; 5] = ["EditText", "EditText", "Spinner", "CheckBox", "RadioButton"];

/// A sink call: setup lines producing the receiver and other operands,
/// then the call with the tainted value at one position. `{x}` is the
/// tainted register and `{n}` a per-flow suffix for fresh registers.
struct SinkTemplate {
    category: SinkCategory,
    signature: &'static str,
    setup: &'static [&'static str],
    call: &'static str,
}

const SINKS: &[SinkTemplate] = &[
    SinkTemplate {
        category: SinkCategory::LocalStore,
        signature: "<android.content.SharedPreferences$Editor: android.content.SharedPreferences$Editor putString(java.lang.String,java.lang.String)>",
        setup: &[
            "$p{n} = virtualinvoke r0.<android.app.Activity: android.content.SharedPreferences getPreferences(int)>(0)",
            "$e{n} = interfaceinvoke $p{n}.<android.content.SharedPreferences: android.content.SharedPreferences$Editor edit()>()",
        ],
        call: "$s{n} = interfaceinvoke $e{n}.{sig}(\"{key}\", {x})",
    },
    SinkTemplate {
        category: SinkCategory::LocalStore,
        signature: "<android.database.sqlite.SQLiteDatabase: void execSQL(java.lang.String)>",
        setup: &["$d{n} = virtualinvoke r0.<android.content.ContextWrapper: android.database.sqlite.SQLiteDatabase openOrCreateDatabase(java.lang.String,int,android.database.sqlite.SQLiteDatabase$CursorFactory)>(\"app.db\", 0, null)"],
        call: "virtualinvoke $d{n}.{sig}({x})",
    },
    SinkTemplate {
        category: SinkCategory::Log,
        signature: "<android.util.Log: int d(java.lang.String,java.lang.String)>",
        setup: &[],
        call: "$s{n} = staticinvoke {sig}(\"{key}\", {x})",
    },
    SinkTemplate {
        category: SinkCategory::Log,
        signature: "<android.util.Log: int i(java.lang.String,java.lang.String)>",
        setup: &[],
        call: "$s{n} = staticinvoke {sig}(\"{key}\", {x})",
    },
    SinkTemplate {
        category: SinkCategory::Net,
        signature: "<okhttp3.RequestBody: okhttp3.RequestBody create(okhttp3.MediaType,java.lang.String)>",
        setup: &[],
        call: "$s{n} = staticinvoke {sig}(null, {x})",
    },
    SinkTemplate {
        category: SinkCategory::Net,
        signature: "<android.telephony.SmsManager: void sendTextMessage(java.lang.String,java.lang.String,java.lang.String,android.app.PendingIntent,android.app.PendingIntent)>",
        setup: &["$m{n} = staticinvoke <android.telephony.SmsManager: android.telephony.SmsManager getDefault()>()"],
        call: "virtualinvoke $m{n}.{sig}(\"5550100\", null, {x}, null, null)",
    },
    SinkTemplate {
        category: SinkCategory::FileIO,
        signature: "<java.io.FileOutputStream: void write(byte[])>",
        setup: &["$f{n} = virtualinvoke r0.<android.content.ContextWrapper: java.io.FileOutputStream openFileOutput(java.lang.String,int)>(\"{key}.txt\", 0)"],
        call: "virtualinvoke $f{n}.{sig}({x})",
    },
    SinkTemplate {
        category: SinkCategory::FileIO,
        signature: "<java.io.RandomAccessFile: void writeUTF(java.lang.String)>",
        setup: &["$f{n} = staticinvoke <com.synth.io.Files: java.io.RandomAccessFile open(java.lang.String)>(\"{key}.bin\")"],
        call: "virtualinvoke $f{n}.{sig}({x})",
    },
];

fn render_sink(t: &SinkTemplate, n: &str, key: &str, x: &str, out: &mut Vec<String>) {
    let fill = |s: &str| {
        s.replace("{n}", n)
            .replace("{key}", key)
            .replace("{sig}", t.signature)
            .replace("{x}", x)
    };
    out.extend(t.setup.iter().map(|s| fill(s)));
    out.push(fill(t.call));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hop {
    Copy,
    Cast,
    Opaque,
    Field,
    Helper,
    ThirdParty,
}

const LOCAL_HOPS: [Hop; 5] = [Hop::Copy, Hop::Cast, Hop::Opaque, Hop::Field, Hop::Helper];

struct View {
    class: &'static str,
    id: String,
}

struct Builder {
    app: String,
    main: String,
    relay: String,
    fields: Vec<String>,
    methods: Vec<String>,
    relay_methods: Vec<String>,
    views: Vec<View>,
}

impl Builder {
    fn view_id(&mut self, rng: &mut ChaCha8Rng, kind: PiKind, tag: &str) -> String {
        let stem = id_stems(kind).choose(rng).expect("stems");
        let suffix = ID_SUFFIXES.choose(rng).expect("suffixes");
        let id = format!("{stem}{suffix}_{tag}");
        let class = INPUT_WIDGETS.choose(rng).expect("widgets");
        self.views.push(View { class, id: id.clone() });
        id
    }

    /// Statements that load the view into `$v`.
    fn find_view(&self, rng: &mut ChaCha8Rng, id: &str, numeric: u32, out: &mut Vec<String>) {
        if rng.gen_bool(0.5) {
            out.push(format!("$i0 = <{}.R$id: int {id}>", self.app));
            out.push(format!(
                "$v = virtualinvoke r0.<{}: android.view.View findViewById(int)>($i0)",
                self.main
            ));
        } else {
            out.push(format!(
                "$v = virtualinvoke r0.<android.app.Activity: android.view.View findViewById(int)>({numeric})"
            ));
        }
    }

    fn method(&mut self, name: &str, body: &[String]) {
        let mut m = format!("method void {name}():\n    r0 = this\n");
        for s in body {
            let _ = writeln!(m, "    {s}");
        }
        m.push_str("    return\n");
        self.methods.push(m);
    }
}

const BASE_ID: u32 = 0x7f08_0000;

/// Write a bundle for `spec` into `out_dir` and return its ground truth.
/// The same spec always yields byte-identical files.
pub fn generate(spec: &FixtureSpec, out_dir: &Path) -> Result<GroundTruth, FixtureError> {
    spec.validate()?;
    let pi_dist = WeightedIndex::new(spec.pi_weights()?).expect("validated");
    let dest_dist = WeightedIndex::new(spec.destination_weights()?).expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let app = format!("com.synth{}.health", spec.seed);
    let mut b = Builder {
        main: format!("{app}.ui.MainActivity"),
        relay: format!("io.fakelib.s{}.Relay", spec.seed),
        app,
        fields: Vec::new(),
        methods: Vec::new(),
        relay_methods: Vec::new(),
        views: Vec::new(),
    };

    let n_third = (spec.party_mix * spec.n_sources as f64).round() as usize;
    let mut third = vec![false; spec.n_sources];
    third[..n_third].iter_mut().for_each(|t| *t = true);
    third.shuffle(&mut rng);

    let mut truth = Vec::new();
    for (i, &is_third) in third.iter().enumerate() {
        let item = PiKind::COLLECTED_ITEMS[pi_dist.sample(&mut rng)];
        let kind = match item {
            "Name" if rng.gen_bool(0.5) => PiKind::FirstName,
            "Name" => PiKind::LastName,
            other => other.parse().expect("collected item names a kind"),
        };
        let category = SinkCategory::ALL[dest_dist.sample(&mut rng)];
        let templates: Vec<&SinkTemplate> = SINKS.iter().filter(|t| t.category == category).collect();
        let sink = *templates.choose(&mut rng).expect("every category has a template");

        let id = b.view_id(&mut rng, kind, &i.to_string());
        let numeric = BASE_ID + b.views.len() as u32 - 1;
        let mut body = Vec::new();
        b.find_view(&mut rng, &id, numeric, &mut body);

        let n_hops = rng.gen_range(spec.chain_len.min..=spec.chain_len.max);
        let mut hops: Vec<Hop> = (0..n_hops).map(|_| *LOCAL_HOPS.choose(&mut rng).expect("hops")).collect();
        if is_third {
            let at = rng.gen_range(0..n_hops);
            hops[at] = Hop::ThirdParty;
        }
        let mut x = "$v".to_owned();
        for (k, hop) in hops.iter().enumerate() {
            let t = format!("$t{k}");
            match hop {
                Hop::Copy => body.push(format!("{t} = {x}")),
                Hop::Cast => body.push(format!("{t} = (java.lang.Object) {x}")),
                Hop::Opaque => body.push(format!("{t} = virtualinvoke {x}.<java.lang.Object: java.lang.String toString()>()")),
                Hop::Field => {
                    let f = format!("f{i}_{k}");
                    b.fields.push(format!("field java.lang.Object {f}"));
                    let sig = format!("<{}: java.lang.Object {f}>", b.main);
                    body.push(format!("r0.{sig} = {x}"));
                    body.push(format!("{t} = r0.{sig}"));
                }
                Hop::Helper => {
                    let name = format!("pass{i}_{k}");
                    b.methods.push(format!(
                        "method static java.lang.Object {name}(java.lang.Object p0):\n    $q = p0\n    return $q\n"
                    ));
                    body.push(format!("{t} = staticinvoke <{}: java.lang.Object {name}(java.lang.Object)>({x})", b.main));
                }
                Hop::ThirdParty => {
                    let name = format!("relay{i}_{k}");
                    b.relay_methods.push(format!(
                        "method static java.lang.Object {name}(java.lang.Object p0):\n    $q = (java.lang.String) p0\n    return $q\n"
                    ));
                    body.push(format!("{t} = staticinvoke <{}: java.lang.Object {name}(java.lang.Object)>({x})", b.relay));
                }
            }
            x = t;
        }
        render_sink(sink, &i.to_string(), &id, &x, &mut body);
        b.method(&format!("flow{i}"), &body);

        truth.push(ExpectedLeak {
            pi: kind,
            party: if is_third { Party::Third } else { Party::First },
            category,
            source_id: id,
            sink_signature: parse_method_sig(sink.signature).expect("template signature").to_string(),
        });
    }

    for j in 0..spec.n_decoys {
        let kind = PiKind::ALL[rng.gen_range(0..PiKind::ALL.len())];
        let id = b.view_id(&mut rng, kind, &format!("d{j}"));
        let numeric = BASE_ID + b.views.len() as u32 - 1;
        let sink = SINKS.choose(&mut rng).expect("templates");
        let mut body = Vec::new();
        match j % 3 {
            // a labeled view no code looks up
            0 => continue,
            // a source next to a sink fed only constants
            1 => {
                b.find_view(&mut rng, &id, numeric, &mut body);
                body.push("$c = \"constant\"".to_owned());
                render_sink(sink, &format!("d{j}"), "decoy", "$c", &mut body);
            }
            // taint parked in a field nobody reads
            _ => {
                b.find_view(&mut rng, &id, numeric, &mut body);
                let f = format!("dead{j}");
                b.fields.push(format!("field java.lang.Object {f}"));
                body.push(format!("r0.<{}: java.lang.Object {f}> = $v", b.main));
                render_sink(sink, &format!("d{j}"), "decoy", "\"constant\"", &mut body);
            }
        }
        b.method(&format!("decoy{j}"), &body);
    }

    truth.sort();
    write_bundle(&b, out_dir)?;
    let gt = GroundTruth {
        app_package: b.app.clone(),
        leaks: truth,
    };
    write(&out_dir.join("ground_truth.tsv"), &gt.to_tsv())?;
    Ok(gt)
}

fn write(path: &Path, text: &str) -> Result<(), FixtureError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| FixtureError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn class_path(dir: &Path, class: &str) -> PathBuf {
    let mut p = dir.join("code");
    for seg in class.split('.') {
        p.push(seg);
    }
    p.set_extension("jtac");
    p
}

fn write_bundle(b: &Builder, dir: &Path) -> Result<(), FixtureError> {
    write(
        &dir.join("manifest.xml"),
        &format!(
            "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<manifest xmlns:android=\"http://schemas.android.com/apk/res/android\" package=\"{}\"/>\n",
            b.app
        ),
    )?;

    let mut rtable = String::new();
    let mut layout = String::from(
        "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<ScrollView xmlns:android=\"http://schemas.android.com/apk/res/android\">\n  <LinearLayout android:orientation=\"vertical\">\n",
    );
    for (k, v) in b.views.iter().enumerate() {
        let _ = writeln!(rtable, "id {} 0x{:08x}", v.id, BASE_ID + k as u32);
        let _ = writeln!(layout, "    <{} android:id=\"@+id/{}\"/>", v.class, v.id);
    }
    let _ = writeln!(rtable, "id submit 0x{:08x}", BASE_ID + b.views.len() as u32);
    layout.push_str("    <Button android:id=\"@+id/submit\" android:text=\"Submit\"/>\n  </LinearLayout>\n</ScrollView>\n");
    write(&dir.join("res").join("rtable.txt"), &rtable)?;
    write(&dir.join("res").join("layout").join("activity_main.xml"), &layout)?;

    let mut main = format!("class {} extends android.app.Activity\n", b.main);
    if !b.fields.is_empty() {
        main.push('\n');
    }
    for f in &b.fields {
        main.push_str(f);
        main.push('\n');
    }
    for m in &b.methods {
        main.push('\n');
        main.push_str(m);
    }
    write(&class_path(dir, &b.main), &main)?;

    if !b.relay_methods.is_empty() {
        let mut relay = format!("class {}\n", b.relay);
        for m in &b.relay_methods {
            relay.push('\n');
            relay.push_str(m);
        }
        write(&class_path(dir, &b.relay), &relay)?;
    }
    Ok(())
}
