//! Per-app reports and corpus statistics.
//!
//! Reports are JSON documents with a fixed field order and sorted lists, so
//! the same analysis always serializes to the same bytes. Corpus
//! statistics round every fractional value at computation time; the CSV
//! exports then print exactly the stored value.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Analysis;
use crate::gui::UnmatchedId;
use crate::ir::{AppBundle, StmtId};
use crate::pi::PiKind;
use crate::sourcesink::{SinkCategory, SourceTally};
use crate::taint::{Leak, Party};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("unsupported report schema version {0}")]
    SchemaVersion(u32),
    #[error("no reports to aggregate")]
    EmptyCorpus,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppReport {
    pub schema_version: u32,
    pub app_package: String,
    pub analyzed_at: String,
    pub views_total: usize,
    pub views_labeled: usize,
    pub views: Vec<ViewRecord>,
    pub leaks: Vec<LeakRecord>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub view_class: String,
    pub id_name: Option<String>,
    pub numeric_id: Option<u32>,
    pub layout_file: String,
    pub pi: Option<PiKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub stmt: StmtId,
    /// Canonical JTAC text of the statement.
    pub jtac: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakRecord {
    pub pi: PiKind,
    pub category: SinkCategory,
    pub party: Party,
    pub source_view_id: Option<String>,
    pub source_view_class: String,
    pub sink_signature: String,
    pub path_len: usize,
    pub path: Vec<PathStep>,
    pub third_party_alternative: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub find_view_by_id: SourceTally,
    pub unmatched_ids: Vec<UnmatchedId>,
}

fn leak_record(bundle: &AppBundle, leak: &Leak) -> LeakRecord {
    LeakRecord {
        pi: leak.pi,
        category: leak.sink_spec.category,
        party: leak.party,
        source_view_id: leak.source.view.id_name.clone(),
        source_view_class: leak.source.view.view_class.clone(),
        sink_signature: leak.sink_spec.sig.to_string(),
        path_len: leak.path_len,
        path: leak
            .path
            .iter()
            .map(|id| PathStep {
                stmt: id.clone(),
                jtac: bundle.statement(id).map(|s| s.to_string()).unwrap_or_default(),
            })
            .collect(),
        third_party_alternative: leak.third_party_alternative,
    }
}

/// Build the report document for one analyzed app.
pub fn emit_report(analysis: &Analysis, analyzed_at: &str) -> AppReport {
    let views: Vec<ViewRecord> = analysis
        .views
        .iter()
        .map(|v| ViewRecord {
            view_class: v.view_class.clone(),
            id_name: v.id_name.clone(),
            numeric_id: v.numeric_id,
            layout_file: v.layout_file.to_string_lossy().replace('\\', "/"),
            pi: v.pi,
        })
        .collect();
    AppReport {
        schema_version: SCHEMA_VERSION,
        app_package: analysis.bundle.app_package.clone(),
        analyzed_at: analyzed_at.to_owned(),
        views_total: views.len(),
        views_labeled: views.iter().filter(|v| v.pi.is_some()).count(),
        views,
        leaks: analysis.leaks.iter().map(|l| leak_record(&analysis.bundle, l)).collect(),
        diagnostics: Diagnostics {
            find_view_by_id: analysis.sources.tally,
            unmatched_ids: analysis.unmatched_ids.clone(),
        },
    }
}

impl AppReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self, ReportError> {
        let r: AppReport = serde_json::from_str(text).map_err(|source| ReportError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(ReportError::SchemaVersion(r.schema_version));
        }
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        fs::write(path, self.to_json()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        AppReport::from_json(&text, path)
    }
}

/// Every `*.json` report in a directory, sorted by file name.
pub fn read_reports(dir: &Path) -> Result<Vec<AppReport>, ReportError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    paths.iter().map(|p| AppReport::read(p)).collect()
}

fn round_to(x: f64, places: i32) -> f64 {
    let k = 10f64.powi(places);
    (x * k).round() / k
}

fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        round_to(part as f64 * 100.0 / whole as f64, 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    /// Lower median.
    pub median: u64,
    /// Rounded to 2 decimals.
    pub average: f64,
    pub max: u64,
}

impl Stat {
    /// `None` for an empty sample.
    pub fn of(values: &[u64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_unstable();
        let sum: u64 = v.iter().sum();
        Some(Stat {
            median: v[(v.len() - 1) / 2],
            average: round_to(sum as f64 / v.len() as f64, 2),
            max: v[v.len() - 1],
        })
    }
}

/// Per-app leak counts summarized over one basis of apps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakStats {
    pub apps: usize,
    pub first_party: Stat,
    pub third_party: Stat,
    pub total: Stat,
}

impl LeakStats {
    fn of(counts: &[(u64, u64)]) -> Option<LeakStats> {
        let first: Vec<u64> = counts.iter().map(|c| c.0).collect();
        let third: Vec<u64> = counts.iter().map(|c| c.1).collect();
        let total: Vec<u64> = counts.iter().map(|c| c.0 + c.1).collect();
        Some(LeakStats {
            apps: counts.len(),
            first_party: Stat::of(&first)?,
            third_party: Stat::of(&third)?,
            total: Stat::of(&total)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationRow {
    pub destination: SinkCategory,
    pub first_party: u64,
    pub third_party: u64,
    pub total: u64,
    /// Share of all leaks, in percent.
    pub percent: f64,
}

/// Apps leaking a PI kind to each destination; an app counts once per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiDestinationRow {
    pub pi: PiKind,
    pub net: u64,
    pub local_store: u64,
    pub log: u64,
    pub file_io: u64,
    /// Apps leaking this PI to any destination.
    pub total: u64,
}

impl PiDestinationRow {
    pub fn cell(&self, c: SinkCategory) -> u64 {
        match c {
            SinkCategory::Net => self.net,
            SinkCategory::LocalStore => self.local_store,
            SinkCategory::Log => self.log,
            SinkCategory::FileIO => self.file_io,
        }
    }

    fn cell_mut(&mut self, c: SinkCategory) -> &mut u64 {
        match c {
            SinkCategory::Net => &mut self.net,
            SinkCategory::LocalStore => &mut self.local_store,
            SinkCategory::Log => &mut self.log,
            SinkCategory::FileIO => &mut self.file_io,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub item: String,
    pub apps: u64,
    /// Rounded to 4 decimals.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewTypeRow {
    pub view_class: String,
    pub views: u64,
    /// Share of all labeled views, in percent.
    pub percent: f64,
    /// Most frequent PI kinds for this view type, at most three.
    pub top_pi: Vec<(PiKind, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub apps: usize,
    pub total_leaks: u64,
    pub all_apps: LeakStats,
    /// Absent when no app leaks.
    pub apps_with_leaks: Option<LeakStats>,
    pub destinations: Vec<DestinationRow>,
    pub pi_by_destination: Vec<PiDestinationRow>,
    pub prevalence: Vec<PrevalenceRow>,
    pub view_types: Vec<ViewTypeRow>,
}

/// Fold reports into corpus statistics. Independent of report order.
pub fn aggregate(reports: &[AppReport]) -> Result<CorpusSummary, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::EmptyCorpus);
    }
    let counts: Vec<(u64, u64)> = reports
        .iter()
        .map(|r| {
            let third = r.leaks.iter().filter(|l| l.party == Party::Third).count() as u64;
            (r.leaks.len() as u64 - third, third)
        })
        .collect();
    let leaking: Vec<(u64, u64)> = counts.iter().copied().filter(|c| c.0 + c.1 > 0).collect();
    let total_leaks: u64 = counts.iter().map(|c| c.0 + c.1).sum();

    let destinations = SinkCategory::ALL
        .iter()
        .map(|&d| {
            let of = |p: Party| {
                reports
                    .iter()
                    .flat_map(|r| &r.leaks)
                    .filter(|l| l.category == d && l.party == p)
                    .count() as u64
            };
            let (first_party, third_party) = (of(Party::First), of(Party::Third));
            DestinationRow {
                destination: d,
                first_party,
                third_party,
                total: first_party + third_party,
                percent: percent(first_party + third_party, total_leaks),
            }
        })
        .collect();

    let mut pi_by_destination: Vec<PiDestinationRow> = PiKind::ALL
        .iter()
        .map(|&pi| PiDestinationRow {
            pi,
            net: 0,
            local_store: 0,
            log: 0,
            file_io: 0,
            total: 0,
        })
        .collect();
    let mut prevalence: BTreeMap<&str, u64> = BTreeMap::new();
    for r in reports {
        let pairs: BTreeSet<(PiKind, SinkCategory)> = r.leaks.iter().map(|l| (l.pi, l.category)).collect();
        for &(pi, d) in &pairs {
            *pi_by_destination[pi as usize].cell_mut(d) += 1;
        }
        for pi in pairs.iter().map(|p| p.0).collect::<BTreeSet<_>>() {
            pi_by_destination[pi as usize].total += 1;
        }
        let items: BTreeSet<&str> = r.views.iter().filter_map(|v| v.pi).map(PiKind::collected_item).collect();
        for item in items {
            *prevalence.entry(item).or_default() += 1;
        }
    }
    let n = reports.len() as u64;
    let prevalence = PiKind::COLLECTED_ITEMS
        .iter()
        .map(|&item| {
            let apps = prevalence.get(item).copied().unwrap_or(0);
            PrevalenceRow {
                item: item.to_owned(),
                apps,
                fraction: round_to(apps as f64 / n as f64, 4),
            }
        })
        .collect();

    let mut by_type: BTreeMap<&str, BTreeMap<PiKind, u64>> = BTreeMap::new();
    for v in reports.iter().flat_map(|r| &r.views) {
        if let Some(pi) = v.pi {
            *by_type.entry(&v.view_class).or_default().entry(pi).or_default() += 1;
        }
    }
    let labeled: u64 = by_type.values().flat_map(|m| m.values()).sum();
    let mut view_types: Vec<ViewTypeRow> = by_type
        .into_iter()
        .map(|(class, kinds)| {
            let views = kinds.values().sum();
            let mut top: Vec<(PiKind, u64)> = kinds.into_iter().collect();
            top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            top.truncate(3);
            ViewTypeRow {
                view_class: class.to_owned(),
                views,
                percent: percent(views, labeled),
                top_pi: top,
            }
        })
        .collect();
    view_types.sort_by(|a, b| b.views.cmp(&a.views).then_with(|| a.view_class.cmp(&b.view_class)));

    Ok(CorpusSummary {
        apps: reports.len(),
        total_leaks,
        all_apps: LeakStats::of(&counts).expect("nonempty corpus"),
        apps_with_leaks: LeakStats::of(&leaking),
        destinations,
        pi_by_destination,
        prevalence,
        view_types,
    })
}

impl CorpusSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub const CSV_FILES: [&str; 5] = [
    "leak_stats.csv",
    "destinations.csv",
    "pi_by_destination.csv",
    "prevalence.csv",
    "view_types.csv",
];

const BASES: [&str; 2] = ["all_apps", "apps_with_leaks"];
const STATISTICS: [&str; 3] = ["median", "average", "max"];

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), ReportError> {
    let csv_err = |e: csv::Error| ReportError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn stat_cell(s: Option<&Stat>, statistic: &str) -> String {
    match (s, statistic) {
        (None, _) => String::new(),
        (Some(s), "median") => s.median.to_string(),
        (Some(s), "average") => format!("{:.2}", s.average),
        (Some(s), _) => s.max.to_string(),
    }
}

/// Write the five CSV tables into `dir`.
///
/// Headers:
/// - `leak_stats.csv`: basis,apps,statistic,first_party,third_party,total
/// - `destinations.csv`: destination,first_party,third_party,total,percent
/// - `pi_by_destination.csv`: pi,net,local_store,log,file_io,total
/// - `prevalence.csv`: item,apps,fraction
/// - `view_types.csv`: view_class,views,percent,top1_pi,top1_views,top2_pi,top2_views,top3_pi,top3_views
pub fn export_csv(summary: &CorpusSummary, dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut rows = Vec::new();
    for basis in BASES {
        let stats = if basis == "all_apps" { Some(&summary.all_apps) } else { summary.apps_with_leaks.as_ref() };
        for statistic in STATISTICS {
            rows.push(vec![
                basis.to_owned(),
                stats.map_or(0, |s| s.apps).to_string(),
                statistic.to_owned(),
                stat_cell(stats.map(|s| &s.first_party), statistic),
                stat_cell(stats.map(|s| &s.third_party), statistic),
                stat_cell(stats.map(|s| &s.total), statistic),
            ]);
        }
    }
    write_csv(
        &dir.join(CSV_FILES[0]),
        &["basis", "apps", "statistic", "first_party", "third_party", "total"],
        rows,
    )?;

    let rows = summary
        .destinations
        .iter()
        .map(|d| {
            vec![
                d.destination.name().to_owned(),
                d.first_party.to_string(),
                d.third_party.to_string(),
                d.total.to_string(),
                format!("{:.2}", d.percent),
            ]
        })
        .collect();
    write_csv(
        &dir.join(CSV_FILES[1]),
        &["destination", "first_party", "third_party", "total", "percent"],
        rows,
    )?;

    let rows = summary
        .pi_by_destination
        .iter()
        .map(|r| {
            vec![
                r.pi.name().to_owned(),
                r.net.to_string(),
                r.local_store.to_string(),
                r.log.to_string(),
                r.file_io.to_string(),
                r.total.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join(CSV_FILES[2]),
        &["pi", "net", "local_store", "log", "file_io", "total"],
        rows,
    )?;

    let rows = summary
        .prevalence
        .iter()
        .map(|p| vec![p.item.clone(), p.apps.to_string(), format!("{:.4}", p.fraction)])
        .collect();
    write_csv(&dir.join(CSV_FILES[3]), &["item", "apps", "fraction"], rows)?;

    let rows = summary
        .view_types
        .iter()
        .map(|v| {
            let mut row = vec![v.view_class.clone(), v.views.to_string(), format!("{:.2}", v.percent)];
            for i in 0..3 {
                match v.top_pi.get(i) {
                    Some((pi, n)) => row.extend([pi.name().to_owned(), n.to_string()]),
                    None => row.extend([String::new(), String::new()]),
                }
            }
            row
        })
        .collect();
    write_csv(
        &dir.join(CSV_FILES[4]),
        &[
            "view_class",
            "views",
            "percent",
            "top1_pi",
            "top1_views",
            "top2_pi",
            "top2_views",
            "top3_pi",
            "top3_views",
        ],
        rows,
    )
}

struct CsvTable {
    path: PathBuf,
    rows: Vec<csv::StringRecord>,
}

impl CsvTable {
    fn read(path: PathBuf) -> Result<Self, ReportError> {
        let mut r = csv::Reader::from_path(&path).map_err(|e| ReportError::Csv {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(|e| ReportError::Csv {
            path: path.clone(),
            message: e.to_string(),
        })?;
        Ok(CsvTable { path, rows })
    }

    fn err(&self, message: impl Into<String>) -> ReportError {
        ReportError::Csv {
            path: self.path.clone(),
            message: message.into(),
        }
    }

    fn field<T: std::str::FromStr>(&self, row: &csv::StringRecord, i: usize) -> Result<T, ReportError> {
        let raw = row.get(i).ok_or_else(|| self.err(format!("missing column {i}")))?;
        raw.parse().map_err(|_| self.err(format!("bad value `{raw}` in column {i}")))
    }
}

/// Rebuild a summary from the CSV tables written by [`export_csv`].
pub fn import_csv(dir: &Path) -> Result<CorpusSummary, ReportError> {
    let t = CsvTable::read(dir.join(CSV_FILES[0]))?;
    if t.rows.len() != BASES.len() * STATISTICS.len() {
        return Err(t.err("expected six rows"));
    }
    let mut bases: Vec<Option<LeakStats>> = Vec::new();
    for chunk in t.rows.chunks(STATISTICS.len()) {
        if chunk[0].get(3) == Some("") {
            bases.push(None);
            continue;
        }
        let stat = |col: usize| -> Result<Stat, ReportError> {
            Ok(Stat {
                median: t.field(&chunk[0], col)?,
                average: t.field(&chunk[1], col)?,
                max: t.field(&chunk[2], col)?,
            })
        };
        bases.push(Some(LeakStats {
            apps: t.field(&chunk[0], 1)?,
            first_party: stat(3)?,
            third_party: stat(4)?,
            total: stat(5)?,
        }));
    }
    let all_apps = bases[0].ok_or_else(|| t.err("all_apps statistics are empty"))?;

    let t = CsvTable::read(dir.join(CSV_FILES[1]))?;
    let destinations = t
        .rows
        .iter()
        .map(|r| {
            Ok(DestinationRow {
                destination: t.field(r, 0)?,
                first_party: t.field(r, 1)?,
                third_party: t.field(r, 2)?,
                total: t.field(r, 3)?,
                percent: t.field(r, 4)?,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;

    let t = CsvTable::read(dir.join(CSV_FILES[2]))?;
    let pi_by_destination = t
        .rows
        .iter()
        .map(|r| {
            Ok(PiDestinationRow {
                pi: t.field(r, 0)?,
                net: t.field(r, 1)?,
                local_store: t.field(r, 2)?,
                log: t.field(r, 3)?,
                file_io: t.field(r, 4)?,
                total: t.field(r, 5)?,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;

    let t = CsvTable::read(dir.join(CSV_FILES[3]))?;
    let prevalence = t
        .rows
        .iter()
        .map(|r| {
            Ok(PrevalenceRow {
                item: t.field(r, 0)?,
                apps: t.field(r, 1)?,
                fraction: t.field(r, 2)?,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;

    let t = CsvTable::read(dir.join(CSV_FILES[4]))?;
    let view_types = t
        .rows
        .iter()
        .map(|r| {
            let mut top_pi = Vec::new();
            for i in 0..3 {
                if r.get(3 + 2 * i).is_some_and(|s| !s.is_empty()) {
                    top_pi.push((t.field(r, 3 + 2 * i)?, t.field(r, 4 + 2 * i)?));
                }
            }
            Ok(ViewTypeRow {
                view_class: t.field(r, 0)?,
                views: t.field(r, 1)?,
                percent: t.field(r, 2)?,
                top_pi,
            })
        })
        .collect::<Result<Vec<_>, ReportError>>()?;

    Ok(CorpusSummary {
        apps: all_apps.apps,
        total_leaks: destinations.iter().map(|d| d.total).sum(),
        all_apps,
        apps_with_leaks: bases[1],
        destinations,
        pi_by_destination,
        prevalence,
        view_types,
    })
}
