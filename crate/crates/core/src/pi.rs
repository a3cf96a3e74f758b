//! Personal-information labels for GUI elements.
//!
//! A view's id name, hint and text are tokenized and matched against a
//! keyword lexicon. Signals are consulted in that priority order and the
//! first one with any match decides; within it the longest term wins.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gui::ViewElement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PiCategory {
    Identity,
    Anthropometric,
    Medical,
}

/// The PI kinds, in tiebreak order. FirstName and LastName together are
/// the single "name" item when counting collected PI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PiKind {
    Email,
    FirstName,
    LastName,
    Phone,
    Address,
    Zip,
    Ssn,
    CreditCard,
    Age,
    Height,
    Weight,
    Gender,
    MedicalHistory,
    Medication,
    Blood,
    MentalHealth,
    SmokeAlcohol,
}

impl PiKind {
    pub const ALL: [PiKind; 17] = [
        PiKind::Email,
        PiKind::FirstName,
        PiKind::LastName,
        PiKind::Phone,
        PiKind::Address,
        PiKind::Zip,
        PiKind::Ssn,
        PiKind::CreditCard,
        PiKind::Age,
        PiKind::Height,
        PiKind::Weight,
        PiKind::Gender,
        PiKind::MedicalHistory,
        PiKind::Medication,
        PiKind::Blood,
        PiKind::MentalHealth,
        PiKind::SmokeAlcohol,
    ];

    /// The sixteen collected-PI items, with first and last name merged.
    pub const COLLECTED_ITEMS: [&'static str; 16] = [
        "Email",
        "Name",
        "Phone",
        "Address",
        "Zip",
        "Ssn",
        "CreditCard",
        "Age",
        "Height",
        "Weight",
        "Gender",
        "MedicalHistory",
        "Medication",
        "Blood",
        "MentalHealth",
        "SmokeAlcohol",
    ];

    pub fn category(self) -> PiCategory {
        use PiKind::*;
        match self {
            Email | FirstName | LastName | Phone | Address | Zip | Ssn | CreditCard => PiCategory::Identity,
            Age | Height | Weight | Gender => PiCategory::Anthropometric,
            MedicalHistory | Medication | Blood | MentalHealth | SmokeAlcohol => PiCategory::Medical,
        }
    }

    /// Item name in [`PiKind::COLLECTED_ITEMS`].
    pub fn collected_item(self) -> &'static str {
        match self {
            PiKind::FirstName | PiKind::LastName => "Name",
            other => other.name(),
        }
    }

    pub fn name(self) -> &'static str {
        use PiKind::*;
        match self {
            Email => "Email",
            FirstName => "FirstName",
            LastName => "LastName",
            Phone => "Phone",
            Address => "Address",
            Zip => "Zip",
            Ssn => "Ssn",
            CreditCard => "CreditCard",
            Age => "Age",
            Height => "Height",
            Weight => "Weight",
            Gender => "Gender",
            MedicalHistory => "MedicalHistory",
            Medication => "Medication",
            Blood => "Blood",
            MentalHealth => "MentalHealth",
            SmokeAlcohol => "SmokeAlcohol",
        }
    }

    /// Key used in lexicon files.
    pub fn key(self) -> &'static str {
        use PiKind::*;
        match self {
            Email => "email",
            FirstName => "first_name",
            LastName => "last_name",
            Phone => "phone",
            Address => "address",
            Zip => "zip",
            Ssn => "ssn",
            CreditCard => "credit_card",
            Age => "age",
            Height => "height",
            Weight => "weight",
            Gender => "gender",
            MedicalHistory => "medical_history",
            Medication => "medication",
            Blood => "blood",
            MentalHealth => "mental_health",
            SmokeAlcohol => "smoke_alcohol",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PiKind {
    type Err = String;

    /// Accepts both the lexicon key and the display name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PiKind::ALL
            .into_iter()
            .find(|k| k.key() == s || k.name() == s)
            .ok_or_else(|| format!("unknown PI kind `{s}`"))
    }
}

/// Split an identifier or free text into lowercase word tokens.
///
/// Boundaries are camelCase humps, digits and any non-alphanumeric
/// character; digits themselves are dropped.
pub fn tokenize(s: &str) -> Vec<String> {
    let chars: Vec<char> = s.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphabetic() {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if c.is_uppercase() && !cur.is_empty() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            // fooBar | HTTPServer -> http server
            if prev.is_lowercase() || (prev.is_uppercase() && next_lower) {
                tokens.push(std::mem::take(&mut cur));
            }
        }
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub term: Vec<String>,
    pub kind: PiKind,
    /// Characters in the term as written, single spaces between tokens.
    pub weight: usize,
}

impl LexiconEntry {
    fn new(kind: PiKind, term: Vec<String>) -> Self {
        let weight = term.iter().map(|t| t.chars().count()).sum::<usize>() + term.len().saturating_sub(1);
        LexiconEntry { term, kind, weight }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("lexicon line {line}: duplicate term `{term}` for {kind}")]
    DuplicateTerm { line: usize, kind: PiKind, term: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");

impl Lexicon {
    /// The shipped lexicon.
    pub fn builtin() -> Self {
        Lexicon::parse(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Parse `<kind>\t<term>` lines. Every kind must have at least one term.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = Lexicon { entries: Vec::new() };
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let Some((kind, term)) = content.split_once('\t') else {
                return Err(LexiconError::Syntax {
                    line,
                    message: "expected `<kind><TAB><term>`".into(),
                });
            };
            let kind: PiKind = kind.trim().parse().map_err(|message| LexiconError::Syntax { line, message })?;
            lex.add_term(kind, term).map_err(|e| match e {
                AddError::Invalid(message) => LexiconError::Syntax { line, message },
                AddError::Duplicate(term) => LexiconError::DuplicateTerm { line, kind, term },
            })?;
        }
        if let Some(missing) = PiKind::ALL.into_iter().find(|k| !lex.entries.iter().any(|e| e.kind == *k)) {
            return Err(LexiconError::Syntax {
                line: last_line,
                message: format!("no term for {missing}; every kind needs at least one"),
            });
        }
        Ok(lex)
    }

    /// Add a term, given as space-separated alphabetic words.
    pub fn add_term(&mut self, kind: PiKind, term: &str) -> Result<(), AddError> {
        let words: Vec<String> = term.split_whitespace().map(str::to_lowercase).collect();
        if words.is_empty() {
            return Err(AddError::Invalid("empty term".into()));
        }
        if let Some(bad) = words.iter().find(|w| !w.chars().all(char::is_alphabetic)) {
            return Err(AddError::Invalid(format!("term word `{bad}` is not alphabetic")));
        }
        if self.entries.iter().any(|e| e.kind == kind && e.term == words) {
            return Err(AddError::Duplicate(words.join(" ")));
        }
        self.entries.push(LexiconEntry::new(kind, words));
        Ok(())
    }

    /// Serialize in entry order; parsing the result gives an equal lexicon.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\n", e.kind.key(), e.term.join(" ")))
            .collect()
    }

    /// Best entry among those matching `tokens`, if any.
    fn best_match(&self, tokens: &[String]) -> Option<&LexiconEntry> {
        self.entries
            .iter()
            .filter(|e| tokens.windows(e.term.len()).any(|w| w == e.term.as_slice()))
            .min_by(|a, b| b.weight.cmp(&a.weight).then(a.kind.index().cmp(&b.kind.index())))
    }

    /// Label text signals in priority order; the first signal with any
    /// lexicon match decides.
    pub fn classify_signals<'s>(&self, signals: impl IntoIterator<Item = Option<&'s str>>) -> Option<PiKind> {
        signals
            .into_iter()
            .flatten()
            .find_map(|s| self.best_match(&tokenize(s)).map(|e| e.kind))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AddError {
    #[error("{0}")]
    Invalid(String),
    #[error("duplicate term `{0}`")]
    Duplicate(String),
}

pub fn load_lexicon(text: &str) -> Result<Lexicon, LexiconError> {
    Lexicon::parse(text)
}

/// Id name, then hint, then text.
pub fn classify(view: &ViewElement, lex: &Lexicon) -> Option<PiKind> {
    lex.classify_signals([view.id_name.as_deref(), view.hint.as_deref(), view.text.as_deref()])
}
