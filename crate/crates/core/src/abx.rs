//! ABX items, batch delta evaluation and ABX scores.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtw::{self, DtwError};
use crate::featio::FeatureArchive;

pub const ITEM_COLUMNS: [&str; 9] = [
    "triplet_id",
    "target_id",
    "other_id",
    "x_id",
    "phone_target",
    "phone_other",
    "language",
    "subset",
    "target_is_A",
];

#[derive(Debug, Error)]
pub enum AbxError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("table has no rows")]
    Empty,
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: {reason}")]
    BadRow { row: u64, reason: String },
    #[error("duplicate triplet id {0:?}")]
    DuplicateId(String),
    #[error("triplet {triplet_id:?}: stimulus {stimulus_id:?} not in feature archive")]
    UnknownStimulus {
        triplet_id: String,
        stimulus_id: String,
    },
    #[error("triplet {triplet_id:?}: {source}")]
    Alignment {
        triplet_id: String,
        #[source]
        source: DtwError,
    },
    #[error("triplet {0:?} has no delta")]
    MissingDelta(String),
    #[error("score tables cover different groups: {0}")]
    KeyMismatch(String),
}

pub type Result<T> = std::result::Result<T, AbxError>;

/// Perceptimatic subset a triplet belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Zerospeech,
    Worldvowels,
    PilotJuly,
    PilotAugust,
    Cogsci2019,
}

impl Subset {
    pub const ALL: [Subset; 5] = [
        Subset::Zerospeech,
        Subset::Worldvowels,
        Subset::PilotJuly,
        Subset::PilotAugust,
        Subset::Cogsci2019,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Zerospeech => "zerospeech",
            Subset::Worldvowels => "worldvowels",
            Subset::PilotJuly => "pilot_july",
            Subset::PilotAugust => "pilot_august",
            Subset::Cogsci2019 => "cogsci2019",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Subset::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown subset {s:?}"))
    }
}

/// An unordered phone pair within one stimulus language. The pair is stored
/// sorted, so `i:a` and `a:i` are the same contrast.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Contrast {
    pub language: String,
    pub first: String,
    pub second: String,
}

impl Contrast {
    pub fn new(language: &str, p: &str, q: &str) -> Self {
        let (first, second) = if p <= q { (p, q) } else { (q, p) };
        Contrast {
            language: language.to_string(),
            first: first.to_string(),
            second: second.to_string(),
        }
    }

    /// `p1:p2` label without the language.
    pub fn pair(&self) -> String {
        format!("{}:{}", self.first, self.second)
    }
}

impl fmt::Display for Contrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}:{}", self.language, self.first, self.second)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletItem {
    pub triplet_id: String,
    pub target_id: String,
    pub other_id: String,
    pub x_id: String,
    pub phone_target: String,
    pub phone_other: String,
    pub stimulus_language: String,
    pub subset: Subset,
    pub target_is_a: bool,
}

impl TripletItem {
    pub fn contrast(&self) -> Contrast {
        Contrast::new(&self.stimulus_language, &self.phone_target, &self.phone_other)
    }
}

pub(crate) fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "t" | "yes" => Some(true),
        "false" | "0" | "f" | "no" => Some(false),
        _ => None,
    }
}

/// Maps required column names to their positions in a header.
pub(crate) fn column_positions(headers: &csv::StringRecord, names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| AbxError::MissingColumn(name.to_string()))
        })
        .collect()
}

pub(crate) fn row_number(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub fn read_items<R: Read>(reader: R) -> Result<Vec<TripletItem>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(AbxError::Empty);
    }
    let cols = column_positions(&headers, &ITEM_COLUMNS)?;
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = row_number(&record);
        let field = |k: usize| record.get(cols[k]).unwrap_or("").to_string();
        let bad = |reason: String| AbxError::BadRow { row, reason };

        let item = TripletItem {
            triplet_id: field(0),
            target_id: field(1),
            other_id: field(2),
            x_id: field(3),
            phone_target: field(4),
            phone_other: field(5),
            stimulus_language: field(6),
            subset: field(7).parse().map_err(bad)?,
            target_is_a: parse_bool(&field(8))
                .ok_or_else(|| bad(format!("target_is_A {:?} is not a boolean", field(8))))?,
        };
        for (k, value) in [&item.triplet_id, &item.target_id, &item.other_id, &item.x_id]
            .into_iter()
            .enumerate()
        {
            if value.is_empty() {
                return Err(bad(format!("empty {}", ITEM_COLUMNS[k])));
            }
        }
        if item.phone_target == item.phone_other {
            return Err(bad(format!("phone_target equals phone_other ({:?})", item.phone_target)));
        }
        if !seen.insert(item.triplet_id.clone()) {
            return Err(AbxError::DuplicateId(item.triplet_id));
        }
        items.push(item);
    }
    if items.is_empty() {
        return Err(AbxError::Empty);
    }
    Ok(items)
}

pub fn load_items(path: impl AsRef<Path>) -> Result<Vec<TripletItem>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| AbxError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_items(file)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRecord {
    pub triplet_id: String,
    pub delta: f64,
}

/// One delta per item, in item order. Items are evaluated in parallel; the
/// output does not depend on the thread count.
pub fn evaluate_deltas(archive: &FeatureArchive, items: &[TripletItem]) -> Result<Vec<DeltaRecord>> {
    let results: Vec<Result<(DeltaRecord, usize)>> = items
        .par_iter()
        .map(|item| {
            let get = |id: &str| {
                archive.get_entry(id).map_err(|_| AbxError::UnknownStimulus {
                    triplet_id: item.triplet_id.clone(),
                    stimulus_id: id.to_string(),
                })
            };
            let (target, other, x) = (get(&item.target_id)?, get(&item.other_id)?, get(&item.x_id)?);
            let aligned = |a, b| {
                dtw::dtw_cost(a, b).map_err(|source| AbxError::Alignment {
                    triplet_id: item.triplet_id.clone(),
                    source,
                })
            };
            let to_other = aligned(other, x)?;
            let to_target = aligned(target, x)?;
            Ok((
                DeltaRecord {
                    triplet_id: item.triplet_id.clone(),
                    delta: to_other.value - to_target.value,
                },
                to_other.degenerate_cells + to_target.degenerate_cells,
            ))
        })
        .collect();

    let mut degenerate = 0;
    let mut records = Vec::with_capacity(items.len());
    for r in results {
        let (record, cells) = r?;
        degenerate += cells;
        records.push(record);
    }
    if degenerate > 0 {
        log::warn!("{degenerate} frame pairs involved a near-zero frame and used distance 1.0");
    }
    Ok(records)
}

pub fn write_deltas<W: Write>(writer: W, records: &[DeltaRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["triplet_id", "delta"])?;
    for r in records {
        w.write_record([r.triplet_id.as_str(), &r.delta.to_string()])?;
    }
    w.flush().map_err(|e| AbxError::Csv(e.into()))
}

pub fn read_deltas<R: Read>(reader: R) -> Result<Vec<DeltaRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = column_positions(&rdr.headers()?.clone(), &["triplet_id", "delta"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = row_number(&record);
        let id = record.get(cols[0]).unwrap_or("").to_string();
        let raw = record.get(cols[1]).unwrap_or("");
        let delta: f64 = raw
            .parse()
            .ok()
            .filter(|d: &f64| d.is_finite())
            .ok_or_else(|| AbxError::BadRow {
                row,
                reason: format!("delta {raw:?} is not a finite number"),
            })?;
        if id.is_empty() {
            return Err(AbxError::BadRow {
                row,
                reason: "empty triplet_id".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(AbxError::DuplicateId(id));
        }
        out.push(DeltaRecord { triplet_id: id, delta });
    }
    if out.is_empty() {
        return Err(AbxError::Empty);
    }
    Ok(out)
}

pub fn load_deltas(path: impl AsRef<Path>) -> Result<Vec<DeltaRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| AbxError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_deltas(file)
}

/// Deltas keyed by triplet id.
pub fn delta_map(records: &[DeltaRecord]) -> HashMap<String, f64> {
    records.iter().map(|r| (r.triplet_id.clone(), r.delta)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Contrast,
    Subset,
    SubsetLanguage,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "contrast" => Ok(GroupBy::Contrast),
            "subset" => Ok(GroupBy::Subset),
            "subset-language" | "subset_language" | "subset×language" => Ok(GroupBy::SubsetLanguage),
            other => Err(format!("unknown grouping {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupKey {
    Contrast(Contrast),
    Subset(Subset),
    SubsetLanguage(Subset, String),
}

impl GroupKey {
    pub fn of(item: &TripletItem, by: GroupBy) -> Self {
        match by {
            GroupBy::Contrast => GroupKey::Contrast(item.contrast()),
            GroupBy::Subset => GroupKey::Subset(item.subset),
            GroupBy::SubsetLanguage => GroupKey::SubsetLanguage(item.subset, item.stimulus_language.clone()),
        }
    }

    pub fn group_by(&self) -> GroupBy {
        match self {
            GroupKey::Contrast(_) => GroupBy::Contrast,
            GroupKey::Subset(_) => GroupBy::Subset,
            GroupKey::SubsetLanguage(..) => GroupBy::SubsetLanguage,
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKey::Contrast(c) => c.fmt(f),
            GroupKey::Subset(s) => s.fmt(f),
            GroupKey::SubsetLanguage(s, l) => write!(f, "{s}/{l}"),
        }
    }
}

/// ABX score of one group of triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastScore {
    pub group: GroupKey,
    pub n_triplets: usize,
    /// Triplets with delta strictly above zero.
    pub n_correct: usize,
    pub abx_accuracy: f64,
    pub mean_delta: f64,
}

/// Fraction of triplets with a strictly positive delta in each group, sorted
/// by group key. A zero delta counts as an error.
pub fn abx_scores(deltas: &[DeltaRecord], items: &[TripletItem], group_by: GroupBy) -> Result<Vec<ContrastScore>> {
    let by_id = delta_map(deltas);
    let mut groups: BTreeMap<GroupKey, Vec<(&str, f64)>> = BTreeMap::new();
    for item in items {
        let d = *by_id
            .get(&item.triplet_id)
            .ok_or_else(|| AbxError::MissingDelta(item.triplet_id.clone()))?;
        groups
            .entry(GroupKey::of(item, group_by))
            .or_default()
            .push((item.triplet_id.as_str(), d));
    }
    Ok(groups
        .into_iter()
        .map(|(group, mut members)| {
            // Fixed summation order keeps the mean independent of item order.
            members.sort_unstable_by(|a, b| a.0.cmp(b.0));
            let n = members.len();
            let correct = members.iter().filter(|(_, d)| *d > 0.0).count();
            let sum: f64 = members.iter().map(|(_, d)| d).sum();
            ContrastScore {
                group,
                n_triplets: n,
                n_correct: correct,
                abx_accuracy: correct as f64 / n as f64,
                mean_delta: sum / n as f64,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDifference {
    pub group: GroupKey,
    pub native: f64,
    pub nonnative: f64,
    pub difference: f64,
}

/// Native minus non-native ABX accuracy for every group. Both tables must
/// cover exactly the same groups.
pub fn native_nonnative_abx_diff(native: &[ContrastScore], nonnative: &[ContrastScore]) -> Result<Vec<ScoreDifference>> {
    let a: BTreeMap<&GroupKey, f64> = native.iter().map(|s| (&s.group, s.abx_accuracy)).collect();
    let b: BTreeMap<&GroupKey, f64> = nonnative.iter().map(|s| (&s.group, s.abx_accuracy)).collect();
    let only_a: Vec<String> = a.keys().filter(|k| !b.contains_key(*k)).map(|k| k.to_string()).collect();
    let only_b: Vec<String> = b.keys().filter(|k| !a.contains_key(*k)).map(|k| k.to_string()).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(AbxError::KeyMismatch(format!(
            "only in native: [{}]; only in non-native: [{}]",
            only_a.join(", "),
            only_b.join(", ")
        )));
    }
    Ok(a.into_iter()
        .map(|(k, native)| {
            let nonnative = b[k];
            ScoreDifference {
                group: k.clone(),
                native,
                nonnative,
                difference: native - nonnative,
            }
        })
        .collect())
}

const SCORE_COLUMNS: [&str; 8] = [
    "group_by",
    "subset",
    "language",
    "contrast",
    "n_triplets",
    "n_correct",
    "abx_accuracy",
    "mean_delta",
];

fn key_fields(key: &GroupKey) -> [String; 4] {
    match key {
        GroupKey::Contrast(c) => ["contrast".into(), String::new(), c.language.clone(), c.pair()],
        GroupKey::Subset(s) => ["subset".into(), s.to_string(), String::new(), String::new()],
        GroupKey::SubsetLanguage(s, l) => ["subset_language".into(), s.to_string(), l.clone(), String::new()],
    }
}

pub fn write_scores<W: Write>(writer: W, scores: &[ContrastScore]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCORE_COLUMNS)?;
    for s in scores {
        let [by, subset, language, contrast] = key_fields(&s.group);
        w.write_record([
            by,
            subset,
            language,
            contrast,
            s.n_triplets.to_string(),
            s.n_correct.to_string(),
            s.abx_accuracy.to_string(),
            s.mean_delta.to_string(),
        ])?;
    }
    w.flush().map_err(|e| AbxError::Csv(e.into()))
}

/// Writes `group_by,subset,language,contrast,native,nonnative,difference`.
pub fn write_score_differences<W: Write>(writer: W, diffs: &[ScoreDifference]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCORE_COLUMNS[..4].iter().chain(&["native", "nonnative", "difference"]))?;
    for d in diffs {
        let [by, subset, language, contrast] = key_fields(&d.group);
        w.write_record([
            by,
            subset,
            language,
            contrast,
            d.native.to_string(),
            d.nonnative.to_string(),
            d.difference.to_string(),
        ])?;
    }
    w.flush().map_err(|e| AbxError::Csv(e.into()))
}

pub fn read_scores<R: Read>(reader: R) -> Result<Vec<ContrastScore>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = column_positions(&rdr.headers()?.clone(), &SCORE_COLUMNS)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = row_number(&record);
        let f = |k: usize| record.get(cols[k]).unwrap_or("");
        let bad = |reason: String| AbxError::BadRow { row, reason };
        let subset = || f(1).parse::<Subset>().map_err(bad);
        let group = match f(0) {
            "contrast" => {
                let (p, q) = f(3)
                    .split_once(':')
                    .ok_or_else(|| bad(format!("contrast {:?} is not p1:p2", f(3))))?;
                GroupKey::Contrast(Contrast::new(f(2), p, q))
            }
            "subset" => GroupKey::Subset(subset()?),
            "subset_language" => GroupKey::SubsetLanguage(subset()?, f(2).to_string()),
            other => return Err(bad(format!("unknown group_by {other:?}"))),
        };
        let num = |k: usize| f(k).parse::<f64>().map_err(|_| bad(format!("bad number {:?}", f(k))));
        let count = |k: usize| f(k).parse::<usize>().map_err(|_| bad(format!("bad count {:?}", f(k))));
        out.push(ContrastScore {
            group,
            n_triplets: count(4)?,
            n_correct: count(5)?,
            abx_accuracy: num(6)?,
            mean_delta: num(7)?,
        });
    }
    Ok(out)
}
