//! Pairing model Δ with human accuracy at contrast or stimulus level.
//!
//! Human accuracy mixes response kinds row by row: a row with a gradient
//! answer contributes that value, any other row contributes 1 (correct) or 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HumanResponse, Result, StatsError};
use crate::abx::{Contrast, TripletItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Contrast,
    Stimulus,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Contrast => "contrast",
            Level::Stimulus => "stimulus",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "contrast" => Ok(Level::Contrast),
            "stimulus" => Ok(Level::Stimulus),
            other => Err(format!("unknown level {other:?} (expected contrast or stimulus)")),
        }
    }
}

/// A unit of comparison: a canonical contrast, or one triplet in one
/// presentation order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Unit {
    Contrast(Contrast),
    Stimulus { triplet_id: String, target_is_a: bool },
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unit::Contrast(c) => write!(f, "{c}"),
            Unit::Stimulus { triplet_id, target_is_a } => {
                write!(f, "{triplet_id}/{}", if *target_is_a { "A" } else { "B" })
            }
        }
    }
}

/// Units present on both sides, sorted, with their model and human values.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedVectors {
    pub units: Vec<Unit>,
    pub model: Vec<f64>,
    pub human: Vec<f64>,
    /// Units (for the stimulus level: triplets without any response) seen on
    /// one side only.
    pub dropped: usize,
}

impl PairedVectors {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

/// Mean that does not depend on the order of the input.
pub(crate) fn stable_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn means<K: Ord>(groups: BTreeMap<K, Vec<f64>>) -> BTreeMap<K, f64> {
    groups.into_iter().map(|(k, v)| (k, stable_mean(v))).collect()
}

/// Pairs mean Δ with mean human accuracy per unit.
///
/// At the stimulus level a triplet's Δ serves both presentation orders; a
/// triplet only counts as dropped when neither order has a response.
pub fn aggregate(
    level: Level,
    deltas: &HashMap<String, f64>,
    items: &[TripletItem],
    responses: &[HumanResponse],
) -> Result<PairedVectors> {
    let by_id: HashMap<&str, &TripletItem> = items.iter().map(|i| (i.triplet_id.as_str(), i)).collect();

    let mut human: BTreeMap<Unit, Vec<f64>> = BTreeMap::new();
    for r in responses {
        let item = by_id
            .get(r.triplet_id.as_str())
            .ok_or_else(|| StatsError::UnknownTriplet(r.triplet_id.clone()))?;
        let unit = match level {
            Level::Contrast => Unit::Contrast(item.contrast()),
            Level::Stimulus => Unit::Stimulus {
                triplet_id: r.triplet_id.clone(),
                target_is_a: r.target_is_a,
            },
        };
        human.entry(unit).or_default().push(r.accuracy_value());
    }
    let human = means(human);

    let mut paired = PairedVectors {
        units: Vec::new(),
        model: Vec::new(),
        human: Vec::new(),
        dropped: 0,
    };
    match level {
        Level::Contrast => {
            let mut model: BTreeMap<Unit, Vec<f64>> = BTreeMap::new();
            for item in items {
                if let Some(&d) = deltas.get(&item.triplet_id) {
                    model.entry(Unit::Contrast(item.contrast())).or_default().push(d);
                }
            }
            let model = means(model);
            let all: BTreeSet<&Unit> = model.keys().chain(human.keys()).collect();
            for unit in all {
                match (model.get(unit), human.get(unit)) {
                    (Some(&m), Some(&h)) => {
                        paired.units.push(unit.clone());
                        paired.model.push(m);
                        paired.human.push(h);
                    }
                    _ => paired.dropped += 1,
                }
            }
        }
        Level::Stimulus => {
            for (unit, &h) in &human {
                let Unit::Stimulus { triplet_id, .. } = unit else { unreachable!() };
                match deltas.get(triplet_id) {
                    Some(&m) => {
                        paired.units.push(unit.clone());
                        paired.model.push(m);
                        paired.human.push(h);
                    }
                    None => paired.dropped += 1,
                }
            }
            let answered: BTreeSet<&str> = responses.iter().map(|r| r.triplet_id.as_str()).collect();
            let unanswered: BTreeSet<&str> = items
                .iter()
                .filter(|i| deltas.contains_key(&i.triplet_id) && !answered.contains(i.triplet_id.as_str()))
                .map(|i| i.triplet_id.as_str())
                .collect();
            paired.dropped += unanswered.len();
        }
    }
    if paired.dropped > 0 {
        log::info!("{level}-level aggregation dropped {} one-sided units", paired.dropped);
    }
    Ok(paired)
}
