//! Native-language effect: does the French-minus-English difference between
//! two models track the French-minus-English difference between listener
//! groups?

use std::collections::{BTreeMap, HashMap};

use super::aggregate::{aggregate, Level, Unit};
use super::rank::pearson;
use super::{mean_sd, HumanResponse, Result, StatsError};
use crate::abx::TripletItem;

#[derive(Debug, Clone, PartialEq)]
pub struct NativeEffect {
    pub r: f64,
    pub units: Vec<Unit>,
    /// French-model minus English-model mean normalized Δ.
    pub model_effect: Vec<f64>,
    /// French-group minus English-group mean accuracy.
    pub human_effect: Vec<f64>,
}

/// Divides every Δ by the population sd of all of the model's Δ values.
pub fn normalize_by_sd(deltas: &HashMap<String, f64>) -> Result<HashMap<String, f64>> {
    let mut values: Vec<f64> = deltas.values().copied().collect();
    if values.len() < 2 {
        return Err(StatsError::TooShort { got: values.len(), min: 2 });
    }
    values.sort_by(f64::total_cmp);
    let (_, sd) = mean_sd(&values);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(StatsError::DegenerateConstant("model delta".into()));
    }
    Ok(deltas.iter().map(|(k, v)| (k.clone(), v / sd)).collect())
}

fn paired_map(
    level: Level,
    deltas: &HashMap<String, f64>,
    items: &[TripletItem],
    responses: &[HumanResponse],
) -> Result<BTreeMap<Unit, (f64, f64)>> {
    let pv = aggregate(level, deltas, items, responses)?;
    Ok(pv.units.into_iter().zip(pv.model.into_iter().zip(pv.human)).collect())
}

/// Pearson r between model and human native-language effects over units
/// present for both models and both listener groups.
pub fn native_effect(
    level: Level,
    items: &[TripletItem],
    deltas_fr_model: &HashMap<String, f64>,
    deltas_en_model: &HashMap<String, f64>,
    responses_fr_group: &[HumanResponse],
    responses_en_group: &[HumanResponse],
) -> Result<NativeEffect> {
    let fr = paired_map(level, &normalize_by_sd(deltas_fr_model)?, items, responses_fr_group)?;
    let en = paired_map(level, &normalize_by_sd(deltas_en_model)?, items, responses_en_group)?;

    let mut effect = NativeEffect {
        r: f64::NAN,
        units: Vec::new(),
        model_effect: Vec::new(),
        human_effect: Vec::new(),
    };
    for (unit, &(model_fr, human_fr)) in &fr {
        if let Some(&(model_en, human_en)) = en.get(unit) {
            effect.units.push(unit.clone());
            effect.model_effect.push(model_fr - model_en);
            effect.human_effect.push(human_fr - human_en);
        }
    }
    if effect.units.len() < 3 {
        return Err(StatsError::TooFewUnits(effect.units.len()));
    }
    effect.r = pearson(&effect.model_effect, &effect.human_effect)?;
    Ok(effect)
}
