use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::RuleId;
use crate::address::{parse_a1, CellAddress};
use crate::number::{parse_exact, Rational};
use crate::workbook::Workbook;

/// Weights tried by the zero-display rule: `from`, `from + step`, ... up to
/// and including `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleWeights {
    pub from: String,
    pub to: String,
    pub step: String,
}

impl Default for SampleWeights {
    fn default() -> Self {
        SampleWeights { from: "1".into(), to: "100".into(), step: "1".into() }
    }
}

impl SampleWeights {
    pub fn values(&self) -> Result<Vec<Rational>, String> {
        let parse = |field: &str, text: &str| {
            parse_exact(text).ok_or_else(|| format!("sample_weights.{field}: {text:?} is not a number"))
        };
        let (from, to, step) = (parse("from", &self.from)?, parse("to", &self.to)?, parse("step", &self.step)?);
        if step <= Rational::from_integer(0.into()) {
            return Err("sample_weights.step must be positive".into());
        }
        let mut out = Vec::new();
        let mut w = from;
        while w <= to {
            if out.len() == 100_000 {
                return Err("sample_weights describes more than 100000 weights".into());
            }
            out.push(w.clone());
            w += &step;
        }
        Ok(out)
    }
}

/// Detector settings. Every field has a default, so `{}` is a valid
/// configuration file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    /// Enabled rules. `R7` in a configuration file enables both unit rules.
    #[serde(serialize_with = "ser_rules", deserialize_with = "de_rules")]
    pub rules: BTreeSet<RuleId>,
    /// Constants that do not count as embedded, written as decimals.
    pub literal_whitelist: Vec<String>,
    pub if_depth_threshold: usize,
    pub connective_threshold: usize,
    pub unit_lexicon: Vec<String>,
    pub sample_weights: SampleWeights,
    /// Terminal formulas that are deliberate outputs, as `A1` (any sheet) or
    /// `Sheet!A1`.
    pub suppress: Vec<String>,
    /// Fixed row holding column headers for the unit rules. When unset the
    /// nearest text cell above each formula is used.
    pub header_row: Option<u32>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            rules: RuleId::ALL.into_iter().collect(),
            literal_whitelist: vec!["0".into(), "1".into()],
            if_depth_threshold: 2,
            connective_threshold: 2,
            unit_lexicon: ["mg", "mcg", "µg", "g", "kg", "mL", "L"].map(String::from).to_vec(),
            sample_weights: SampleWeights::default(),
            suppress: Vec::new(),
            header_row: None,
        }
    }
}

fn ser_rules<S: serde::Serializer>(rules: &BTreeSet<RuleId>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(rules.iter().map(|r| r.as_str()))
}

fn de_rules<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeSet<RuleId>, D::Error> {
    let names = Vec::<String>::deserialize(d)?;
    let mut out = BTreeSet::new();
    for n in names {
        out.extend(RuleId::parse_selector(&n).map_err(serde::de::Error::custom)?);
    }
    Ok(out)
}

impl RuleConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: RuleConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Checks the invariants the detectors rely on.
    pub fn check(&self) -> Result<(), String> {
        if self.if_depth_threshold == 0 || self.connective_threshold == 0 {
            return Err("thresholds must be at least 1".into());
        }
        if self.unit_lexicon.iter().all(|u| u.trim().is_empty()) {
            return Err("unit_lexicon must not be empty".into());
        }
        self.whitelist()?;
        self.sample_weights.values()?;
        for s in &self.suppress {
            parse_suppression(s)?;
        }
        if self.header_row == Some(0) {
            return Err("header_row is 1-based".into());
        }
        Ok(())
    }

    pub fn enabled(&self, rule: RuleId) -> bool {
        self.rules.contains(&rule)
    }

    pub fn whitelist(&self) -> Result<Vec<Rational>, String> {
        self.literal_whitelist
            .iter()
            .map(|t| parse_exact(t).ok_or_else(|| format!("literal_whitelist: {t:?} is not a number")))
            .collect()
    }

    pub fn is_suppressed(&self, wb: &Workbook, cell: &CellAddress) -> bool {
        self.suppress.iter().filter_map(|s| parse_suppression(s).ok()).any(|(sheet, coord)| {
            coord == cell.coord() && sheet.map_or(true, |s| wb.canonical_sheet_name(&s) == Some(cell.sheet.as_str()))
        })
    }
}

fn parse_suppression(text: &str) -> Result<(Option<String>, crate::address::Coord), String> {
    let text = text.trim();
    let (sheet, a1) = match text.rsplit_once('!') {
        Some((s, a)) => (Some(s.trim_matches('\'').replace("''", "'")), a),
        None => (None, text),
    };
    let coord = parse_a1(&a1.replace('$', "")).map_err(|_| format!("suppress: {text:?} is not a cell address"))?;
    Ok((sheet, coord))
}
