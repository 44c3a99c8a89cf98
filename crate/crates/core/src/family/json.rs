use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use super::ExponentialFamily;
use crate::error::{Error, Result};

/// On-disk form of a tabulated family:
/// `{"points": [...], "weights": [...], "stats": [[a_1(x_1), ...], ...]}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedDocument {
    points: Vec<PointLabel>,
    weights: Vec<PositiveWeight>,
    stats: Vec<Vec<f64>>,
    #[serde(default)]
    names: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PointLabel {
    Number(serde_json::Number),
    Text(String),
}

impl PointLabel {
    fn into_label(self) -> String {
        match self {
            PointLabel::Number(n) => n.to_string(),
            PointLabel::Text(s) => s,
        }
    }
}

// Rejected during deserialization so the error carries a line and column.
#[derive(Debug, Clone, Copy)]
struct PositiveWeight(f64);

impl<'de> Deserialize<'de> for PositiveWeight {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct WeightVisitor;

        impl Visitor<'_> for WeightVisitor {
            type Value = PositiveWeight;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a strictly positive weight")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<PositiveWeight, E> {
                if v.is_finite() && v > 0.0 {
                    Ok(PositiveWeight(v))
                } else {
                    Err(E::custom(format!("weight {v} must be strictly positive")))
                }
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<PositiveWeight, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<PositiveWeight, E> {
                self.visit_f64(v as f64)
            }
        }

        deserializer.deserialize_any(WeightVisitor)
    }
}

impl TabulatedDocument {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("tabulated family, line {} column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn into_family(self) -> Result<ExponentialFamily> {
        let labels = self.points.into_iter().map(PointLabel::into_label).collect();
        let weights = self.weights.into_iter().map(|w| w.0).collect();
        let family = ExponentialFamily::tabulated(labels, weights, self.stats)?;
        match self.names {
            Some(names) => family.with_statistic_names(names),
            None => Ok(family),
        }
    }
}

impl ExponentialFamily {
    pub fn from_json_str(text: &str) -> Result<Self> {
        TabulatedDocument::from_json_str(text)?.into_family()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        TabulatedDocument::from_json_str(&text)
            .map_err(|e| match e {
                Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
                other => other,
            })?
            .into_family()
    }
}
