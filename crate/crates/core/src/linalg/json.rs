//! JSON form of operators: `{"dim": n, "entries": [[[re, im], ...], ...]}`
//! with an optional `"layout": [["q", 2], ...]`. Plain numbers are accepted
//! as real entries on input.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::layout::Layout;
use super::operator::{Operator, C64};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Complex([f64; 2]),
    Real(f64),
}

#[derive(Serialize, Deserialize)]
struct OperatorJson {
    dim: usize,
    entries: Vec<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layout: Option<Layout>,
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries = self
            .rows()
            .into_iter()
            .map(|r| r.into_iter().map(|z| Entry::Complex([z.re, z.im])).collect())
            .collect();
        let named = self.layout().factors().iter().any(|f| !f.name.is_empty());
        OperatorJson { dim: self.dim(), entries, layout: named.then(|| self.layout().clone()) }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = OperatorJson::deserialize(d)?;
        if raw.entries.len() != raw.dim {
            return Err(D::Error::custom(format!(
                "expected {} rows, found {}",
                raw.dim,
                raw.entries.len()
            )));
        }
        let rows: Vec<Vec<C64>> = raw
            .entries
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|e| match e {
                        Entry::Complex([re, im]) => C64::new(re, im),
                        Entry::Real(re) => C64::new(re, 0.0),
                    })
                    .collect()
            })
            .collect();
        let op = Operator::from_rows(&rows).map_err(D::Error::custom)?;
        match raw.layout {
            Some(l) => op.with_layout(l).map_err(D::Error::custom),
            None => Ok(op),
        }
    }
}
