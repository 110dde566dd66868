use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tensor factor of a register: a variable name and its local dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(String, usize)", into = "(String, usize)")]
pub struct Factor {
    pub name: String,
    pub dim: usize,
}

impl Factor {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Factor { name: name.into(), dim }
    }
}

impl From<(String, usize)> for Factor {
    fn from((name, dim): (String, usize)) -> Self {
        Factor { name, dim }
    }
}

impl From<Factor> for (String, usize) {
    fn from(f: Factor) -> Self {
        (f.name, f.dim)
    }
}

/// Ordered tensor factors; the first factor is the most significant digit of
/// a basis index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Layout(Vec<Factor>);

impl Layout {
    pub fn new(factors: Vec<Factor>) -> Self {
        Layout(factors)
    }

    /// A single unnamed factor spanning the whole space.
    pub fn anonymous(dim: usize) -> Self {
        Layout(vec![Factor::new("", dim)])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.0.iter().map(|f| f.dim).product()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|f| f.name == name)
    }

    /// Factor positions of `names`, in the order given.
    pub fn positions(&self, names: &[impl AsRef<str>]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.position(n.as_ref())
                    .ok_or_else(|| Error::UnknownVariable(n.as_ref().to_string()))
            })
            .collect()
    }

    pub fn concat(&self, other: &Layout) -> Layout {
        let mut f = self.0.clone();
        f.extend(other.0.iter().cloned());
        Layout(f)
    }

    /// Row-major strides of each factor.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for i in (0..self.0.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.0[i + 1].dim;
        }
        strides
    }

    /// Digits of a basis index, one per factor.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.0.len()];
        for i in (0..self.0.len()).rev() {
            d[i] = index % self.0[i].dim;
            index /= self.0[i].dim;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_and_digits_agree() {
        let l = Layout::new(vec![Factor::new("a", 2), Factor::new("b", 3), Factor::new("c", 2)]);
        assert_eq!(l.dim(), 12);
        assert_eq!(l.strides(), vec![6, 2, 1]);
        for i in 0..12 {
            let d = l.digits(i);
            let back: usize = d.iter().zip(l.strides()).map(|(d, s)| d * s).sum();
            assert_eq!(back, i);
        }
    }

    #[test]
    fn unknown_variable() {
        let l = Layout::new(vec![Factor::new("q", 2)]);
        assert_eq!(l.positions(&["r"]), Err(Error::UnknownVariable("r".into())));
    }

    #[test]
    fn json_form() {
        let l = Layout::new(vec![Factor::new("q", 2), Factor::new("x", 17)]);
        assert_eq!(serde_json::to_string(&l).unwrap(), r#"[["q",2],["x",17]]"#);
    }
}
