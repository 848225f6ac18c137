use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter name to value. Integers and categorical choices are stored as
/// `f64` too.
pub type Assignment = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamKind {
    Linear { low: f64, high: f64 },
    Log { low: f64, high: f64 },
    Integer { low: i64, high: i64 },
    Categorical { choices: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn linear(name: &str, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Linear { low, high },
        }
    }

    pub fn log(name: &str, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Log { low, high },
        }
    }

    pub fn integer(name: &str, low: i64, high: i64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Integer { low, high },
        }
    }

    pub fn categorical(name: &str, choices: &[f64]) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Categorical {
                choices: choices.to_vec(),
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ParamKind::Categorical { .. })
    }

    fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::invalid(format!("search space `{}`", self.name), why));
        match &self.kind {
            ParamKind::Linear { low, high } if !(low.is_finite() && high.is_finite() && low < high) => {
                bad("need finite low < high")
            }
            ParamKind::Log { low, high } if !(*low > 0.0 && high.is_finite() && low < high) => {
                bad("need 0 < low < high")
            }
            ParamKind::Integer { low, high } if low > high => bad("need low <= high"),
            ParamKind::Categorical { choices } if choices.is_empty() => bad("no choices"),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match &self.kind {
            ParamKind::Linear { low, high } | ParamKind::Log { low, high } => (*low..=*high).contains(&v),
            ParamKind::Integer { low, high } => v.fract() == 0.0 && (*low as f64..=*high as f64).contains(&v),
            ParamKind::Categorical { choices } => choices.contains(&v),
        }
    }

    /// Uniform draw (log-uniform for `Log`).
    pub fn sample_uniform(&self, rng: &mut impl Rng) -> f64 {
        match &self.kind {
            ParamKind::Linear { low, high } => rng.random_range(*low..=*high),
            ParamKind::Log { low, high } => rng.random_range(low.ln()..=high.ln()).exp().clamp(*low, *high),
            ParamKind::Integer { low, high } => rng.random_range(*low..=*high) as f64,
            ParamKind::Categorical { choices } => choices[rng.random_range(0..choices.len())],
        }
    }

    /// Maps a non-categorical value into `[0, 1]`.
    pub fn to_unit(&self, v: f64) -> f64 {
        let u = match &self.kind {
            ParamKind::Linear { low, high } => (v - low) / (high - low),
            ParamKind::Log { low, high } => (v.ln() - low.ln()) / (high.ln() - low.ln()),
            ParamKind::Integer { low, high } => (v - *low as f64 + 0.5) / ((high - low + 1) as f64),
            ParamKind::Categorical { .. } => panic!("categorical parameters have no unit encoding"),
        };
        u.clamp(0.0, 1.0)
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.kind {
            ParamKind::Linear { low, high } => (low + u * (high - low)).clamp(*low, *high),
            ParamKind::Log { low, high } => (low.ln() + u * (high.ln() - low.ln())).exp().clamp(*low, *high),
            ParamKind::Integer { low, high } => {
                let span = (high - low + 1) as f64;
                (*low as f64 + (u * span).floor()).min(*high as f64)
            }
            ParamKind::Categorical { .. } => panic!("categorical parameters have no unit encoding"),
        }
    }

    pub fn choice_index(&self, v: f64) -> Option<usize> {
        match &self.kind {
            ParamKind::Categorical { choices } => choices.iter().position(|&c| c == v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParamSpec>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self> {
        let s = Self { params };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::invalid("search space", "no parameters"));
        }
        for (i, p) in self.params.iter().enumerate() {
            p.validate()?;
            if self.params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::invalid("search space", format!("duplicate parameter `{}`", p.name)));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.params.len()
    }

    pub fn contains(&self, a: &Assignment) -> bool {
        a.len() == self.params.len()
            && self
                .params
                .iter()
                .all(|p| a.get(&p.name).is_some_and(|&v| p.contains(v)))
    }

    pub fn sample_uniform(&self, rng: &mut impl Rng) -> Assignment {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.sample_uniform(rng)))
            .collect()
    }
}
