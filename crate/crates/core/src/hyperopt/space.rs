use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rng::SeedStream;
use crate::{Error, Result};

/// One hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Real(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            ParamValue::Int(i) => Some(i),
            ParamValue::Real(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Some(x as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Bool(b) => Some(*b),
            ParamValue::Text(s) if s.eq_ignore_ascii_case("true") => Some(true),
            ParamValue::Text(s) if s.eq_ignore_ascii_case("false") => Some(false),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<bool> for ParamValue {
    fn from(b: bool) -> Self {
        ParamValue::Bool(b)
    }
}

impl From<i64> for ParamValue {
    fn from(i: i64) -> Self {
        ParamValue::Int(i)
    }
}

impl From<f64> for ParamValue {
    fn from(x: f64) -> Self {
        ParamValue::Real(x)
    }
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Text(s.to_string())
    }
}

/// Name to value, ordered by name.
pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDomain {
    /// Integers in `lo..=hi`.
    Discrete { lo: i64, hi: i64 },
    Continuous { lo: f64, hi: f64 },
    /// Reals in `[lo, hi]`, sampled uniformly in log space.
    LogContinuous { lo: f64, hi: f64 },
    Categorical { values: Vec<ParamValue> },
}

impl ParamDomain {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ParamDomain::Discrete { lo, hi } => lo < hi,
            ParamDomain::Continuous { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            ParamDomain::LogContinuous { lo, hi } => hi.is_finite() && *lo > 0.0 && lo < hi,
            ParamDomain::Categorical { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid parameter domain {self:?}")))
        }
    }

    pub fn contains(&self, v: &ParamValue) -> bool {
        match self {
            ParamDomain::Discrete { lo, hi } => v.as_i64().is_some_and(|x| (*lo..=*hi).contains(&x)),
            ParamDomain::Continuous { lo, hi } | ParamDomain::LogContinuous { lo, hi } => {
                v.as_f64().is_some_and(|x| x >= *lo && x <= *hi)
            }
            ParamDomain::Categorical { values } => values.contains(v),
        }
    }

    pub fn sample(&self, rng: &mut SeedStream) -> ParamValue {
        match self {
            ParamDomain::Discrete { lo, hi } => ParamValue::Int(rng.range_inclusive(*lo, *hi)),
            ParamDomain::Continuous { lo, hi } => ParamValue::Real(lo + (hi - lo) * rng.unit()),
            ParamDomain::LogContinuous { lo, hi } => {
                let (a, b) = (lo.ln(), hi.ln());
                ParamValue::Real((a + (b - a) * rng.unit()).exp().clamp(*lo, *hi))
            }
            ParamDomain::Categorical { values } => values[rng.below(values.len() as u64) as usize].clone(),
        }
    }

    /// Number of unit-cube coordinates this dimension occupies.
    pub fn encoded_width(&self) -> usize {
        match self {
            ParamDomain::Categorical { values } => values.len(),
            _ => 1,
        }
    }

    fn encode(&self, v: &ParamValue, out: &mut Vec<f64>) {
        match self {
            ParamDomain::Discrete { lo, hi } => {
                out.push((v.as_f64().unwrap_or(*lo as f64) - *lo as f64) / (hi - lo) as f64)
            }
            ParamDomain::Continuous { lo, hi } => out.push((v.as_f64().unwrap_or(*lo) - lo) / (hi - lo)),
            ParamDomain::LogContinuous { lo, hi } => {
                let x = v.as_f64().unwrap_or(*lo).max(*lo);
                out.push((x.ln() - lo.ln()) / (hi.ln() - lo.ln()))
            }
            ParamDomain::Categorical { values } => {
                out.extend(values.iter().map(|c| if c == v { 1.0 } else { 0.0 }))
            }
        }
    }

    fn decode(&self, x: &[f64]) -> ParamValue {
        match self {
            ParamDomain::Discrete { lo, hi } => {
                let t = x[0].clamp(0.0, 1.0);
                ParamValue::Int((*lo as f64 + t * (hi - lo) as f64).round() as i64)
            }
            ParamDomain::Continuous { lo, hi } => ParamValue::Real(lo + x[0].clamp(0.0, 1.0) * (hi - lo)),
            ParamDomain::LogContinuous { lo, hi } => {
                let t = x[0].clamp(0.0, 1.0);
                ParamValue::Real((lo.ln() + t * (hi.ln() - lo.ln())).exp().clamp(*lo, *hi))
            }
            ParamDomain::Categorical { values } => {
                let mut best = 0;
                for (i, &v) in x.iter().enumerate() {
                    if v > x[best] {
                        best = i;
                    }
                }
                values[best].clone()
            }
        }
    }
}

/// Ordered, uniquely named hyperparameter domains.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchSpace {
    dims: Vec<(String, ParamDomain)>,
}

impl SearchSpace {
    pub fn new(dims: Vec<(String, ParamDomain)>) -> Result<Self> {
        for (i, (name, d)) in dims.iter().enumerate() {
            d.validate()?;
            if dims[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::domain(format!("duplicate parameter {name:?}")));
            }
        }
        Ok(Self { dims })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn dims(&self) -> &[(String, ParamDomain)] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ParamDomain> {
        self.dims.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    /// Replaces the domain of an existing parameter.
    pub fn with_override(mut self, name: &str, domain: ParamDomain) -> Result<Self> {
        domain.validate()?;
        let slot = self
            .dims
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::domain(format!("parameter {name:?} is not in the search space")))?;
        slot.1 = domain;
        Ok(self)
    }

    /// Checks that `params` assigns every dimension, and nothing else, a value in its domain.
    pub fn validate_params(&self, params: &Params) -> Result<()> {
        for name in params.keys() {
            if self.get(name).is_none() {
                return Err(Error::Contract(format!("unknown parameter {name:?}")));
            }
        }
        for (name, d) in &self.dims {
            match params.get(name) {
                None => return Err(Error::Contract(format!("missing parameter {name:?}"))),
                Some(v) if !d.contains(v) => {
                    return Err(Error::domain(format!("parameter {name} = {v} outside {d:?}")))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn encoded_dim(&self) -> usize {
        self.dims.iter().map(|(_, d)| d.encoded_width()).sum()
    }

    /// Maps params to the unit cube: min-max for numeric dimensions (log
    /// scale for `LogContinuous`), one-hot for categorical ones.
    pub fn encode(&self, params: &Params) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encoded_dim());
        for (name, d) in &self.dims {
            let v = params.get(name).cloned().unwrap_or(ParamValue::Real(f64::NAN));
            d.encode(&v, &mut out);
        }
        out
    }

    /// Inverse of [`encode`](Self::encode); discrete values are rounded and
    /// categoricals take the largest coordinate.
    pub fn decode(&self, x: &[f64]) -> Params {
        let mut at = 0;
        let mut out = Params::new();
        for (name, d) in &self.dims {
            let w = d.encoded_width();
            out.insert(name.clone(), d.decode(&x[at..at + w]));
            at += w;
        }
        out
    }
}

/// Independent uniform draw from every dimension.
pub fn sample_random(space: &SearchSpace, rng: &mut SeedStream) -> Params {
    space.dims.iter().map(|(n, d)| (n.clone(), d.sample(rng))).collect()
}
