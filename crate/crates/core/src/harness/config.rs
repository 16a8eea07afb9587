//! Run configuration, validation and the content hash that keys the result store.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LawValidation,
    GreenTable,
    UbiquitySweep,
    UstarProxy,
    Tree,
    SprinkleMerge,
    Certificate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::LawValidation => "law-validation",
            Experiment::GreenTable => "green-table",
            Experiment::UbiquitySweep => "ubiquity-sweep",
            Experiment::UstarProxy => "ustar-proxy",
            Experiment::Tree => "tree",
            Experiment::SprinkleMerge => "sprinkle-merge",
            Experiment::Certificate => "certificate",
        }
    }
}

/// One batch run. Keys are kebab-case in JSON; unknown keys are rejected.
///
/// Experiment-specific parameters are optional and ignored by experiments that do
/// not use them (they still enter the hash).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u_grid: Vec<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,

    /// box side for ustar-proxy
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<u32>,
    /// sampling level for ustar-proxy
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// tree depth
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<u64>,
    /// tree level, overriding (1 - eps) g(0) log d
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    /// largest |K| for dense Green solves
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_cap: Option<usize>,
    /// certificate: L_0 as a decimal integer
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_gc: Option<f64>,
}

fn default_samples() -> usize {
    1000
}

fn default_workers() -> usize {
    1
}

pub const MAX_DIM: usize = 64;
pub const MAX_SAMPLES: usize = 10_000_000;
pub const MAX_WORKERS: usize = 1024;

fn bad(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        RunConfig {
            experiment,
            d: None,
            d_list: Vec::new(),
            u_grid: Vec::new(),
            n_samples: default_samples(),
            seed: 0,
            workers: default_workers(),
            output_path: None,
            side: None,
            u_max: None,
            bootstrap: None,
            epsilon: None,
            ell: None,
            u0: None,
            solve_cap: None,
            l0: None,
            c0: None,
            c1: None,
            c_eps: None,
            c_decay: None,
            n_max: None,
            q0: None,
            p_gc: None,
        }
    }

    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                Error::Config(inner.to_string())
            } else {
                Error::Config(format!("{path}: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Dimensions to run: d-list if given, else d.
    pub fn dims(&self) -> Vec<usize> {
        if self.d_list.is_empty() {
            self.d.into_iter().collect()
        } else {
            self.d_list.clone()
        }
    }

    pub fn single_dim(&self) -> Result<usize> {
        match (self.d, self.d_list.as_slice()) {
            (Some(d), _) => Ok(d),
            (None, [d]) => Ok(*d),
            _ => Err(bad("d", format!("{} needs a single dimension", self.experiment.name()))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        if dims.is_empty() && self.experiment != Experiment::Certificate {
            return Err(bad("d", "missing (give d or d-list)"));
        }
        for &d in dims.iter().chain(&self.d) {
            if !(3..=MAX_DIM).contains(&d) {
                return Err(bad(if self.d == Some(d) { "d" } else { "d-list" }, format!("{d} outside [3, {MAX_DIM}]")));
            }
        }
        if self.experiment == Experiment::Certificate && self.d.is_none() {
            return Err(bad("d", "missing"));
        }
        if let Some(&u) = self.u_grid.iter().find(|u| !(u.is_finite() && **u >= 0.0)) {
            return Err(bad("u-grid", format!("level {u} is not a finite non-negative number")));
        }
        if !(1..=MAX_SAMPLES).contains(&self.n_samples) {
            return Err(bad("n-samples", format!("{} outside [1, {MAX_SAMPLES}]", self.n_samples)));
        }
        if !(1..=MAX_WORKERS).contains(&self.workers) {
            return Err(bad("workers", format!("{} outside [1, {MAX_WORKERS}]", self.workers)));
        }
        if let Some(s) = self.side {
            if s == 0 || s > 64 {
                return Err(bad("side", format!("{s} outside [1, 64]")));
            }
        }
        if let Some(u) = self.u_max {
            if !(u.is_finite() && u > 0.0) {
                return Err(bad("u-max", format!("{u} is not positive")));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(bad("epsilon", format!("{e} outside (0, 1)")));
            }
        }
        if let Some(u) = self.u0 {
            if !(u.is_finite() && u >= 0.0) {
                return Err(bad("u0", format!("{u} is negative or not finite")));
            }
        }
        if self.solve_cap == Some(0) {
            return Err(bad("solve-cap", "must be positive"));
        }
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c-eps", self.c_eps), ("c-decay", self.c_decay)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(bad(name, format!("{v} is not positive")));
                }
            }
        }
        for (name, v) in [("q0", self.q0), ("p-gc", self.p_gc)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad(name, format!("{v} outside [0, 1]")));
                }
            }
        }
        if let Some(l0) = &self.l0 {
            if l0.is_empty() || !l0.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad("l0", format!("{l0:?} is not a decimal integer")));
            }
        }
        if let Some(n) = self.n_max {
            if n > 64 {
                return Err(bad("n-max", format!("{n} above 64")));
            }
        }
        match self.experiment {
            Experiment::UbiquitySweep if self.u_grid.is_empty() => Err(bad("u-grid", "ubiquity-sweep needs at least one level")),
            Experiment::Tree | Experiment::SprinkleMerge if self.epsilon.is_none() => {
                Err(bad("epsilon", format!("{} needs epsilon", self.experiment.name())))
            }
            Experiment::Tree | Experiment::SprinkleMerge | Experiment::UbiquitySweep => self.single_dim().map(|_| ()),
            Experiment::Certificate if self.u_grid.len() > 1 => Err(bad("u-grid", "certificate takes one level")),
            _ => Ok(()),
        }
    }

    /// SHA-256 over the canonical JSON of every field except workers and output-path.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(m) = v.as_object_mut() {
            m.remove("workers");
            m.remove("output-path");
        }
        let bytes = serde_json::to_vec(&v).expect("value serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}
