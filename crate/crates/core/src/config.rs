//! Run configuration: flat `key = value` text with dotted sections.
//!
//! ```text
//! # hard rods with a weak tail
//! beta = 1.0
//! grid.R = 8
//! grid.M = 257
//! truncation.n_max = 3
//! potential.kind = hard_rod
//! potential.tail_depth = 0.3
//! z = 0.05
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cluster::ClusterTruncation;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::imc::{ImcConfig, JacobianMode};
use crate::oracle::BoxSpec;
use crate::potentials::{Majorant, PairPotential, Shape};

pub const DEFAULT_SEED: u64 = 42;

const KNOWN_KEYS: &[&str] = &[
    "beta",
    "mu",
    "z",
    "seed",
    "output_dir",
    "grid.R",
    "grid.M",
    "truncation.n_max",
    "potential.kind",
    "potential.sigma",
    "potential.tail_depth",
    "potential.tail_alpha",
    "potential.epsilon",
    "potential.alpha",
    "potential.height",
    "potential.width",
    "potential.path",
    "potential.majorant_c",
    "potential.majorant_alpha",
    "target.rho_star",
    "target.rdf_path",
    "imc.max_iters",
    "imc.grad_tol",
    "imc.lambda0",
    "imc.lambda_decay",
    "imc.damping",
    "imc.backtrack",
    "imc.cg_tol",
    "imc.cg_max",
    "imc.jacobian",
    "oracle.L",
    "oracle.n_cap",
    "oracle.quad_points",
    "oracle.quad_points_high",
    "check.probes",
    "check.pairs",
];

/// Parsed key-value pairs, before interpretation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse(format!("line {}: expected `key = value`", lineno + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::Parse(format!("line {}: bad key `{k}`", lineno + 1)));
            }
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::Parse(format!("line {}: unknown key `{k}`", lineno + 1)));
            }
            let v = v.trim_matches('"').to_string();
            if entries.insert(k.to_string(), v).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
        }
        Ok(Self {
            entries,
            base_dir: PathBuf::from("."),
        })
    }

    /// Reads a file; relative paths inside it resolve against its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut raw = Self::parse(&text)?;
        raw.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Parse(format!("key `{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::MissingKey(key.into()))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get_str(key).map(|p| self.base_dir.join(p))
    }

    /// SHA-256 of the canonical `key=value` listing, so formatting and
    /// comments do not change it.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(a, _)| a)
}

/// How the potential is given.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialSource {
    Shape(Shape),
    Tabulated { path: PathBuf, majorant: Majorant },
}

/// Where in the phase diagram a forward run sits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatePoint {
    Mu(f64),
    Density(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub beta: f64,
    pub grid: GridSpec,
    pub trunc: ClusterTruncation,
    /// Absent only for `invert`, which then starts from the potential of mean force.
    pub potential: Option<PotentialSource>,
    pub state: Option<StatePoint>,
    pub rho_star: Option<f64>,
    pub rdf_path: Option<PathBuf>,
    pub imc: ImcConfig,
    pub oracle: BoxSpec,
    pub probes: usize,
    pub pairs: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub hash: String,
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let beta = raw.get_or("beta", 1.0)?;
        if !(beta > 0.0 && f64::is_finite(beta)) {
            return Err(Error::Parse(format!("key `beta`: must be positive, got {beta}")));
        }
        let grid = GridSpec::new(raw.get_or("grid.R", 8.0)?, raw.get_or("grid.M", 257)?)?;
        let trunc = ClusterTruncation::new(raw.get_or("truncation.n_max", 3)?)?;
        let potential = potential_source(raw)?;
        let state = match (raw.get::<f64>("mu")?, raw.get::<f64>("z")?) {
            (Some(_), Some(_)) => return Err(Error::Parse("give either `mu` or `z`, not both".into())),
            (Some(mu), None) => Some(StatePoint::Mu(mu)),
            (None, Some(z)) if z > 0.0 => Some(StatePoint::Mu(z.ln() / beta)),
            (None, Some(z)) => return Err(Error::Parse(format!("key `z`: must be positive, got {z}"))),
            (None, None) => raw.get::<f64>("target.rho_star")?.map(StatePoint::Density),
        };
        let defaults = ImcConfig::default();
        let jacobian = match raw.get_str("imc.jacobian").unwrap_or("full") {
            "full" => JacobianMode::Full,
            "diagonal" => JacobianMode::Diagonal,
            other => return Err(Error::Parse(format!("key `imc.jacobian`: unknown mode `{other}`"))),
        };
        let imc = ImcConfig {
            max_iters: raw.get_or("imc.max_iters", defaults.max_iters)?,
            grad_tol: raw.get_or("imc.grad_tol", defaults.grad_tol)?,
            lambda0: raw.get("imc.lambda0")?,
            lambda_decay: raw.get_or("imc.lambda_decay", defaults.lambda_decay)?,
            damping: raw.get_or("imc.damping", defaults.damping)?,
            backtrack: raw.get_or("imc.backtrack", defaults.backtrack)?,
            max_backtracks: defaults.max_backtracks,
            cg_tol: raw.get_or("imc.cg_tol", defaults.cg_tol)?,
            cg_max: raw.get_or("imc.cg_max", defaults.cg_max)?,
            trunc,
            jacobian,
        };
        imc.validate().map_err(|e| Error::Parse(e.to_string()))?;
        let mut oracle = BoxSpec::new(raw.get_or("oracle.L", 12.0)?, raw.get_or("oracle.n_cap", 4)?)?;
        oracle.quad_points = raw.get_or("oracle.quad_points", oracle.quad_points)?;
        oracle.quad_points_high = raw.get_or("oracle.quad_points_high", oracle.quad_points_high)?;
        oracle.validate()?;
        let rdf_path = raw.path("target.rdf_path");
        for p in rdf_path.iter().chain(match &potential {
            Some(PotentialSource::Tabulated { path, .. }) => Some(path),
            _ => None,
        }) {
            if !p.exists() {
                return Err(Error::Parse(format!("file {} does not exist", p.display())));
            }
        }
        Ok(Self {
            beta,
            grid,
            trunc,
            potential,
            state,
            rho_star: raw.get("target.rho_star")?,
            rdf_path,
            imc,
            oracle,
            probes: raw.get_or("check.probes", 20)?,
            pairs: raw.get_or("check.pairs", 10)?,
            seed: raw.get_or("seed", DEFAULT_SEED)?,
            output_dir: raw.path("output_dir"),
            hash: raw.hash(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_raw(&RawConfig::read(path)?)
    }

    pub fn build_potential(&self) -> Result<PairPotential> {
        match self.potential.as_ref().ok_or_else(|| Error::MissingKey("potential.kind".into()))? {
            PotentialSource::Shape(s) => PairPotential::from_shape(s.clone(), self.beta, self.grid),
            PotentialSource::Tabulated { path, majorant } => {
                let u = GridFunction::read_table(self.grid, path)?;
                PairPotential::from_u(self.beta, self.grid, u.values(), *majorant)
            }
        }
    }

    /// Header lines stamped on every output file.
    pub fn header(&self) -> Vec<String> {
        vec![
            format!("config_sha256 {}", self.hash),
            format!("n_max {}", self.trunc.n_max()),
            format!("grid R={} M={}", self.grid.extent(), self.grid.points()),
            format!("beta {}", self.beta),
        ]
    }
}

fn potential_source(raw: &RawConfig) -> Result<Option<PotentialSource>> {
    let Some(kind) = raw.get_str("potential.kind") else {
        return Ok(None);
    };
    let shape = match kind {
        "ideal" => Shape::Ideal,
        "hard_rod" => Shape::HardRod {
            sigma: raw.get_or("potential.sigma", 1.0)?,
            tail_depth: raw.get_or("potential.tail_depth", 0.0)?,
            tail_alpha: raw.get_or("potential.tail_alpha", 6.0)?,
        },
        "lj_type" => Shape::LjType {
            epsilon: raw.get_or("potential.epsilon", 1.0)?,
            sigma: raw.get_or("potential.sigma", 1.0)?,
            alpha: raw.get_or("potential.alpha", 6.0)?,
        },
        "square" => Shape::Square {
            height: raw.require("potential.height")?,
            width: raw.require("potential.width")?,
        },
        "tabulated" => {
            let path = raw.path("potential.path").ok_or_else(|| Error::MissingKey("potential.path".into()))?;
            let majorant = Majorant::new(
                raw.get_or("potential.majorant_c", 1.0)?,
                raw.get_or("potential.majorant_alpha", 2.0)?,
            )?;
            return Ok(Some(PotentialSource::Tabulated { path, majorant }));
        }
        other => return Err(Error::Parse(format!("key `potential.kind`: unknown kind `{other}`"))),
    };
    Ok(Some(PotentialSource::Shape(shape)))
}
