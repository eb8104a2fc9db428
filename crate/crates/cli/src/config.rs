//! Run configuration: command-line flags layered over an optional `key=value` file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use szilard::spectrum::BasisPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Exact,
    Classical,
    IdealBose,
    IdealFermi,
    Perturbative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// Inclusive `lo:hi:count` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        szilard::search::linspace(self.lo, self.hi, self.count)
    }
}

impl FromStr for Range {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            bail!("range must look like lo:hi:count, got {s:?}");
        }
        let lo: f64 = parts[0]
            .trim()
            .parse()
            .with_context(|| format!("bad range start in {s:?}"))?;
        let hi: f64 = parts[1]
            .trim()
            .parse()
            .with_context(|| format!("bad range end in {s:?}"))?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .with_context(|| format!("bad point count in {s:?}"))?;
        if count == 0 {
            bail!("range {s:?} has no points");
        }
        if !(lo <= hi) {
            bail!("range {s:?} is not increasing");
        }
        Ok(Range { lo, hi, count })
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.count)
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// Number of particles N
    #[arg(long)]
    pub n: Option<usize>,
    /// Coupling g in units of g0
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    /// Temperature k_BT/E1
    #[arg(long)]
    pub t: Option<f64>,
    /// Temperature range lo:hi:count in units of E1
    #[arg(long = "t-range")]
    pub t_range: Option<String>,
    /// Coupling range lo:hi:count in units of g0
    #[arg(long = "g-range", allow_hyphen_values = true)]
    pub g_range: Option<String>,
    /// Insertion position ℓ/L
    #[arg(long)]
    pub ins: Option<f64>,
    /// Insertion range lo:hi:count
    #[arg(long = "ins-range")]
    pub ins_range: Option<String>,
    /// Cap on single-particle modes per subsystem
    #[arg(long)]
    pub modes: Option<usize>,
    /// Energy-cutoff headroom above the thermal window, units of E1
    #[arg(long = "e-cut")]
    pub e_cut: Option<f64>,
    /// Required |Δ ln Z| between successive bases
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output file (default: standard output)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Model for the subsystem partition functions
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// File of key=value lines using the long flag names
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spectrum cache directory (default: $SZILARD_CACHE_DIR, else no disk cache)
    #[arg(long = "cache-dir")]
    pub cache_dir: Option<PathBuf>,
}

/// Fully resolved configuration, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub g: f64,
    pub t: f64,
    pub t_range: Option<Range>,
    pub g_range: Option<Range>,
    pub ins: f64,
    pub ins_range: Option<Range>,
    pub modes: Option<usize>,
    pub e_cut: f64,
    pub tol: f64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    pub baseline: Baseline,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

pub const CACHE_ENV: &str = "SZILARD_CACHE_DIR";

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

const KNOWN_KEYS: &[&str] = &[
    "n",
    "g",
    "t",
    "t-range",
    "g-range",
    "ins",
    "ins-range",
    "modes",
    "e-cut",
    "tol",
    "out",
    "format",
    "baseline",
    "cache-dir",
];

fn file_value<T: FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    match file.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| anyhow!("config key {key}={v}: {e}")),
    }
}

fn enum_value<T: ValueEnum>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match file.get(key) {
        None => Ok(None),
        Some(v) => T::from_str(v, true)
            .map(Some)
            .map_err(|e| anyhow!("config key {key}={v}: {e}")),
    }
}

impl RunFlags {
    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        if let Some(bad) = file.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            bail!("unknown config key {bad:?}");
        }
        let range = |flag: &Option<String>, key: &str| -> Result<Option<Range>> {
            match flag {
                Some(s) => Ok(Some(s.parse()?)),
                None => file_value::<String>(&file, key)?
                    .map(|s| s.parse())
                    .transpose(),
            }
        };
        let defaults = BasisPolicy::default();
        let cfg = RunConfig {
            n: self.n.or(file_value(&file, "n")?).unwrap_or(2),
            g: self.g.or(file_value(&file, "g")?).unwrap_or(0.0),
            t: self.t.or(file_value(&file, "t")?).unwrap_or(1.0),
            t_range: range(&self.t_range, "t-range")?,
            g_range: range(&self.g_range, "g-range")?,
            ins: self.ins.or(file_value(&file, "ins")?).unwrap_or(0.5),
            ins_range: range(&self.ins_range, "ins-range")?,
            modes: self.modes.or(file_value(&file, "modes")?),
            e_cut: self
                .e_cut
                .or(file_value(&file, "e-cut")?)
                .unwrap_or(defaults.margin),
            tol: self
                .tol
                .or(file_value(&file, "tol")?)
                .unwrap_or(defaults.z_tolerance),
            out: self.out.clone().or(file_value(&file, "out")?),
            format: self
                .format
                .or(enum_value(&file, "format")?)
                .unwrap_or(Format::Csv),
            baseline: self
                .baseline
                .or(enum_value(&file, "baseline")?)
                .unwrap_or(Baseline::Exact),
            cache_dir: self
                .cache_dir
                .clone()
                .or(file_value(&file, "cache-dir")?)
                .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from)),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            bail!("--n must be at least 1");
        }
        if !(self.t > 0.0) {
            bail!("--t must be positive");
        }
        if let Some(r) = &self.t_range {
            if !(r.lo > 0.0) {
                bail!("--t-range must stay positive");
            }
        }
        if !(self.ins > 0.0 && self.ins < 1.0) {
            bail!("--ins must lie strictly between 0 and 1");
        }
        if let Some(r) = &self.ins_range {
            if !(r.lo > 0.0 && r.hi < 1.0) {
                bail!("--ins-range must lie strictly between 0 and 1");
            }
        }
        if !(self.e_cut >= 0.0) {
            bail!("--e-cut must be non-negative");
        }
        if !(self.tol > 0.0) {
            bail!("--tol must be positive");
        }
        Ok(())
    }

    pub fn policy(&self) -> BasisPolicy {
        BasisPolicy {
            margin: self.e_cut,
            z_tolerance: self.tol,
            max_modes: self.modes,
            ..BasisPolicy::default()
        }
    }

    /// `key=value` pairs in a fixed order, for output headers.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let opt = |r: &Option<Range>| r.map(|r| r.to_string()).unwrap_or_else(|| "-".into());
        vec![
            ("n", self.n.to_string()),
            ("g", self.g.to_string()),
            ("t", self.t.to_string()),
            ("t-range", opt(&self.t_range)),
            ("g-range", opt(&self.g_range)),
            ("ins", self.ins.to_string()),
            ("ins-range", opt(&self.ins_range)),
            (
                "modes",
                self.modes
                    .map(|m| m.to_string())
                    .unwrap_or_else(|| "-".into()),
            ),
            ("e-cut", self.e_cut.to_string()),
            ("tol", self.tol.to_string()),
            ("format", format!("{:?}", self.format).to_lowercase()),
            (
                "baseline",
                self.baseline
                    .to_possible_value()
                    .map(|v| v.get_name().to_string())
                    .unwrap_or_default(),
            ),
        ]
    }
}
