//! Experiment configuration: defaults per subcommand, then an optional flat
//! `key = value` file, then command-line flags, validated once up front.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const PAPER_SCALE_N: usize = 10_000_000;

#[derive(Args, Debug, Clone, Default)]
pub struct Options {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// l2 | sobolev | custom
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Ellipsoid radius.
    #[arg(long = "C", id = "C")]
    pub c: Option<f64>,
    /// One or more sample sizes, comma separated; `1e6` notation accepted.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub n: Option<Vec<usize>>,
    /// m = m_ratio · n.
    #[arg(long)]
    pub m_ratio: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relative tolerance for the multiplier solve.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Use n = 10⁷.
    #[arg(long)]
    pub paper_scale: bool,
    /// Weights file for `--family custom`, one value per line.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Truth for `risk`: least-favorable | zero | path to a file of coefficients.
    #[arg(long)]
    pub theta: Option<String>,
    /// Smoothness grid for `figure1`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
}

pub fn parse_count(s: &str) -> Result<usize, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 1e18 => Ok(v as usize),
        _ => Err(format!("not a count: {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Risk,
    Waterfill,
    Asymptotics,
    Figure1,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Risk => "risk",
            Command::Waterfill => "waterfill",
            Command::Asymptotics => "asymptotics",
            Command::Figure1 => "figure1",
            Command::Verify => "verify",
        }
    }

    fn default_n(self) -> Vec<usize> {
        match self {
            Command::Risk => vec![1001],
            Command::Waterfill => vec![1000],
            Command::Asymptotics => vec![1_000, 10_000, 100_000, 1_000_000],
            Command::Figure1 => vec![1_000_000],
            Command::Verify => vec![1_000, 10_000, 100_000],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyChoice {
    L2Ball,
    Sobolev,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TruthChoice {
    LeastFavorable,
    Zero,
    Given(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub family: FamilyChoice,
    pub alpha: f64,
    pub c: f64,
    pub n: Vec<usize>,
    pub m_ratio: usize,
    pub seed: u64,
    pub replicates: usize,
    pub out: PathBuf,
    pub tol: f64,
    pub theta: TruthChoice,
    pub alphas: Vec<f64>,
}

pub fn default_alpha_grid() -> Vec<f64> {
    (1..=12).map(|k| 0.25 * k as f64).collect()
}

const KEYS: &[&str] = &[
    "family",
    "alpha",
    "C",
    "n",
    "m_ratio",
    "seed",
    "replicates",
    "out",
    "tol",
    "paper_scale",
    "weights",
    "theta",
    "alphas",
];

/// Parses a flat `key = value` file. Blank lines and `#` comments are skipped;
/// `-` and `_` are interchangeable in keys.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// One real per line; blank lines and `#` comments skipped.
pub fn read_values(path: &Path) -> Result<Vec<f64>, CliError> {
    read_to_string(path)?
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("{}: bad number {l:?}", path.display())))
        })
        .collect()
}

/// Custom ellipsoid weights: nonnegative and nondecreasing.
pub fn read_weights(path: &Path) -> Result<Vec<f64>, CliError> {
    let w = read_values(path)?;
    if w.is_empty() {
        return Err(CliError::Config(format!("{}: no weights", path.display())));
    }
    if let Some(i) = w.iter().position(|v| *v < 0.0) {
        return Err(CliError::Config(format!("weight {i} is negative")));
    }
    if let Some(i) = w.windows(2).position(|p| p[1] < p[0]) {
        return Err(CliError::Config(format!(
            "weights must be nondecreasing; weight {} < weight {i}",
            i + 1
        )));
    }
    Ok(w)
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("invalid value for {key}: {value:?}"))
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|_| bad(key, v)))
        .transpose()
}

fn parse_list<T, F>(map: &BTreeMap<String, String>, key: &str, f: F) -> Result<Option<Vec<T>>, CliError>
where
    F: Fn(&str) -> Option<T>,
{
    map.get(key)
        .map(|v| {
            v.split(',')
                .map(|s| f(s.trim()).ok_or_else(|| bad(key, v)))
                .collect()
        })
        .transpose()
}

fn flag_entries(opts: &Options) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let join = |v: &[String]| v.join(",");
    if let Some(v) = &opts.family {
        m.insert("family".into(), v.clone());
    }
    if let Some(v) = opts.alpha {
        m.insert("alpha".into(), v.to_string());
    }
    if let Some(v) = opts.c {
        m.insert("C".into(), v.to_string());
    }
    if let Some(v) = &opts.n {
        m.insert("n".into(), join(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>()));
    }
    if let Some(v) = opts.m_ratio {
        m.insert("m_ratio".into(), v.to_string());
    }
    if let Some(v) = opts.seed {
        m.insert("seed".into(), v.to_string());
    }
    if let Some(v) = opts.replicates {
        m.insert("replicates".into(), v.to_string());
    }
    if let Some(v) = &opts.out {
        m.insert("out".into(), v.display().to_string());
    }
    if let Some(v) = opts.tol {
        m.insert("tol".into(), v.to_string());
    }
    if opts.paper_scale {
        m.insert("paper_scale".into(), "true".into());
    }
    if let Some(v) = &opts.weights {
        m.insert("weights".into(), v.display().to_string());
    }
    if let Some(v) = &opts.theta {
        m.insert("theta".into(), v.clone());
    }
    if let Some(v) = &opts.alphas {
        m.insert("alphas".into(), join(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>()));
    }
    m
}

impl ExperimentConfig {
    pub fn resolve(command: Command, opts: &Options) -> Result<Self, CliError> {
        let mut map = match &opts.config {
            Some(path) => parse_config_file(&read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        map.extend(flag_entries(opts));
        Self::from_map(command, &map)
    }

    pub fn from_map(command: Command, map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let family = match map.get("family").map(|s| s.to_ascii_lowercase()).as_deref() {
            None | Some("sobolev") => FamilyChoice::Sobolev,
            Some("l2") | Some("l2ball") | Some("l2_ball") => FamilyChoice::L2Ball,
            Some("custom") => {
                let path = map.get("weights").ok_or_else(|| {
                    CliError::Config("custom family needs a weights file".into())
                })?;
                FamilyChoice::Custom(read_weights(Path::new(path))?)
            }
            Some(other) => return Err(bad("family", other)),
        };
        let alpha = parse::<f64>(map, "alpha")?.unwrap_or(1.0);
        let c = parse::<f64>(map, "C")?.unwrap_or(1.0);
        let paper_scale = parse::<bool>(map, "paper_scale")?.unwrap_or(false);
        let mut n = parse_list(map, "n", |s| parse_count(s).ok())?.unwrap_or_else(|| command.default_n());
        if paper_scale {
            n = vec![PAPER_SCALE_N];
        }
        if let FamilyChoice::Custom(w) = &family {
            if map.contains_key("n") && n != [w.len()] {
                return Err(CliError::Config(format!(
                    "custom weights fix n = {}, got n = {n:?}",
                    w.len()
                )));
            }
            n = vec![w.len()];
        }
        let m_ratio = parse::<usize>(map, "m_ratio")?.unwrap_or(1);
        let seed = parse::<u64>(map, "seed")?.unwrap_or(20_240_917);
        let replicates = match map.get("replicates") {
            Some(v) => parse_count(v).map_err(|_| bad("replicates", v))?,
            None => 10_000,
        };
        let out = map
            .get("out")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("pred-minimax-out"));
        let tol = parse::<f64>(map, "tol")?.unwrap_or(1e-12);
        let theta = match map.get("theta").map(String::as_str) {
            None | Some("least-favorable") | Some("lf") => TruthChoice::LeastFavorable,
            Some("zero") | Some("0") => TruthChoice::Zero,
            Some(path) => TruthChoice::Given(read_values(Path::new(path))?),
        };
        let alphas = parse_list(map, "alphas", |s| s.parse::<f64>().ok())?.unwrap_or_else(default_alpha_grid);

        let cfg = Self {
            command,
            family,
            alpha,
            c,
            n,
            m_ratio,
            seed,
            replicates,
            out,
            tol,
            theta,
            alphas,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return fail(format!("C must be positive, got {}", self.c));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return fail(format!("n must be a nonempty list of positive sizes, got {:?}", self.n));
        }
        if self.m_ratio == 0 {
            return fail("m_ratio must be positive".into());
        }
        if self.replicates < 1000 {
            return fail(format!("replicates must be at least 1000, got {}", self.replicates));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return fail(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return fail(format!("alphas must be positive, got {:?}", self.alphas));
        }
        if let TruthChoice::Given(t) = &self.theta {
            if self.n.iter().any(|n| *n != t.len()) {
                return fail(format!("theta file has {} entries but n = {:?}", t.len(), self.n));
            }
        }
        match (self.command, &self.family) {
            (Command::Figure1, f) if *f != FamilyChoice::Sobolev => {
                fail("figure1 needs the Sobolev family".into())
            }
            (Command::Asymptotics | Command::Verify, FamilyChoice::Custom(_)) => {
                fail(format!("{} needs a family with a known rate", self.command.name()))
            }
            _ => Ok(()),
        }
    }

    /// Canonical text of every setting that can change the numbers, i.e.
    /// everything except the output directory.
    pub fn canonical(&self) -> String {
        let family = match &self.family {
            FamilyChoice::L2Ball => "l2".to_string(),
            FamilyChoice::Sobolev => "sobolev".to_string(),
            FamilyChoice::Custom(w) => format!("custom:{}", join_f64(w)),
        };
        let theta = match &self.theta {
            TruthChoice::LeastFavorable => "least-favorable".to_string(),
            TruthChoice::Zero => "zero".to_string(),
            TruthChoice::Given(t) => format!("given:{}", join_f64(t)),
        };
        let n: Vec<String> = self.n.iter().map(|n| n.to_string()).collect();
        format!(
            "command={}\nfamily={family}\nalpha={:e}\nC={:e}\nn={}\nm_ratio={}\nseed={}\nreplicates={}\ntol={:e}\ntheta={theta}\nalphas={}\n",
            self.command.name(),
            self.alpha,
            self.c,
            n.join(","),
            self.m_ratio,
            self.seed,
            self.replicates,
            self.tol,
            join_f64(&self.alphas),
        )
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}
