//! Run configuration: command-line flags over a flat `key = value` file over
//! built-in defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gdp_trend::fluctuations::{DEFAULT_BIN_WIDTH, DEFAULT_TAIL_K};

pub const DEFAULT_REFERENCE: &str = "USA";
pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_EXCLUDE: [&str; 6] = [
    "Greece",
    "Ireland",
    "Norway",
    "New Zealand",
    "Portugal",
    "USA",
];
pub const DEFAULT_ADJUSTMENTS: [(&str, f64); 2] = [("France", 0.97), ("USA", 0.82)];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub gdp_eks: Option<PathBuf>,
    pub gdp_gk: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub reference: String,
    pub bin_width: f64,
    pub tail_k: f64,
    pub exclude: BTreeSet<String>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub years: Option<RangeInclusive<i32>>,
    pub adjustments: BTreeMap<String, f64>,
    /// Externally quoted adjusted values to check against the computed ones.
    pub stated: BTreeMap<String, f64>,
}

/// One layer of settings; unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub gdp_eks: Option<PathBuf>,
    pub gdp_gk: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub reference: Option<String>,
    pub bin_width: Option<f64>,
    pub tail_k: Option<f64>,
    pub exclude: Option<BTreeSet<String>>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub years: Option<RangeInclusive<i32>>,
    pub adjustments: BTreeMap<String, f64>,
    pub stated: BTreeMap<String, f64>,
}

impl Settings {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's own directory.
    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Settings::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Settings> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value", i + 1);
            };
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let at = |e: anyhow::Error| e.context(format!("line {}: key {key:?}", i + 1));
            let path = || base.join(value);
            match key.as_str() {
                "gdp_eks" => s.gdp_eks = Some(path()),
                "gdp_gk" => s.gdp_gk = Some(path()),
                "population" => s.population = Some(path()),
                "out" => s.out = Some(path()),
                "reference" => s.reference = Some(value.to_string()),
                "bin_width" => s.bin_width = Some(parse_positive(value).map_err(at)?),
                "tail_k" => s.tail_k = Some(parse_f64(value).map_err(at)?),
                "exclude" => s.exclude = Some(parse_list(value)),
                "seed" => s.seed = Some(value.parse().context("not a u64").map_err(at)?),
                "years" => s.years = Some(parse_years(value).map_err(at)?),
                _ => {
                    if let Some(country) = key.strip_prefix("adjust.") {
                        s.adjustments.insert(
                            country.trim().to_string(),
                            parse_positive(value).map_err(at)?,
                        );
                    } else if let Some(country) = key.strip_prefix("stated.") {
                        s.stated
                            .insert(country.trim().to_string(), parse_f64(value).map_err(at)?);
                    } else {
                        bail!("line {}: unknown key {key:?}", i + 1);
                    }
                }
            }
        }
        Ok(s)
    }

    /// `self` wins over `lower` field by field; map entries merge per key.
    pub fn over(self, lower: Settings) -> Settings {
        let merge = |upper: BTreeMap<String, f64>, mut lower: BTreeMap<String, f64>| {
            lower.extend(upper);
            lower
        };
        Settings {
            gdp_eks: self.gdp_eks.or(lower.gdp_eks),
            gdp_gk: self.gdp_gk.or(lower.gdp_gk),
            population: self.population.or(lower.population),
            reference: self.reference.or(lower.reference),
            bin_width: self.bin_width.or(lower.bin_width),
            tail_k: self.tail_k.or(lower.tail_k),
            exclude: self.exclude.or(lower.exclude),
            out: self.out.or(lower.out),
            seed: self.seed.or(lower.seed),
            years: self.years.or(lower.years),
            adjustments: merge(self.adjustments, lower.adjustments),
            stated: merge(self.stated, lower.stated),
        }
    }

    pub fn resolve(self) -> Result<RunConfig> {
        let bin_width = self.bin_width.unwrap_or(DEFAULT_BIN_WIDTH);
        if !(bin_width.is_finite() && bin_width > 0.0) {
            bail!("bin width must be positive, got {bin_width}");
        }
        let tail_k = self.tail_k.unwrap_or(DEFAULT_TAIL_K);
        if !(tail_k.is_finite() && tail_k >= 0.0) {
            bail!("tail multiplier must be >= 0, got {tail_k}");
        }
        let mut adjustments: BTreeMap<String, f64> = DEFAULT_ADJUSTMENTS
            .iter()
            .map(|(c, f)| (c.to_string(), *f))
            .collect();
        adjustments.extend(self.adjustments);
        Ok(RunConfig {
            gdp_eks: self.gdp_eks,
            gdp_gk: self.gdp_gk,
            population: self.population,
            reference: self
                .reference
                .unwrap_or_else(|| DEFAULT_REFERENCE.to_string()),
            bin_width,
            tail_k,
            exclude: self
                .exclude
                .unwrap_or_else(|| DEFAULT_EXCLUDE.iter().map(|c| c.to_string()).collect()),
            out: self.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            seed: self.seed,
            years: self.years,
            adjustments,
            stated: self.stated,
        })
    }
}

fn parse_f64(value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .with_context(|| format!("{value:?} is not a number"))?;
    if !v.is_finite() {
        bail!("{value:?} is not finite");
    }
    Ok(v)
}

fn parse_positive(value: &str) -> Result<f64> {
    let v = parse_f64(value)?;
    if v <= 0.0 {
        bail!("{value} must be positive");
    }
    Ok(v)
}

pub fn parse_list(value: &str) -> BTreeSet<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(str::to_string)
        .collect()
}

/// `START:END`, both inclusive.
pub fn parse_years(value: &str) -> Result<RangeInclusive<i32>> {
    let (a, b) = value
        .split_once(':')
        .with_context(|| format!("{value:?} is not START:END"))?;
    let (a, b): (i32, i32) = (
        a.trim().parse().context("bad start year")?,
        b.trim().parse().context("bad end year")?,
    );
    if a > b {
        bail!("year range {a}:{b} is empty");
    }
    Ok(a..=b)
}

/// `COUNTRY=FACTOR`
pub fn parse_adjustment(value: &str) -> Result<(String, f64)> {
    let (c, f) = value
        .rsplit_once('=')
        .with_context(|| format!("{value:?} is not COUNTRY=FACTOR"))?;
    Ok((c.trim().to_string(), parse_positive(f.trim())?))
}
