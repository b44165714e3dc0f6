//! Deterministic synthetic economies and populations with known ground truth.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`), keyed with
//! `seed_from_u64(seed)` and a per-series stream number. Uniforms take the top
//! 53 bits of each `u64` and are shifted to the open interval (0, 1); normal
//! variates are the inverse normal CDF of those uniforms. No platform libm is
//! involved, so a seed reproduces the same bits everywhere.
//!
//! Noise is added to increments, never to levels: `G(k) = G(k-1) + A + e_k`.
//! Every increment is rounded to a multiple of [`INCREMENT_QUANTUM`] so that
//! all partial sums are exact in `f64` and differencing the levels gives back
//! the drawn increments bit for bit.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::datastore::{AnnualSeries, PopulationTable, PppBasis};
use crate::error::{Error, Result};
use crate::growthmodel::ModelParams;
use crate::special::normal_quantile;

/// 2^-16 currency units.
pub const INCREMENT_QUANTUM: f64 = 1.0 / 65536.0;

pub fn quantize(x: f64) -> f64 {
    (x / INCREMENT_QUANTUM).round() * INCREMENT_QUANTUM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoiseKind {
    None,
    Normal {
        sigma: f64,
    },
    /// Core draws `N(0, sigma_core)`, with probability `tail_fraction` a
    /// draw from `N(0, sigma_tail)` instead.
    Mixture {
        sigma_core: f64,
        sigma_tail: f64,
        tail_fraction: f64,
    },
}

impl NoiseKind {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::NonPositiveParameter { name, value: v })
            }
        };
        match *self {
            NoiseKind::None => Ok(()),
            NoiseKind::Normal { sigma } => positive("sigma", sigma),
            NoiseKind::Mixture {
                sigma_core,
                sigma_tail,
                tail_fraction,
            } => {
                positive("sigma_core", sigma_core)?;
                positive("sigma_tail", sigma_tail)?;
                if (0.0..=1.0).contains(&tail_fraction) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "tail_fraction {tail_fraction} outside [0, 1]"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub seed: u64,
}

/// Seeded stream of uniforms and normals.
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }

    pub fn draw(&mut self, kind: &NoiseKind) -> f64 {
        match *kind {
            NoiseKind::None => 0.0,
            NoiseKind::Normal { sigma } => sigma * self.standard_normal(),
            NoiseKind::Mixture {
                sigma_core,
                sigma_tail,
                tail_fraction,
            } => {
                let from_tail = self.uniform() < tail_fraction;
                let z = self.standard_normal();
                if from_tail {
                    sigma_tail * z
                } else {
                    sigma_core * z
                }
            }
        }
    }
}

/// What the generator actually did, for comparing estimators against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub country: String,
    pub params: ModelParams,
    pub noise: NoiseSpec,
    pub stream: u64,
    pub years: usize,
    /// Quantized noise draws `e_k`, one per increment.
    pub noise_draws: Vec<f64>,
    /// `A + e_k`, exactly the differences of the generated levels.
    pub increments: Vec<f64>,
}

impl GroundTruth {
    pub fn mean_increment(&self) -> f64 {
        self.increments.iter().sum::<f64>() / self.increments.len() as f64
    }
}

/// Generates one series on stream 0 of the noise seed.
pub fn generate(
    params: &ModelParams,
    noise: &NoiseSpec,
    years: usize,
    country: &str,
    basis: PppBasis,
) -> Result<(AnnualSeries, GroundTruth)> {
    generate_on_stream(params, noise, 0, years, country, basis)
}

pub fn generate_on_stream(
    params: &ModelParams,
    noise: &NoiseSpec,
    stream: u64,
    years: usize,
    country: &str,
    basis: PppBasis,
) -> Result<(AnnualSeries, GroundTruth)> {
    if years < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: years,
        });
    }
    noise.kind.validate()?;
    let mut source = NoiseSource::new(noise.seed, stream);
    let a = quantize(params.a);
    let b = quantize(params.b);
    let mut values = Vec::with_capacity(years);
    let mut noise_draws = Vec::with_capacity(years - 1);
    let mut increments = Vec::with_capacity(years - 1);
    values.push(b);
    for k in 1..years {
        let eps = quantize(source.draw(&noise.kind));
        let inc = a + eps;
        let level = values[k - 1] + inc;
        if level <= 0.0 {
            return Err(Error::NonPositiveLevel {
                year: params.t0 + k as i32,
                value: level,
            });
        }
        noise_draws.push(eps);
        increments.push(inc);
        values.push(level);
    }
    let series = AnnualSeries::new(country, basis, params.t0, values)?;
    let truth = GroundTruth {
        country: country.to_string(),
        params: ModelParams::new(a, b, params.t0)?,
        noise: *noise,
        stream,
        years,
        noise_draws,
        increments,
    };
    Ok((series, truth))
}

/// Population with a constant adult count and `total = round(base_adult * ratio)`.
pub fn generate_population(
    country: &str,
    start_year: i32,
    ratio_path: &[f64],
    base_adult: f64,
) -> Result<PopulationTable> {
    if !(base_adult.is_finite() && base_adult > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "base_adult",
            value: base_adult,
        });
    }
    let mut table = PopulationTable::new();
    for (i, &ratio) in ratio_path.iter().enumerate() {
        if !(ratio.is_finite() && ratio >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "population ratio {ratio} in {} is below 1",
                start_year + i as i32
            )));
        }
        table.insert(
            country,
            start_year + i as i32,
            (base_adult * ratio).round(),
            base_adult,
        )?;
    }
    Ok(table)
}

/// Straight-line ratio path from `start` to `end` over `years` points.
pub fn linear_ratio_path(start: f64, end: f64, years: usize) -> Vec<f64> {
    match years {
        0 => vec![],
        1 => vec![start],
        _ => (0..years)
            .map(|i| start + (end - start) * i as f64 / (years - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountrySpec {
    pub name: String,
    pub a: f64,
    pub b: f64,
}

/// Countries whose `A` and `B` are drawn uniformly from the given ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomCountries {
    pub count: usize,
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub ratio_start: f64,
    pub ratio_end: f64,
    pub base_adult: f64,
}

/// A whole synthetic panel, as read from a simulation spec file (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub seed: u64,
    #[serde(default = "default_start_year")]
    pub start_year: i32,
    pub years: usize,
    #[serde(default = "default_basis")]
    pub ppp_basis: PppBasis,
    pub noise: NoiseKind,
    #[serde(default)]
    pub countries: Vec<CountrySpec>,
    #[serde(default)]
    pub random_countries: Option<RandomCountries>,
    /// When present the generated line is the population-corrected truth
    /// and the emitted series is that truth divided by the yearly ratio.
    #[serde(default)]
    pub population: Option<PopulationSpec>,
}

fn default_start_year() -> i32 {
    1950
}

fn default_basis() -> PppBasis {
    PppBasis::Eks2002
}

impl SimulationSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("simulation spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.years < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: self.years,
            });
        }
        if let Some(r) = &self.random_countries {
            if !(r.a_min <= r.a_max && r.b_min <= r.b_max && r.b_min > 0.0) {
                return Err(Error::InvalidParameter(
                    "random_countries needs a_min <= a_max and 0 < b_min <= b_max".into(),
                ));
            }
        }
        if self.countries.is_empty() && self.random_countries.as_ref().is_none_or(|r| r.count == 0)
        {
            return Err(Error::Empty("simulation spec has no countries"));
        }
        if let Some(p) = &self.population {
            if p.ratio_start < 1.0 || p.ratio_end < 1.0 {
                return Err(Error::InvalidParameter(
                    "population ratios must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticPanel {
    /// Series as they would be published (divided by the ratio when a
    /// population is simulated).
    pub series: Vec<AnnualSeries>,
    /// Generated lines; the population-corrected truth when a population
    /// is simulated.
    pub truth_series: Vec<AnnualSeries>,
    pub truths: Vec<GroundTruth>,
    #[serde(skip)]
    pub population: Option<PopulationTable>,
    pub ratio_path: Option<Vec<f64>>,
}

impl SyntheticPanel {
    pub fn ground_truth_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "truths": self.truths,
            "truth_series": self.truth_series,
            "ratio_path": self.ratio_path,
        }))
        .expect("ground truth is serializable")
    }
}

/// Stream 0 draws the random country parameters; country `i` (in spec
/// order, explicit countries first) uses stream `i + 1`.
pub fn simulate(spec: &SimulationSpec) -> Result<SyntheticPanel> {
    spec.validate()?;
    let mut countries = spec.countries.clone();
    if let Some(r) = &spec.random_countries {
        let mut source = NoiseSource::new(spec.seed, 0);
        let width = (r.count.max(1) as f64).log10().floor() as usize + 1;
        for i in 0..r.count {
            let a = quantize(source.uniform_in(r.a_min, r.a_max));
            let b = quantize(source.uniform_in(r.b_min, r.b_max));
            countries.push(CountrySpec {
                name: format!("C{:0width$}", i + 1),
                a,
                b,
            });
        }
    }
    let noise = NoiseSpec {
        kind: spec.noise,
        seed: spec.seed,
    };
    let ratio_path = spec
        .population
        .as_ref()
        .map(|p| linear_ratio_path(p.ratio_start, p.ratio_end, spec.years));

    let mut panel = SyntheticPanel {
        series: Vec::new(),
        truth_series: Vec::new(),
        truths: Vec::new(),
        population: None,
        ratio_path: ratio_path.clone(),
    };
    let mut population = PopulationTable::new();
    for (i, c) in countries.iter().enumerate() {
        let params = ModelParams::new(c.a, c.b, spec.start_year)?;
        let (truth_series, truth) = generate_on_stream(
            &params,
            &noise,
            i as u64 + 1,
            spec.years,
            &c.name,
            spec.ppp_basis,
        )?;
        let published = match (&spec.population, &ratio_path) {
            (Some(p), Some(path)) => {
                let table = generate_population(&c.name, spec.start_year, path, p.base_adult)?;
                let ratios: Vec<f64> = truth_series
                    .years()
                    .map(|y| {
                        table
                            .get(&c.name, y)
                            .expect("path covers every year")
                            .ratio()
                    })
                    .collect();
                for (country, year, e) in table.iter() {
                    population.insert(country, year, e.total, e.pop15plus)?;
                }
                truth_series.with_values(
                    truth_series
                        .values()
                        .iter()
                        .zip(&ratios)
                        .map(|(v, r)| v / r)
                        .collect(),
                )?
            }
            _ => truth_series.clone(),
        };
        panel.series.push(published);
        panel.truth_series.push(truth_series);
        panel.truths.push(truth);
    }
    if spec.population.is_some() {
        panel.population = Some(population);
    }
    Ok(panel)
}
