//! Annual increments, mean increments and the increment-on-level trend.
//!
//! Under a constant-increment trend every year adds the same absolute amount
//! `A`, so the mean annual increment estimates `A` and an OLS line of
//! increment against attained level should be flat. The attained level for
//! the increment `G(t) - G(t-1)` is the prior-year level `G(t-1)`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::csvio::{self, fmt_f64, fmt_opt, ABSENT};
use crate::datastore::{AnnualSeries, PppBasis};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementPair {
    /// Year of the later level `t`.
    pub year: i32,
    /// `G(t-1)`
    pub level: f64,
    /// `G(t) - G(t-1)`
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementSeries {
    pub country: String,
    pub ppp_basis: PppBasis,
    pub pairs: Vec<IncrementPair>,
}

impl IncrementSeries {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.increment)
    }

    pub fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.level)
    }

    /// `country,year,level,increment,ppp_basis`
    pub fn to_csv(&self) -> String {
        increments_csv(std::slice::from_ref(self))
    }
}

pub fn increments_csv(all: &[IncrementSeries]) -> String {
    let mut wtr = csvio::writer();
    wtr.write_record(["country", "year", "level", "increment", "ppp_basis"])
        .unwrap();
    for s in all {
        for p in &s.pairs {
            wtr.write_record([
                s.country.clone(),
                p.year.to_string(),
                fmt_f64(p.level),
                fmt_f64(p.increment),
                s.ppp_basis.to_string(),
            ])
            .unwrap();
        }
    }
    csvio::finish(wtr)
}

pub fn increments(series: &AnnualSeries) -> Result<IncrementSeries> {
    let values = series.values();
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    let pairs = values
        .windows(2)
        .zip(series.start_year() + 1..)
        .map(|(w, year)| IncrementPair {
            year,
            level: w[0],
            increment: w[1] - w[0],
        })
        .collect();
    Ok(IncrementSeries {
        country: series.country().to_string(),
        ppp_basis: series.ppp_basis(),
        pairs,
    })
}

pub fn mean_increment(inc: &IncrementSeries) -> Result<f64> {
    if inc.is_empty() {
        return Err(Error::Empty("increment series"));
    }
    Ok(inc.increments().sum::<f64>() / inc.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendFit {
    pub mean_increment: f64,
    pub intercept: f64,
    /// Increment units per level unit; dimensionless.
    pub slope: f64,
    pub n: usize,
}

impl TrendFit {
    pub fn predict(&self, level: f64) -> f64 {
        self.intercept + self.slope * level
    }
}

/// OLS of increment on attained level.
pub fn linear_trend(inc: &IncrementSeries) -> Result<TrendFit> {
    let n = inc.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean_x = inc.levels().sum::<f64>() / nf;
    let mean_y = inc.increments().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for p in &inc.pairs {
        let dx = p.level - mean_x;
        sxx += dx * dx;
        sxy += dx * (p.increment - mean_y);
    }
    if sxx == 0.0 || !sxx.is_finite() {
        return Err(Error::DegenerateRegression);
    }
    let slope = sxy / sxx;
    Ok(TrendFit {
        mean_increment: mean_y,
        intercept: mean_y - slope * mean_x,
        slope,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    pub year: i32,
    /// `increment - mean`, signed.
    pub deviation: f64,
}

/// Largest |increment - mean|; ties go to the earliest year.
pub fn max_deviation(inc: &IncrementSeries, mean: f64) -> Result<Deviation> {
    let mut best: Option<Deviation> = None;
    for p in &inc.pairs {
        let d = p.increment - mean;
        if best.is_none_or(|b| d.abs() > b.deviation.abs()) {
            best = Some(Deviation {
                year: p.year,
                deviation: d,
            });
        }
    }
    best.ok_or(Error::Empty("increment series"))
}

/// Divides every value by the reference country's value; the reference maps
/// to exactly 1.
pub fn normalize_to_reference(
    means: &BTreeMap<String, f64>,
    reference: &str,
) -> Result<BTreeMap<String, f64>> {
    let r = *means
        .get(reference)
        .ok_or_else(|| Error::UnknownCountry(reference.to_string()))?;
    if r == 0.0 || !r.is_finite() {
        return Err(Error::ZeroReference(reference.to_string()));
    }
    Ok(means
        .iter()
        .map(|(c, v)| {
            let norm = if c == reference { 1.0 } else { v / r };
            (c.clone(), norm)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Adjustment {
    pub mean: f64,
    pub factor: f64,
    /// Unrounded `mean * factor`.
    pub product: f64,
    /// `product` rounded to whole currency units.
    pub rounded: f64,
}

impl Adjustment {
    /// Whether a separately quoted product agrees with this one after
    /// rounding to whole units.
    pub fn agrees_with(&self, stated: f64) -> bool {
        self.rounded == stated.round()
    }
}

/// Scales a mean increment by a specific-age population factor.
pub fn specific_age_adjustment(mean: f64, factor: f64) -> Result<Adjustment> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "adjustment factor",
            value: factor,
        });
    }
    let product = mean * factor;
    Ok(Adjustment {
        mean,
        factor,
        product,
        rounded: product.round(),
    })
}

/// Inputs for one country's row: EKS original is required, the rest
/// optional.
#[derive(Debug, Clone)]
pub struct CountryPanel {
    pub country: String,
    pub eks_original: AnnualSeries,
    pub eks_corrected: Option<AnnualSeries>,
    pub gk_original: Option<AnnualSeries>,
    pub gk_corrected: Option<AnnualSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountrySummaryRow {
    pub country: String,
    pub mean_original: Option<f64>,
    pub mean_corrected: Option<f64>,
    pub trend_original: Option<f64>,
    pub trend_corrected: Option<f64>,
    pub mean_original_gk: Option<f64>,
    pub mean_corrected_gk: Option<f64>,
}

const TABLE_COLUMNS: [&str; 7] = [
    "country",
    "mean_original",
    "mean_corrected",
    "trend_original",
    "trend_corrected",
    "mean_original_gk",
    "mean_corrected_gk",
];

fn series_mean(s: Option<&AnnualSeries>) -> Result<Option<f64>> {
    match s {
        None => Ok(None),
        Some(s) => Ok(Some(mean_increment(&increments(s)?)?)),
    }
}

fn series_slope(s: Option<&AnnualSeries>) -> Result<Option<f64>> {
    match s {
        None => Ok(None),
        Some(s) => match linear_trend(&increments(s)?) {
            Ok(fit) => Ok(Some(fit.slope)),
            Err(Error::DegenerateRegression | Error::TooShort { .. }) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

pub fn country_row(panel: &CountryPanel) -> Result<CountrySummaryRow> {
    Ok(CountrySummaryRow {
        country: panel.country.clone(),
        mean_original: series_mean(Some(&panel.eks_original))?,
        mean_corrected: series_mean(panel.eks_corrected.as_ref())?,
        trend_original: series_slope(Some(&panel.eks_original))?,
        trend_corrected: series_slope(panel.eks_corrected.as_ref())?,
        mean_original_gk: series_mean(panel.gk_original.as_ref())?,
        mean_corrected_gk: series_mean(panel.gk_corrected.as_ref())?,
    })
}

/// One summary row per country, alphabetical.
pub fn country_table(panels: &[CountryPanel]) -> Result<Vec<CountrySummaryRow>> {
    let mut rows = panels.iter().map(country_row).collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.country.cmp(&b.country));
    Ok(rows)
}

impl CountrySummaryRow {
    fn cells(&self) -> [Option<f64>; 6] {
        [
            self.mean_original,
            self.mean_corrected,
            self.trend_original,
            self.trend_corrected,
            self.mean_original_gk,
            self.mean_corrected_gk,
        ]
    }
}

/// Full-precision CSV; absent cells are `NA`.
pub fn table_csv(rows: &[CountrySummaryRow]) -> String {
    let mut wtr = csvio::writer();
    wtr.write_record(TABLE_COLUMNS).unwrap();
    for row in rows {
        let mut rec = vec![row.country.clone()];
        rec.extend(row.cells().iter().map(|c| fmt_opt(*c)));
        wtr.write_record(rec).unwrap();
    }
    csvio::finish(wtr)
}

/// Aligned text: means to whole units, slopes to four decimals.
pub fn table_text(rows: &[CountrySummaryRow]) -> String {
    let mut cells: Vec<Vec<String>> = vec![TABLE_COLUMNS.iter().map(|s| s.to_string()).collect()];
    for row in rows {
        let mut line = vec![row.country.clone()];
        for (i, c) in row.cells().iter().enumerate() {
            let is_slope = i == 2 || i == 3;
            line.push(match c {
                None => ABSENT.to_string(),
                Some(v) if is_slope => format!("{v:.4}"),
                Some(v) => format!("{v:.0}"),
            });
        }
        cells.push(line);
    }
    let widths: Vec<usize> = (0..TABLE_COLUMNS.len())
        .map(|j| {
            cells
                .iter()
                .map(|r| r[j].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for line in &cells {
        let mut parts = Vec::with_capacity(line.len());
        for (j, cell) in line.iter().enumerate() {
            if j == 0 {
                parts.push(format!("{cell:<w$}", w = widths[j]));
            } else {
                parts.push(format!("{cell:>w$}", w = widths[j]));
            }
        }
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    }
    out
}
