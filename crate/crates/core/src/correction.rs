//! Population-ratio correction and PPP basis comparison.
//!
//! Published per-capita figures divide by the whole population; the
//! corrected figure divides by the population aged 15 and over instead,
//! i.e. multiplies the published value by `total / pop15plus`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::csvio::{self, fmt_f64};
use crate::datastore::{AnnualSeries, PopulationTable};
use crate::error::{Error, Result};

pub fn population_ratio(pop: &PopulationTable, country: &str, year: i32) -> Result<f64> {
    pop.get(country, year)
        .map(|e| e.ratio())
        .ok_or_else(|| Error::MissingPopulation {
            country: country.to_string(),
            year,
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedSeries {
    pub base: AnnualSeries,
    pub ratios: Vec<f64>,
    pub corrected_values: Vec<f64>,
}

impl CorrectedSeries {
    /// The corrected levels as a series of their own.
    pub fn corrected(&self) -> AnnualSeries {
        self.base
            .with_values(self.corrected_values.clone())
            .expect("ratios >= 1 keep levels positive")
    }

    /// `country,year,original,ratio,corrected,ppp_basis`
    pub fn to_csv(&self) -> String {
        corrections_csv(std::slice::from_ref(self))
    }
}

/// Several corrected series in one `country,year,original,ratio,corrected,ppp_basis` table.
pub fn corrections_csv(all: &[CorrectedSeries]) -> String {
    let mut wtr = csvio::writer();
    wtr.write_record([
        "country",
        "year",
        "original",
        "ratio",
        "corrected",
        "ppp_basis",
    ])
    .unwrap();
    for c in all {
        let basis = c.base.ppp_basis().to_string();
        for (i, year) in c.base.years().enumerate() {
            wtr.write_record([
                c.base.country().to_string(),
                year.to_string(),
                fmt_f64(c.base.values()[i]),
                fmt_f64(c.ratios[i]),
                fmt_f64(c.corrected_values[i]),
                basis.clone(),
            ])
            .unwrap();
        }
    }
    csvio::finish(wtr)
}

/// Multiplies each year's level by that year's population ratio.
pub fn correct_series(gdp: &AnnualSeries, pop: &PopulationTable) -> Result<CorrectedSeries> {
    let ratios = gdp
        .years()
        .map(|year| population_ratio(pop, gdp.country(), year))
        .collect::<Result<Vec<_>>>()?;
    let corrected_values = gdp
        .values()
        .iter()
        .zip(&ratios)
        .map(|(v, r)| v * r)
        .collect();
    Ok(CorrectedSeries {
        base: gdp.clone(),
        ratios,
        corrected_values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PppRow {
    pub country: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub normalized_a: f64,
    pub normalized_b: f64,
    /// `normalized_a / normalized_b - 1`
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PppComparison {
    pub reference: String,
    pub rows: Vec<PppRow>,
}

impl PppComparison {
    pub fn row(&self, country: &str) -> Option<&PppRow> {
        self.rows.iter().find(|r| r.country == country)
    }

    /// The `count` countries with the largest |relative difference|,
    /// largest first.
    pub fn extremes(&self, count: usize) -> Vec<&PppRow> {
        let mut rows: Vec<&PppRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            b.relative_difference
                .abs()
                .total_cmp(&a.relative_difference.abs())
                .then_with(|| a.country.cmp(&b.country))
        });
        rows.truncate(count);
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csvio::writer();
        wtr.write_record([
            "country",
            "mean_a",
            "mean_b",
            "normalized_a",
            "normalized_b",
            "relative_difference",
        ])
        .unwrap();
        for r in &self.rows {
            wtr.write_record([
                r.country.clone(),
                fmt_f64(r.mean_a),
                fmt_f64(r.mean_b),
                fmt_f64(r.normalized_a),
                fmt_f64(r.normalized_b),
                fmt_f64(r.relative_difference),
            ])
            .unwrap();
        }
        csvio::finish(wtr)
    }
}

/// Compares per-country mean increments on two PPP bases after normalizing
/// each basis to the reference country.
pub fn ppp_delta(
    means_a: &BTreeMap<String, f64>,
    means_b: &BTreeMap<String, f64>,
    reference: &str,
) -> Result<PppComparison> {
    if means_a.keys().ne(means_b.keys()) {
        let only_a: Vec<_> = means_a
            .keys()
            .filter(|k| !means_b.contains_key(*k))
            .collect();
        let only_b: Vec<_> = means_b
            .keys()
            .filter(|k| !means_a.contains_key(*k))
            .collect();
        return Err(Error::CountryMismatch(format!(
            "only in first: {only_a:?}; only in second: {only_b:?}"
        )));
    }
    let norm_a = crate::trendlab::normalize_to_reference(means_a, reference)?;
    let norm_b = crate::trendlab::normalize_to_reference(means_b, reference)?;
    let rows = means_a
        .iter()
        .map(|(country, &mean_a)| {
            let normalized_a = norm_a[country];
            let normalized_b = norm_b[country];
            PppRow {
                country: country.clone(),
                mean_a,
                mean_b: means_b[country],
                normalized_a,
                normalized_b,
                relative_difference: normalized_a / normalized_b - 1.0,
            }
        })
        .collect();
    Ok(PppComparison {
        reference: reference.to_string(),
        rows,
    })
}
