//! Glue from input files to analysis-ready panels.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use crate::correction::correct_series;
use crate::datastore::{
    parse_gdp_csv, parse_population_csv, validate_series, AnnualSeries, FillMissing,
    PopulationTable, PppBasis, ValidationReport,
};
use crate::error::{Error, Result};
use crate::trendlab::{increments, CountryPanel, IncrementSeries};

/// Parses a GDP file, validates and forward-fills each series and returns
/// the contiguous series in country order.
///
/// With `years`, every series is filled over that range; otherwise over its
/// own first..last span.
pub fn load_gdp(
    text: &str,
    basis: PppBasis,
    years: Option<RangeInclusive<i32>>,
) -> Result<(Vec<AnnualSeries>, ValidationReport)> {
    let mut report = ValidationReport::default();
    let mut out = Vec::new();
    for raw in parse_gdp_csv(text, basis)? {
        let diag = validate_series(&raw);
        report.nonpositive.extend(diag.nonpositive);
        let span = match &years {
            Some(r) => r.clone(),
            None => raw.first_year().unwrap()..=raw.last_year().unwrap(),
        };
        let (filled, fill_report) = raw.fill_missing(span.clone())?;
        report.merge(fill_report);
        let mut filled = filled;
        filled.observations.retain(|y, _| span.contains(y));
        out.push(filled.to_annual()?);
    }
    Ok((out, report))
}

/// Year span of each country across the given panels.
pub fn country_spans<'a>(
    panels: impl IntoIterator<Item = &'a AnnualSeries>,
) -> BTreeMap<String, RangeInclusive<i32>> {
    let mut spans: BTreeMap<String, RangeInclusive<i32>> = BTreeMap::new();
    for s in panels {
        spans
            .entry(s.country().to_string())
            .and_modify(|r| *r = (*r.start()).min(s.start_year())..=(*r.end()).max(s.end_year()))
            .or_insert_with(|| s.years());
    }
    spans
}

/// Parses a population file and fills each country over the years its GDP
/// series need. Countries without GDP data are kept as read.
pub fn load_population(
    text: &str,
    spans: &BTreeMap<String, RangeInclusive<i32>>,
) -> Result<(PopulationTable, ValidationReport)> {
    let table = parse_population_csv(text)?;
    let mut report = ValidationReport::default();
    let mut out = PopulationTable::new();
    for country in table.countries() {
        let sub = table.for_country(country);
        let sub = match spans.get(country) {
            Some(span) => {
                let (filled, r) = sub.fill_missing(span.clone())?;
                report.merge(r);
                filled
            }
            None => sub,
        };
        out.extend(&sub);
    }
    Ok((out, report))
}

/// Corrected copies of every series the population table covers.
pub fn corrected_panel(
    series: &[AnnualSeries],
    pop: &PopulationTable,
) -> Result<BTreeMap<String, AnnualSeries>> {
    let mut out = BTreeMap::new();
    for s in series {
        match correct_series(s, pop) {
            Ok(c) => {
                out.insert(s.country().to_string(), c.corrected());
            }
            Err(Error::MissingPopulation { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Rows for the cross-country table: EKS original drives the country list;
/// other variants are attached where available.
pub fn country_panels(
    eks: &[AnnualSeries],
    gk: Option<&[AnnualSeries]>,
    pop: Option<&PopulationTable>,
) -> Result<Vec<CountryPanel>> {
    let eks_corrected = match pop {
        Some(p) => corrected_panel(eks, p)?,
        None => BTreeMap::new(),
    };
    let gk_by_country: BTreeMap<&str, &AnnualSeries> =
        gk.unwrap_or(&[]).iter().map(|s| (s.country(), s)).collect();
    let gk_corrected = match (pop, gk) {
        (Some(p), Some(g)) => corrected_panel(g, p)?,
        _ => BTreeMap::new(),
    };
    Ok(eks
        .iter()
        .map(|s| CountryPanel {
            country: s.country().to_string(),
            eks_original: s.clone(),
            eks_corrected: eks_corrected.get(s.country()).cloned(),
            gk_original: gk_by_country.get(s.country()).map(|g| (*g).clone()),
            gk_corrected: gk_corrected.get(s.country()).cloned(),
        })
        .collect())
}

pub fn increments_all(series: &[AnnualSeries]) -> Result<Vec<IncrementSeries>> {
    series.iter().map(increments).collect()
}

pub fn find<'a>(series: &'a [AnnualSeries], country: &str) -> Result<&'a AnnualSeries> {
    series
        .iter()
        .find(|s| s.country() == country)
        .ok_or_else(|| Error::UnknownCountry(country.to_string()))
}
