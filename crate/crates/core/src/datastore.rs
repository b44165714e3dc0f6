//! Input panels: parsing, validation and forward filling of GDP per capita
//! and population data.
//!
//! GDP files are `country,year,value`. Population files are either
//! `country,year,total,pop15plus` or the age-pyramid form
//! `country,year,age,count`, where age `100` (or `100+`) means 100 and over.
//! Both are UTF-8, comma-delimited, LF or CRLF, with a mandatory header.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::csvio::{self, fmt_f64};
use crate::error::{Error, Result};

/// Age from which a person counts as economically active.
pub const ADULT_AGE: u32 = 15;

const GDP_HEADER: &str = "country,year,value";
const POP_HEADER: &str = "country,year,total,pop15plus";
const PYRAMID_HEADER: &str = "country,year,age,count";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PppBasis {
    /// 2002 US dollars at EKS parities.
    #[serde(rename = "EKS_2002")]
    Eks2002,
    /// 1990 US dollars at Geary-Khamis parities.
    #[serde(rename = "GK_1990")]
    Gk1990,
    #[serde(rename = "OTHER")]
    Other,
}

impl fmt::Display for PppBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PppBasis::Eks2002 => "EKS_2002",
            PppBasis::Gk1990 => "GK_1990",
            PppBasis::Other => "OTHER",
        })
    }
}

/// One country's contiguous run of strictly positive yearly levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualSeries {
    country: String,
    ppp_basis: PppBasis,
    start_year: i32,
    values: Vec<f64>,
}

impl AnnualSeries {
    pub fn new(
        country: impl Into<String>,
        ppp_basis: PppBasis,
        start_year: i32,
        values: Vec<f64>,
    ) -> Result<Self> {
        let country = country.into();
        if values.is_empty() {
            return Err(Error::InvalidSeries(format!("{country}: no values")));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonPositive {
                line: 0,
                country,
                year: start_year + i as i32,
                value: values[i],
            });
        }
        Ok(Self {
            country,
            ppp_basis,
            start_year,
            values,
        })
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn ppp_basis(&self) -> PppBasis {
        self.ppp_basis
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.values.len() as i32 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn years(&self) -> RangeInclusive<i32> {
        self.start_year..=self.end_year()
    }

    pub fn value_at(&self, year: i32) -> Option<f64> {
        let idx = usize::try_from(year.checked_sub(self.start_year)?).ok()?;
        self.values.get(idx).copied()
    }

    /// Same country, basis and years with new levels.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::LengthMismatch(self.values.len(), values.len()));
        }
        Self::new(
            self.country.clone(),
            self.ppp_basis,
            self.start_year,
            values,
        )
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| v * factor).collect())
    }
}

/// Year-keyed observations for one country as read from a file, before
/// gaps are filled. May violate the [`AnnualSeries`] invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub country: String,
    pub ppp_basis: PppBasis,
    pub observations: BTreeMap<i32, f64>,
}

impl RawSeries {
    pub fn new(country: impl Into<String>, ppp_basis: PppBasis) -> Self {
        Self {
            country: country.into(),
            ppp_basis,
            observations: BTreeMap::new(),
        }
    }

    pub fn first_year(&self) -> Option<i32> {
        self.observations.keys().next().copied()
    }

    pub fn last_year(&self) -> Option<i32> {
        self.observations.keys().next_back().copied()
    }

    /// Converts to a contiguous series; fails on the first gap or
    /// non-positive value.
    pub fn to_annual(&self) -> Result<AnnualSeries> {
        let start = self
            .first_year()
            .ok_or_else(|| Error::InvalidSeries(format!("{}: no observations", self.country)))?;
        let mut values = Vec::with_capacity(self.observations.len());
        for (expected, (&year, &value)) in (start..).zip(&self.observations) {
            if year != expected {
                return Err(Error::Gap {
                    country: self.country.clone(),
                    year: expected,
                });
            }
            values.push(value);
        }
        AnnualSeries::new(self.country.clone(), self.ppp_basis, start, values)
    }
}

impl From<&AnnualSeries> for RawSeries {
    fn from(series: &AnnualSeries) -> Self {
        Self {
            country: series.country.clone(),
            ppp_basis: series.ppp_basis,
            observations: series.years().zip(series.values.iter().copied()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationEntry {
    pub total: f64,
    pub pop15plus: f64,
}

impl PopulationEntry {
    pub fn ratio(&self) -> f64 {
        self.total / self.pop15plus
    }
}

/// Total and 15+ population per (country, year).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PopulationTable {
    entries: BTreeMap<(String, i32), PopulationEntry>,
}

impl PopulationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an entry after checking `total >= pop15plus > 0`.
    pub fn insert(&mut self, country: &str, year: i32, total: f64, pop15plus: f64) -> Result<()> {
        check_population(country, year, total, pop15plus)?;
        self.entries.insert(
            (country.to_string(), year),
            PopulationEntry { total, pop15plus },
        );
        Ok(())
    }

    pub fn get(&self, country: &str, year: i32) -> Option<&PopulationEntry> {
        self.entries.get(&(country.to_string(), year))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn countries(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|(c, _)| c.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i32, &PopulationEntry)> {
        self.entries.iter().map(|((c, y), e)| (c.as_str(), *y, e))
    }

    /// Sub-table holding one country's rows.
    pub fn for_country(&self, country: &str) -> PopulationTable {
        let entries = self
            .country_entries(country)
            .into_iter()
            .map(|(y, e)| ((country.to_string(), y), e))
            .collect();
        PopulationTable { entries }
    }

    /// Copies every row of `other` in, replacing existing keys.
    pub fn extend(&mut self, other: &PopulationTable) {
        self.entries
            .extend(other.entries.iter().map(|(k, e)| (k.clone(), *e)));
    }

    fn country_entries(&self, country: &str) -> BTreeMap<i32, PopulationEntry> {
        self.entries
            .iter()
            .filter(|((c, _), _)| c == country)
            .map(|((_, y), e)| (*y, *e))
            .collect()
    }

    /// Four-column CSV, sorted by country then year.
    pub fn to_csv(&self) -> String {
        let mut wtr = csvio::writer();
        wtr.write_record(POP_HEADER.split(',')).unwrap();
        for ((country, year), e) in &self.entries {
            wtr.write_record([
                country.clone(),
                year.to_string(),
                fmt_f64(e.total),
                fmt_f64(e.pop15plus),
            ])
            .unwrap();
        }
        csvio::finish(wtr)
    }
}

fn check_population(country: &str, year: i32, total: f64, adults: f64) -> Result<()> {
    if !(total.is_finite() && adults.is_finite() && adults > 0.0 && total >= adults) {
        return Err(Error::PopulationInvariant {
            country: country.to_string(),
            year,
            total,
            adults,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct YearRef {
    pub country: String,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FillRecord {
    pub country: String,
    pub year: i32,
    pub source_year: i32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub gaps: Vec<YearRef>,
    pub nonpositive: Vec<YearRef>,
    pub filled: Vec<FillRecord>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.gaps.is_empty() && self.nonpositive.is_empty()
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.gaps.extend(other.gaps);
        self.nonpositive.extend(other.nonpositive);
        self.filled.extend(other.filled);
    }

    /// One line per finding: `gap`, `nonpositive` or `filled`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.gaps {
            out.push_str(&format!("gap {} {}\n", g.country, g.year));
        }
        for n in &self.nonpositive {
            out.push_str(&format!("nonpositive {} {}\n", n.country, n.year));
        }
        for f in &self.filled {
            out.push_str(&format!(
                "filled {} {} from {}\n",
                f.country, f.year, f.source_year
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

/// Parses a `country,year,value` panel into one raw series per country,
/// ordered by country name.
pub fn parse_gdp_csv(text: &str, ppp_basis: PppBasis) -> Result<Vec<RawSeries>> {
    let mut rdr = csvio::reader(text);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::Empty("GDP file has no header")),
    };
    if csvio::header_of(&header) != GDP_HEADER {
        return Err(Error::BadHeader {
            found: csvio::header_of(&header),
            expected: GDP_HEADER.to_string(),
        });
    }

    let mut panel: BTreeMap<String, RawSeries> = BTreeMap::new();
    for rec in records {
        let rec = rec?;
        let line = csvio::line_of(&rec);
        if rec.len() != 3 {
            return Err(Error::Malformed {
                line,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let country = &rec[0];
        if country.is_empty() {
            return Err(Error::Malformed {
                line,
                message: "empty country".into(),
            });
        }
        let year = csvio::parse_year(&rec[1], line)?;
        let value = csvio::parse_number(&rec[2], "value", line)?;
        if value <= 0.0 {
            return Err(Error::NonPositive {
                line,
                country: country.to_string(),
                year,
                value,
            });
        }
        let series = panel
            .entry(country.to_string())
            .or_insert_with(|| RawSeries::new(country, ppp_basis));
        match series.observations.entry(year) {
            Entry::Occupied(_) => {
                return Err(Error::DuplicateKey {
                    line,
                    country: country.to_string(),
                    year,
                })
            }
            Entry::Vacant(slot) => {
                slot.insert(value);
            }
        }
    }
    Ok(panel.into_values().collect())
}

/// Emits series in the `country,year,value` format read by [`parse_gdp_csv`].
pub fn emit_gdp_csv<'a>(series: impl IntoIterator<Item = &'a AnnualSeries>) -> String {
    let mut wtr = csvio::writer();
    wtr.write_record(GDP_HEADER.split(',')).unwrap();
    for s in series {
        for (year, v) in s.years().zip(&s.values) {
            wtr.write_record([s.country.clone(), year.to_string(), fmt_f64(*v)])
                .unwrap();
        }
    }
    csvio::finish(wtr)
}

#[derive(Clone, Copy, PartialEq)]
enum PopSchema {
    Totals,
    Pyramid,
}

impl PopSchema {
    fn name(self) -> &'static str {
        match self {
            PopSchema::Totals => "total/pop15plus",
            PopSchema::Pyramid => "age pyramid",
        }
    }
}

fn parse_age(field: &str, line: u64) -> Result<u32> {
    field
        .strip_suffix('+')
        .unwrap_or(field)
        .parse::<u32>()
        .map_err(|_| Error::Malformed {
            line,
            message: format!("age {field:?} is not a non-negative integer"),
        })
}

/// Parses either population schema. Pyramid rows are reduced to
/// total = sum over all ages and 15+ = sum over ages >= 15.
pub fn parse_population_csv(text: &str) -> Result<PopulationTable> {
    let mut rdr = csvio::reader(text);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::Empty("population file has no header")),
    };
    let schema = match csvio::header_of(&header).as_str() {
        POP_HEADER => PopSchema::Totals,
        PYRAMID_HEADER => PopSchema::Pyramid,
        other => {
            return Err(Error::BadHeader {
                found: other.to_string(),
                expected: format!("{POP_HEADER:?} or {PYRAMID_HEADER:?}"),
            })
        }
    };

    let mut table = PopulationTable::new();
    let mut pyramid: BTreeMap<(String, i32), (f64, f64, BTreeSet<u32>)> = BTreeMap::new();

    for rec in records {
        let rec = rec?;
        let line = csvio::line_of(&rec);
        let joined = csvio::header_of(&rec);
        if joined == POP_HEADER || joined == PYRAMID_HEADER {
            return Err(Error::MixedSchema {
                line,
                schema: schema.name(),
            });
        }
        if rec.len() != 4 {
            return Err(Error::Malformed {
                line,
                message: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        let country = rec[0].to_string();
        let year = csvio::parse_year(&rec[1], line)?;
        match schema {
            PopSchema::Totals => {
                if rec[2].ends_with('+') {
                    return Err(Error::MixedSchema {
                        line,
                        schema: schema.name(),
                    });
                }
                let total = csvio::parse_number(&rec[2], "total", line)?;
                let adults = csvio::parse_number(&rec[3], "pop15plus", line)?;
                for v in [total, adults] {
                    if v < 0.0 {
                        return Err(Error::NegativeCount { line, value: v });
                    }
                }
                if table.get(&country, year).is_some() {
                    return Err(Error::DuplicateKey {
                        line,
                        country,
                        year,
                    });
                }
                table.insert(&country, year, total, adults)?;
            }
            PopSchema::Pyramid => {
                let age = parse_age(&rec[2], line)?;
                let count = csvio::parse_number(&rec[3], "count", line)?;
                if count < 0.0 {
                    return Err(Error::NegativeCount { line, value: count });
                }
                let cell = pyramid
                    .entry((country.clone(), year))
                    .or_insert_with(|| (0.0, 0.0, BTreeSet::new()));
                if !cell.2.insert(age) {
                    return Err(Error::DuplicateKey {
                        line,
                        country,
                        year,
                    });
                }
                cell.0 += count;
                if age >= ADULT_AGE {
                    cell.1 += count;
                }
            }
        }
    }

    for ((country, year), (total, adults, _)) in pyramid {
        table.insert(&country, year, total, adults)?;
    }
    Ok(table)
}

/// Forward fill over `years`: each missing year takes the value of the
/// nearest later observed year. Observations are never altered.
fn forward_fill<V: Clone>(
    country: &str,
    observed: &BTreeMap<i32, V>,
    years: &RangeInclusive<i32>,
) -> Result<(BTreeMap<i32, V>, Vec<FillRecord>)> {
    let mut out = observed.clone();
    let mut filled = Vec::new();
    for year in years.clone() {
        if observed.contains_key(&year) {
            continue;
        }
        let source = if year < *years.end() {
            observed
                .range(year + 1..=*years.end())
                .next()
                .map(|(y, v)| (*y, v.clone()))
        } else {
            None
        };
        match source {
            Some((source_year, v)) => {
                out.insert(year, v);
                filled.push(FillRecord {
                    country: country.to_string(),
                    year,
                    source_year,
                });
            }
            None => {
                return Err(Error::NoLaterObservation {
                    country: country.to_string(),
                    year,
                })
            }
        }
    }
    Ok((out, filled))
}

/// Repair of missing years from the closest later year.
pub trait FillMissing: Sized {
    fn fill_missing(&self, years: RangeInclusive<i32>) -> Result<(Self, ValidationReport)>;
}

impl FillMissing for RawSeries {
    fn fill_missing(&self, years: RangeInclusive<i32>) -> Result<(Self, ValidationReport)> {
        let (observations, filled) = forward_fill(&self.country, &self.observations, &years)?;
        let repaired = RawSeries {
            country: self.country.clone(),
            ppp_basis: self.ppp_basis,
            observations,
        };
        Ok((
            repaired,
            ValidationReport {
                filled,
                ..Default::default()
            },
        ))
    }
}

impl FillMissing for PopulationTable {
    /// Fills every country present in the table over the same year range.
    fn fill_missing(&self, years: RangeInclusive<i32>) -> Result<(Self, ValidationReport)> {
        let mut repaired = PopulationTable::new();
        let mut report = ValidationReport::default();
        for country in self.countries() {
            let (entries, filled) = forward_fill(country, &self.country_entries(country), &years)?;
            for (year, e) in entries {
                repaired.entries.insert((country.to_string(), year), e);
            }
            report.filled.extend(filled);
        }
        Ok((repaired, report))
    }
}

pub fn fill_missing<T: FillMissing>(
    data: &T,
    years: RangeInclusive<i32>,
) -> Result<(T, ValidationReport)> {
    data.fill_missing(years)
}

/// Reports interior gaps and non-positive values. Diagnostic only.
pub fn validate_series(series: &RawSeries) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let (Some(first), Some(last)) = (series.first_year(), series.last_year()) {
        for year in first..=last {
            match series.observations.get(&year) {
                None => report.gaps.push(YearRef {
                    country: series.country.clone(),
                    year,
                }),
                Some(v) if v.is_nan() || *v <= 0.0 => report.nonpositive.push(YearRef {
                    country: series.country.clone(),
                    year,
                }),
                Some(_) => {}
            }
        }
    }
    report
}
