use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use gdp_trend::correction::{correct_series, corrections_csv, ppp_delta};
use gdp_trend::csvio::{self, fmt_f64, fmt_opt};
use gdp_trend::datastore::{
    emit_gdp_csv, parse_gdp_csv, parse_population_csv, validate_series, FillMissing,
};
use gdp_trend::fluctuations::{pool_residuals, subset_pool, summarize, Centering};
use gdp_trend::growthmodel::{compare_increments, comparison_csv, ratio_csv};
use gdp_trend::pipeline::{
    corrected_panel, country_panels, country_spans, find, increments_all, load_gdp, load_population,
};
use gdp_trend::synthlab::{simulate as run_simulation, SimulationSpec};
use gdp_trend::trendlab::{
    country_table, increments_csv, mean_increment, specific_age_adjustment, table_csv, table_text,
};
use gdp_trend::{AnnualSeries, PopulationTable, PppBasis, ValidationReport};

use crate::config::RunConfig;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_json(out: &Path, name: &str, value: &Value) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(out, name, &text)
}

fn warn(message: impl std::fmt::Display) {
    eprintln!("warning: {message}");
}

fn gdp_inputs(cfg: &RunConfig) -> Vec<(&Path, PppBasis)> {
    let mut inputs = Vec::new();
    if let Some(p) = &cfg.gdp_eks {
        inputs.push((p.as_path(), PppBasis::Eks2002));
    }
    if let Some(p) = &cfg.gdp_gk {
        inputs.push((p.as_path(), PppBasis::Gk1990));
    }
    inputs
}

struct Panels {
    eks: Option<Vec<AnnualSeries>>,
    gk: Option<Vec<AnnualSeries>>,
    population: Option<PopulationTable>,
}

fn load_panels(cfg: &RunConfig) -> Result<Panels> {
    let load = |path: &Option<PathBuf>, basis| -> Result<Option<Vec<AnnualSeries>>> {
        path.as_ref()
            .map(|p| {
                let (series, report) = load_gdp(&read(p)?, basis, cfg.years.clone())
                    .with_context(|| format!("loading {}", p.display()))?;
                for f in &report.filled {
                    warn(format_args!(
                        "{}: filled {} {} from {}",
                        p.display(),
                        f.country,
                        f.year,
                        f.source_year
                    ));
                }
                Ok(series)
            })
            .transpose()
    };
    let eks = load(&cfg.gdp_eks, PppBasis::Eks2002)?;
    let gk = load(&cfg.gdp_gk, PppBasis::Gk1990)?;
    let population = match &cfg.population {
        Some(p) => {
            let spans = country_spans(eks.iter().chain(gk.iter()).flatten());
            let (table, _) = load_population(&read(p)?, &spans)
                .with_context(|| format!("loading {}", p.display()))?;
            Some(table)
        }
        None => None,
    };
    Ok(Panels {
        eks,
        gk,
        population,
    })
}

fn require<'a>(panel: &'a Option<Vec<AnnualSeries>>, flag: &str) -> Result<&'a [AnnualSeries]> {
    match panel {
        Some(p) => Ok(p),
        None => bail!("this command needs {flag}"),
    }
}

/// Parses, fills and checks every input; returns whether it was clean.
pub fn validate(cfg: &RunConfig) -> Result<bool> {
    if cfg.gdp_eks.is_none() && cfg.gdp_gk.is_none() && cfg.population.is_none() {
        bail!("nothing to validate: give --gdp-eks, --gdp-gk or --population");
    }
    let mut report = ValidationReport::default();
    let mut errors: Vec<String> = Vec::new();
    let mut spans: BTreeMap<String, std::ops::RangeInclusive<i32>> = BTreeMap::new();

    for (path, basis) in gdp_inputs(cfg) {
        let raws = match parse_gdp_csv(&read(path)?, basis) {
            Ok(r) => r,
            Err(e) => {
                errors.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        for raw in raws {
            let diag = validate_series(&raw);
            report.gaps.extend(diag.gaps);
            report.nonpositive.extend(diag.nonpositive);
            let span = cfg
                .years
                .clone()
                .unwrap_or(raw.first_year().unwrap()..=raw.last_year().unwrap());
            match raw.fill_missing(span.clone()) {
                Ok((_, filled)) => report.merge(filled),
                Err(e) => errors.push(format!("{}: {e}", path.display())),
            }
            spans
                .entry(raw.country.clone())
                .and_modify(|r| *r = (*r.start()).min(*span.start())..=(*r.end()).max(*span.end()))
                .or_insert(span);
        }
    }

    if let Some(path) = &cfg.population {
        match parse_population_csv(&read(path)?) {
            Err(e) => errors.push(format!("{}: {e}", path.display())),
            Ok(table) => {
                for (country, span) in &spans {
                    let sub = table.for_country(country);
                    if sub.is_empty() {
                        warn(format_args!(
                            "{}: no population rows for {country}",
                            path.display()
                        ));
                        continue;
                    }
                    match sub.fill_missing(span.clone()) {
                        Ok((_, filled)) => report.merge(filled),
                        Err(e) => errors.push(format!("{}: {e}", path.display())),
                    }
                }
            }
        }
    }

    let mut text = report.to_text();
    for e in &errors {
        text.push_str(&format!("error {e}\n"));
        eprintln!("error: {e}");
    }
    let mut json = serde_json::to_value(&report)?;
    json["errors"] = json!(errors);
    json["clean"] = json!(errors.is_empty());
    write(&cfg.out, "validation.txt", &text)?;
    write_json(&cfg.out, "validation.json", &json)?;
    print!("{text}");
    Ok(errors.is_empty())
}

pub fn table1(cfg: &RunConfig) -> Result<()> {
    let panels = load_panels(cfg)?;
    let eks = require(&panels.eks, "--gdp-eks")?;
    let pop = panels.population.as_ref();
    if !eks.iter().any(|s| s.country() == cfg.reference) {
        bail!(
            "reference country {:?} is not in the EKS panel",
            cfg.reference
        );
    }

    let rows = country_table(&country_panels(eks, panels.gk.as_deref(), pop)?)?;
    let text = table_text(&rows);
    write(&cfg.out, "table1.csv", &table_csv(&rows))?;
    write(&cfg.out, "table1.txt", &text)?;
    print!("{text}");

    write(
        &cfg.out,
        "increments_eks_original.csv",
        &increments_csv(&increments_all(eks)?),
    )?;
    if let Some(gk) = &panels.gk {
        write(
            &cfg.out,
            "increments_gk_original.csv",
            &increments_csv(&increments_all(gk)?),
        )?;
        ppp_table(cfg, eks, gk)?;
    }
    if let Some(pop) = pop {
        for (label, panel) in [("eks", Some(eks)), ("gk", panels.gk.as_deref())] {
            let Some(panel) = panel else { continue };
            let mut corrected = Vec::new();
            for s in panel {
                match correct_series(s, pop) {
                    Ok(c) => corrected.push(c),
                    Err(e) => warn(format_args!("{}: not corrected: {e}", s.country())),
                }
            }
            let series: Vec<AnnualSeries> = corrected.iter().map(|c| c.corrected()).collect();
            write(
                &cfg.out,
                &format!("corrections_{label}.csv"),
                &corrections_csv(&corrected),
            )?;
            write(
                &cfg.out,
                &format!("increments_{label}_corrected.csv"),
                &increments_csv(&increments_all(&series)?),
            )?;
        }
    }
    adjustments(cfg, &rows)
}

fn ppp_table(cfg: &RunConfig, eks: &[AnnualSeries], gk: &[AnnualSeries]) -> Result<()> {
    let means = |panel: &[AnnualSeries]| -> Result<BTreeMap<String, f64>> {
        increments_all(panel)?
            .iter()
            .map(|inc| Ok((inc.country.clone(), mean_increment(inc)?)))
            .collect()
    };
    let (mut a, mut b) = (means(eks)?, means(gk)?);
    a.retain(|c, _| b.contains_key(c));
    b.retain(|c, _| a.contains_key(c));
    if !a.contains_key(&cfg.reference) {
        warn(format_args!(
            "reference {:?} missing from the GK panel; skipping PPP comparison",
            cfg.reference
        ));
        return Ok(());
    }
    let cmp = ppp_delta(&a, &b, &cfg.reference)?;
    write(&cfg.out, "ppp_comparison.csv", &cmp.to_csv())?;
    Ok(())
}

/// Scales corrected EKS means by the configured specific-age factors.
fn adjustments(cfg: &RunConfig, rows: &[gdp_trend::trendlab::CountrySummaryRow]) -> Result<()> {
    let mut lines: Vec<Vec<String>> = Vec::new();
    for (country, &factor) in &cfg.adjustments {
        let Some(mean) = rows
            .iter()
            .find(|r| &r.country == country)
            .and_then(|r| r.mean_corrected)
        else {
            continue;
        };
        let adj = specific_age_adjustment(mean, factor)?;
        let stated = cfg.stated.get(country);
        let consistent = stated.map(|s| adj.agrees_with(*s));
        if consistent == Some(false) {
            warn(format_args!(
                "{country}: stated adjusted value {} disagrees with {} x {} = {}",
                stated.unwrap(),
                mean,
                factor,
                adj.product
            ));
        }
        lines.push(vec![
            country.clone(),
            fmt_f64(adj.mean),
            fmt_f64(adj.factor),
            fmt_f64(adj.product),
            fmt_f64(adj.rounded),
            fmt_opt(stated.copied()),
            consistent.map_or(csvio::ABSENT.to_string(), |c| c.to_string()),
            PppBasis::Eks2002.to_string(),
        ]);
    }
    let header = [
        "country",
        "mean",
        "factor",
        "product",
        "rounded",
        "stated",
        "consistent",
        "ppp_basis",
    ];
    write(&cfg.out, "adjustments.csv", &csvio::table(&header, lines))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Variant {
    #[value(name = "EKS_ORIGINAL")]
    EksOriginal,
    #[value(name = "EKS_CORRECTED")]
    EksCorrected,
    #[value(name = "GK_ORIGINAL")]
    GkOriginal,
    #[value(name = "SUBSET")]
    Subset,
}

impl Variant {
    fn label(self) -> &'static str {
        match self {
            Variant::EksOriginal => "EKS_ORIGINAL",
            Variant::EksCorrected => "EKS_CORRECTED",
            Variant::GkOriginal => "GK_ORIGINAL",
            Variant::Subset => "SUBSET",
        }
    }
}

pub fn dist(cfg: &RunConfig, variant: Variant) -> Result<()> {
    let panels = load_panels(cfg)?;
    let (series, basis): (Vec<AnnualSeries>, PppBasis) = match variant {
        Variant::EksOriginal | Variant::Subset => (
            require(&panels.eks, "--gdp-eks")?.to_vec(),
            PppBasis::Eks2002,
        ),
        Variant::GkOriginal => (require(&panels.gk, "--gdp-gk")?.to_vec(), PppBasis::Gk1990),
        Variant::EksCorrected => {
            let eks = require(&panels.eks, "--gdp-eks")?;
            let Some(pop) = &panels.population else {
                bail!("EKS_CORRECTED needs --population");
            };
            let corrected = corrected_panel(eks, pop)?;
            for s in eks.iter().filter(|s| !corrected.contains_key(s.country())) {
                warn(format_args!(
                    "{}: no population data, left out",
                    s.country()
                ));
            }
            (corrected.into_values().collect(), PppBasis::Eks2002)
        }
    };
    let inc = increments_all(&series)?;
    let mut extra = json!({});
    let pool = if variant == Variant::Subset {
        let subset = subset_pool(&inc, &cfg.exclude, Centering::Uncentered)?;
        extra = json!({ "excluded": subset.excluded, "subset_mean": subset.mean });
        subset.pool
    } else {
        pool_residuals(&inc, Centering::PerCountryMeanSubtracted)?
    };
    let summary = summarize(&pool, cfg.bin_width, cfg.tail_k)?;

    let mut value = serde_json::to_value(&summary)?;
    value["variant"] = json!(variant.label());
    value["ppp_basis"] = json!(basis);
    if let Value::Object(more) = extra {
        value.as_object_mut().unwrap().extend(more);
    }
    let stem = format!("dist_{}", variant.label().to_lowercase());
    write(&cfg.out, &format!("{stem}.csv"), &summary.to_csv())?;
    write_json(&cfg.out, &format!("{stem}.json"), &value)?;
    println!(
        "{}: n={} mu={} sigma={} chi2={} dof={} p={}",
        variant.label(),
        summary.n,
        summary.fit_mu,
        summary.fit_sigma,
        summary.chi_square,
        summary.dof,
        summary.p_value
    );
    Ok(())
}

/// Runs on the GK panel when given (the only basis covering most
/// developing economies), otherwise on EKS.
pub fn compare(cfg: &RunConfig, targets: &[String]) -> Result<()> {
    if targets.is_empty() {
        bail!("compare needs at least one --targets country");
    }
    let panels = load_panels(cfg)?;
    let panel = match (&panels.gk, &panels.eks) {
        (Some(gk), _) => gk,
        (None, Some(eks)) => eks,
        (None, None) => bail!("compare needs --gdp-gk or --gdp-eks"),
    };
    let reference = find(panel, &cfg.reference)?;
    let comparisons = targets
        .iter()
        .map(|t| compare_increments(find(panel, t)?, reference).map_err(Into::into))
        .collect::<Result<Vec<_>>>()?;
    write(&cfg.out, "compare.csv", &comparison_csv(&comparisons))?;
    let ratios = ratio_csv(&comparisons);
    write(&cfg.out, "compare_ratios.csv", &ratios)?;
    print!("{ratios}");
    Ok(())
}

pub fn simulate(cfg: &RunConfig, spec_path: &Path) -> Result<()> {
    let mut spec = SimulationSpec::from_json(&read(spec_path)?)
        .with_context(|| format!("in spec {}", spec_path.display()))?;
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    let panel = run_simulation(&spec)?;
    write(&cfg.out, "gdp.csv", &emit_gdp_csv(&panel.series))?;
    write(&cfg.out, "truth.csv", &emit_gdp_csv(&panel.truth_series))?;
    let mut truth = panel.ground_truth_json();
    if !truth.ends_with('\n') {
        truth.push('\n');
    }
    write(&cfg.out, "ground_truth.json", &truth)?;
    if let Some(pop) = &panel.population {
        write(&cfg.out, "population.csv", &pop.to_csv())?;
    }
    println!(
        "simulated {} countries x {} years (seed {})",
        panel.series.len(),
        spec.years,
        spec.seed
    );
    Ok(())
}
