//! The constant-increment growth model.
//!
//! `dG/dt = A` integrates to `G(t) = A (t - t0) + B` with `B = G(t0)`, so the
//! relative growth rate `A / G(t)` decays as the level rises while the
//! absolute gap between two economies with equal `A` never closes.

use serde::{Deserialize, Serialize};

use crate::csvio::{self, fmt_f64, fmt_opt};
use crate::datastore::{AnnualSeries, PppBasis};
use crate::error::{Error, Result};
use crate::trendlab::{increments, mean_increment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Trend increment per year.
    pub a: f64,
    /// Level at `t0`.
    pub b: f64,
    pub t0: i32,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, t0: i32) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "trend increment {a} is not finite"
            )));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::NonPositiveParameter {
                name: "initial level",
                value: b,
            });
        }
        Ok(Self { a, b, t0 })
    }

    /// `B + A k`
    pub fn level(&self, k: u32) -> f64 {
        self.b + self.a * k as f64
    }
}

/// `A` is the mean annual increment, `B` the first level.
pub fn fit_model(series: &AnnualSeries) -> Result<ModelParams> {
    let a = mean_increment(&increments(series)?)?;
    ModelParams::new(a, series.values()[0], series.start_year())
}

/// Levels for `k = 0..=horizon`.
pub fn project(
    params: &ModelParams,
    horizon: u32,
    country: &str,
    basis: PppBasis,
) -> Result<AnnualSeries> {
    let values: Vec<f64> = (0..=horizon).map(|k| params.level(k)).collect();
    if let Some(k) = values.iter().position(|v| *v <= 0.0) {
        return Err(Error::NonPositiveLevel {
            year: params.t0 + k as i32,
            value: values[k],
        });
    }
    AnnualSeries::new(country, basis, params.t0, values)
}

/// `year,value,ppp_basis`
pub fn projection_csv(series: &AnnualSeries) -> String {
    let mut wtr = csvio::writer();
    wtr.write_record(["year", "value", "ppp_basis"]).unwrap();
    for (year, v) in series.years().zip(series.values()) {
        wtr.write_record([
            year.to_string(),
            fmt_f64(*v),
            series.ppp_basis().to_string(),
        ])
        .unwrap();
    }
    csvio::finish(wtr)
}

/// Relative growth rate `A / G`.
pub fn relative_rate(a: f64, level: f64) -> Result<f64> {
    if !(level.is_finite() && level > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "level",
            value: level,
        });
    }
    Ok(a / level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPoint {
    pub year: i32,
    /// `G1 - G2`
    pub gap: f64,
    /// `None` once a projected level is no longer positive.
    pub rate1: Option<f64>,
    pub rate2: Option<f64>,
}

/// Gap and relative rates of two projections, step `k` apart from each
/// model's own start. Years are labelled from `p1.t0`.
pub fn gap_trajectory(p1: &ModelParams, p2: &ModelParams, horizon: u32) -> Vec<GapPoint> {
    (0..=horizon)
        .map(|k| {
            let (g1, g2) = (p1.level(k), p2.level(k));
            GapPoint {
                year: p1.t0 + k as i32,
                gap: g1 - g2,
                rate1: relative_rate(p1.a, g1).ok(),
                rate2: relative_rate(p2.a, g2).ok(),
            }
        })
        .collect()
}

/// `year,gap,rate1,rate2`
pub fn gap_csv(points: &[GapPoint]) -> String {
    let mut wtr = csvio::writer();
    wtr.write_record(["year", "gap", "rate1", "rate2"]).unwrap();
    for p in points {
        wtr.write_record([
            p.year.to_string(),
            fmt_f64(p.gap),
            fmt_opt(p.rate1),
            fmt_opt(p.rate2),
        ])
        .unwrap();
    }
    csvio::finish(wtr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub year: i32,
    pub target_increment: f64,
    pub reference_mean: f64,
}

/// A target economy's yearly increments set against a reference economy's
/// mean increment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementComparison {
    pub target: String,
    pub reference: String,
    pub ppp_basis: PppBasis,
    pub rows: Vec<ComparisonRow>,
    pub target_mean: f64,
    pub reference_mean: f64,
    /// `target_mean / reference_mean`
    pub ratio: f64,
}

pub fn compare_increments(
    target: &AnnualSeries,
    reference: &AnnualSeries,
) -> Result<IncrementComparison> {
    if target.ppp_basis() != reference.ppp_basis() {
        return Err(Error::InvalidParameter(format!(
            "cannot compare {} against {} across PPP bases",
            target.ppp_basis(),
            reference.ppp_basis()
        )));
    }
    let target_inc = increments(target)?;
    let target_mean = mean_increment(&target_inc)?;
    let reference_mean = mean_increment(&increments(reference)?)?;
    if reference_mean == 0.0 {
        return Err(Error::ZeroReference(reference.country().to_string()));
    }
    let rows = target_inc
        .pairs
        .iter()
        .map(|p| ComparisonRow {
            year: p.year,
            target_increment: p.increment,
            reference_mean,
        })
        .collect();
    Ok(IncrementComparison {
        target: target.country().to_string(),
        reference: reference.country().to_string(),
        ppp_basis: target.ppp_basis(),
        rows,
        target_mean,
        reference_mean,
        ratio: target_mean / reference_mean,
    })
}

/// `target,year,target_increment,reference_mean,ppp_basis`
pub fn comparison_csv(comparisons: &[IncrementComparison]) -> String {
    let mut wtr = csvio::writer();
    wtr.write_record([
        "target",
        "year",
        "target_increment",
        "reference_mean",
        "ppp_basis",
    ])
    .unwrap();
    for c in comparisons {
        for r in &c.rows {
            wtr.write_record([
                c.target.clone(),
                r.year.to_string(),
                fmt_f64(r.target_increment),
                fmt_f64(r.reference_mean),
                c.ppp_basis.to_string(),
            ])
            .unwrap();
        }
    }
    csvio::finish(wtr)
}

/// `target,reference,target_mean,reference_mean,ratio,ppp_basis`
pub fn ratio_csv(comparisons: &[IncrementComparison]) -> String {
    let mut wtr = csvio::writer();
    wtr.write_record([
        "target",
        "reference",
        "target_mean",
        "reference_mean",
        "ratio",
        "ppp_basis",
    ])
    .unwrap();
    for c in comparisons {
        wtr.write_record([
            c.target.clone(),
            c.reference.clone(),
            fmt_f64(c.target_mean),
            fmt_f64(c.reference_mean),
            fmt_f64(c.ratio),
            c.ppp_basis.to_string(),
        ])
        .unwrap();
    }
    csvio::finish(wtr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64) -> ModelParams {
        ModelParams::new(a, b, 1950).unwrap()
    }

    #[test]
    fn fit_on_three_points() {
        let s = AnnualSeries::new(
            "X",
            PppBasis::Eks2002,
            1950,
            vec![10000.0, 10450.0, 10900.0],
        )
        .unwrap();
        assert_eq!(fit_model(&s).unwrap(), params(450.0, 10000.0));
        let short = AnnualSeries::new("X", PppBasis::Eks2002, 1950, vec![1.0]).unwrap();
        assert!(fit_model(&short).is_err());
    }

    #[test]
    fn projections() {
        let p = project(&params(450.0, 10000.0), 2, "X", PppBasis::Eks2002).unwrap();
        assert_eq!(p.values(), &[10000.0, 10450.0, 10900.0]);
        let flat = project(&params(0.0, 777.0), 5, "X", PppBasis::Eks2002).unwrap();
        assert!(flat.values().iter().all(|v| *v == 777.0));
        let err = project(&params(-300.0, 1000.0), 10, "X", PppBasis::Other).unwrap_err();
        assert_eq!(
            err,
            Error::NonPositiveLevel {
                year: 1954,
                value: -200.0
            }
        );
    }

    #[test]
    fn rates() {
        assert_eq!(relative_rate(450.0, 30000.0).unwrap(), 0.015);
        assert_eq!(relative_rate(450.0, 45000.0).unwrap(), 0.01);
        assert!(relative_rate(450.0, 0.0).is_err());
    }

    #[test]
    fn rates_decay_along_projection() {
        let p = params(450.0, 10000.0);
        let path = project(&p, 50, "X", PppBasis::Other).unwrap();
        let rates: Vec<f64> = path
            .values()
            .iter()
            .map(|g| relative_rate(p.a, *g).unwrap())
            .collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]));
        assert!(relative_rate(p.a, p.level(1_000_000)).unwrap() < 1e-3);
    }

    #[test]
    fn equal_increment_gap_is_constant() {
        let rich = ModelParams::new(450.0, 30000.0, 2000).unwrap();
        let poor = ModelParams::new(450.0, 15000.0, 2000).unwrap();
        let traj = gap_trajectory(&rich, &poor, 50);
        assert_eq!(traj.len(), 51);
        assert!(traj.iter().all(|p| p.gap == 15000.0));
        assert_eq!(traj[0].rate1, Some(0.015));
        assert_eq!(traj[0].rate2, Some(0.03));
        assert!(traj.iter().all(|p| p.rate2 > p.rate1));
    }

    #[test]
    fn unequal_increment_gap_widens_by_difference() {
        let traj = gap_trajectory(&params(500.0, 20000.0), &params(300.0, 10000.0), 20);
        assert!(traj.windows(2).all(|w| w[1].gap - w[0].gap == 200.0));
    }

    #[test]
    fn comparison_ratio() {
        let fr = project(&params(400.0, 5000.0), 40, "France", PppBasis::Gk1990).unwrap();
        let su = project(&params(100.0, 3000.0), 40, "USSR", PppBasis::Gk1990).unwrap();
        let c = compare_increments(&su, &fr).unwrap();
        assert_eq!(c.ratio, 0.25);
        assert_eq!(c.rows.len(), 40);
        assert_eq!(compare_increments(&fr, &fr).unwrap().ratio, 1.0);
        let eks = project(&params(400.0, 5000.0), 4, "France", PppBasis::Eks2002).unwrap();
        assert!(compare_increments(&su, &eks).is_err());
    }

    #[test]
    fn csv_layouts() {
        let traj = gap_trajectory(&params(1.0, 2.0), &params(1.0, 1.0), 1);
        assert_eq!(
            gap_csv(&traj),
            "year,gap,rate1,rate2\n1950,1,0.5,1\n1951,1,0.3333333333333333,0.5\n"
        );
        let p = project(&params(1.5, 2.0), 1, "X", PppBasis::Eks2002).unwrap();
        assert_eq!(
            projection_csv(&p),
            "year,value,ppp_basis\n1950,2,EKS_2002\n1951,3.5,EKS_2002\n"
        );
    }
}
