//! Pooled fluctuation analysis: residual pooling, fixed-width histograms,
//! a moment-matched normal fit, Pearson goodness of fit and a tail-excess
//! count.
//!
//! Bins are `[c - w/2, c + w/2)` with centers at integer multiples of the
//! width `w`, so 0 is always a bin center.

use std::collections::BTreeSet;

use serde::{Serialize, Serializer};

use crate::csvio::{self, fmt_f64};
use crate::error::{Error, Result};
use crate::special::{chi_square_sf, normal_mass, normal_sf};
use crate::trendlab::{mean_increment, IncrementSeries};

pub const DEFAULT_BIN_WIDTH: f64 = 200.0;
pub const DEFAULT_TAIL_K: f64 = 3.0;
/// Merged bins must reach this expected count.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Centering {
    PerCountryMeanSubtracted,
    Uncentered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub country: String,
    pub year: i32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualPool {
    pub residuals: Vec<Residual>,
    pub centering: Centering,
}

impl ResidualPool {
    pub fn values(&self) -> Vec<f64> {
        self.residuals.iter().map(|r| r.value).collect()
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.residuals.iter().map(|r| r.value).sum::<f64>() / self.len() as f64
    }
}

/// Concatenates every country's increments, optionally subtracting each
/// country's own mean increment first.
pub fn pool_residuals(analyses: &[IncrementSeries], centering: Centering) -> Result<ResidualPool> {
    if analyses.is_empty() {
        return Err(Error::Empty("no countries to pool"));
    }
    let mut residuals = Vec::new();
    for inc in analyses {
        let offset = match centering {
            Centering::PerCountryMeanSubtracted => mean_increment(inc)?,
            Centering::Uncentered => 0.0,
        };
        residuals.extend(inc.pairs.iter().map(|p| Residual {
            country: inc.country.clone(),
            year: p.year,
            value: p.increment - offset,
        }));
    }
    Ok(ResidualPool {
        residuals,
        centering,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetPool {
    pub pool: ResidualPool,
    pub excluded: Vec<String>,
    pub mean: f64,
}

/// Pools all countries except `excluded`, which must all be analyzed
/// countries.
pub fn subset_pool(
    analyses: &[IncrementSeries],
    excluded: &BTreeSet<String>,
    centering: Centering,
) -> Result<SubsetPool> {
    let known: BTreeSet<&str> = analyses.iter().map(|a| a.country.as_str()).collect();
    if let Some(missing) = excluded.iter().find(|c| !known.contains(c.as_str())) {
        return Err(Error::UnknownCountry(missing.clone()));
    }
    let kept: Vec<IncrementSeries> = analyses
        .iter()
        .filter(|a| !excluded.contains(&a.country))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty("exclusion set removes every country"));
    }
    let pool = pool_residuals(&kept, centering)?;
    let mean = pool.mean();
    Ok(SubsetPool {
        pool,
        excluded: excluded.iter().cloned().collect(),
        mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub width: f64,
    /// Bin index `k` of the first bin; its center is `k * width`.
    pub first_index: i64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn center(&self, i: usize) -> f64 {
        (self.first_index + i as i64) as f64 * self.width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.center(i)).collect()
    }

    /// `[lo, hi)` of bin `i`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        bin_edges(self.first_index + i as i64, self.width)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn bin_edges(index: i64, width: f64) -> (f64, f64) {
    let k = index as f64;
    ((k - 0.5) * width, (k + 0.5) * width)
}

/// Index of the bin containing `value`, consistent with [`bin_edges`].
pub fn bin_index(value: f64, width: f64) -> i64 {
    let mut k = (value / width + 0.5).floor() as i64;
    // settle rounding at the edges against the edge formula itself
    while value < bin_edges(k, width).0 {
        k -= 1;
    }
    while value >= bin_edges(k, width).1 {
        k += 1;
    }
    k
}

pub fn histogram(values: &[f64], width: f64) -> Result<Histogram> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "bin width",
            value: width,
        });
    }
    if values.is_empty() {
        return Err(Error::Empty("no residuals to bin"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite residual {v}")));
    }
    let indices: Vec<i64> = values.iter().map(|&v| bin_index(v, width)).collect();
    let lo = *indices.iter().min().unwrap();
    let hi = *indices.iter().max().unwrap();
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for k in indices {
        counts[(k - lo) as usize] += 1;
    }
    Ok(Histogram {
        width,
        first_index: lo,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalFit {
    pub mu: f64,
    /// Population standard deviation (divides by n).
    pub sigma: f64,
}

pub fn normal_fit(values: &[f64]) -> Result<NormalFit> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    if var.is_nan() || var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(NormalFit {
        mu,
        sigma: var.sqrt(),
    })
}

/// `n * (Φ((hi-mu)/σ) - Φ((lo-mu)/σ))` for every bin.
pub fn expected_counts(fit: NormalFit, hist: &Histogram, n: usize) -> Result<Vec<f64>> {
    let edges: Vec<(f64, f64)> = (0..hist.counts.len()).map(|i| hist.edges(i)).collect();
    expected_counts_for_edges(fit, &edges, n)
}

pub fn expected_counts_for_edges(
    fit: NormalFit,
    edges: &[(f64, f64)],
    n: usize,
) -> Result<Vec<f64>> {
    if !(fit.sigma.is_finite() && fit.sigma > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "sigma",
            value: fit.sigma,
        });
    }
    let n = n as f64;
    Ok(edges
        .iter()
        .map(|&(lo, hi)| n * normal_mass((lo - fit.mu) / fit.sigma, (hi - fit.mu) / fit.sigma))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of original bins in each merged group, in order.
    pub groups: Vec<usize>,
}

/// Groups adjacent bins so every group's expected count reaches
/// [`MIN_EXPECTED`]. Tails are accumulated from each end toward the mode;
/// a short remainder joins the neighbouring group on the mode side.
fn merge_groups(expected: &[f64]) -> Vec<(usize, usize)> {
    let m = expected.len();
    let mode = expected
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);

    // left side: indices 0..=mode, sweeping right
    let mut left: Vec<(usize, usize)> = Vec::new();
    let (mut start, mut acc) = (0, 0.0);
    for (i, e) in expected.iter().enumerate().take(mode + 1) {
        acc += e;
        if acc >= MIN_EXPECTED {
            left.push((start, i));
            start = i + 1;
            acc = 0.0;
        }
    }
    let left_rest = (start <= mode).then_some((start, mode));

    // right side: indices mode+1..m, sweeping left
    let mut right: Vec<(usize, usize)> = Vec::new();
    let mut end = m;
    acc = 0.0;
    for i in (mode + 1..m).rev() {
        acc += expected[i];
        if acc >= MIN_EXPECTED {
            right.push((i, end - 1));
            end = i;
            acc = 0.0;
        }
    }
    let right_rest = (end > mode + 1).then_some((mode + 1, end - 1));
    right.reverse();

    let mut groups = left;
    groups.extend(right);
    for (lo, hi) in [left_rest, right_rest].into_iter().flatten() {
        // join the adjacent group, or stand alone if there is none
        if let Some(g) = groups.iter_mut().find(|g| g.0 == hi + 1 || g.1 + 1 == lo) {
            g.0 = g.0.min(lo);
            g.1 = g.1.max(hi);
        } else {
            groups.push((lo, hi));
        }
    }
    groups.sort();
    // a lone remainder may still fall short; fold it into a neighbour
    loop {
        let sums: Vec<f64> = groups
            .iter()
            .map(|&(lo, hi)| expected[lo..=hi].iter().sum())
            .collect();
        let Some(i) = sums.iter().position(|&s| s < MIN_EXPECTED) else {
            break;
        };
        if groups.len() == 1 {
            break;
        }
        let j = if i == 0 {
            1
        } else if i == groups.len() - 1 || sums[i - 1] <= sums[i + 1] {
            i - 1
        } else {
            i + 1
        };
        let (a, b) = (i.min(j), i.max(j));
        groups[a] = (groups[a].0, groups[b].1);
        groups.remove(b);
    }
    groups
}

/// Pearson chi-square over merged bins with `dof = groups - 3`.
pub fn gof_chi_square(observed: &[f64], expected: &[f64]) -> Result<ChiSquare> {
    if observed.len() != expected.len() {
        return Err(Error::LengthMismatch(observed.len(), expected.len()));
    }
    if expected.is_empty() {
        return Err(Error::TooFewBins(0));
    }
    let groups = merge_groups(expected);
    if groups.len() < 4 {
        return Err(Error::TooFewBins(groups.len()));
    }
    let mut statistic = 0.0;
    for &(lo, hi) in &groups {
        let o: f64 = observed[lo..=hi].iter().sum();
        let e: f64 = expected[lo..=hi].iter().sum();
        statistic += (o - e) * (o - e) / e;
    }
    let dof = groups.len() - 3;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof as f64),
        groups: groups.iter().map(|(lo, hi)| hi - lo + 1).collect(),
    })
}

/// Observed/expected ratio; infinite when the expected count underflows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExcessRatio {
    Finite(f64),
    Infinite,
}

impl ExcessRatio {
    pub fn value(self) -> f64 {
        match self {
            ExcessRatio::Finite(v) => v,
            ExcessRatio::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for ExcessRatio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExcessRatio::Finite(v) => s.serialize_f64(*v),
            ExcessRatio::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailReport {
    pub k: f64,
    pub observed_beyond: u64,
    pub expected_beyond: f64,
    pub excess_ratio: ExcessRatio,
}

/// Counts `|r - mu| > k σ` against the normal expectation `n · 2(1 - Φ(k))`.
pub fn tail_excess(values: &[f64], fit: NormalFit, k: f64) -> Result<TailReport> {
    if !(fit.sigma.is_finite() && fit.sigma > 0.0) {
        return Err(Error::NonPositiveParameter {
            name: "sigma",
            value: fit.sigma,
        });
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tail multiplier {k} must be >= 0"
        )));
    }
    let threshold = k * fit.sigma;
    let observed_beyond = values
        .iter()
        // at k = 0 the tail is the whole line, matching expected = n
        .filter(|&&r| k == 0.0 || (r - fit.mu).abs() > threshold)
        .count() as u64;
    let expected_beyond = values.len() as f64 * 2.0 * normal_sf(k);
    let excess_ratio = if expected_beyond > 0.0 {
        ExcessRatio::Finite(observed_beyond as f64 / expected_beyond)
    } else {
        ExcessRatio::Infinite
    };
    Ok(TailReport {
        k,
        observed_beyond,
        expected_beyond,
        excess_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub centering: Centering,
    pub bin_width: f64,
    pub bin_centers: Vec<f64>,
    pub counts: Vec<u64>,
    pub fit_mu: f64,
    pub fit_sigma: f64,
    pub expected_counts: Vec<f64>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub tail_report: TailReport,
}

impl DistributionSummary {
    /// `bin_center,observed,expected`
    pub fn to_csv(&self) -> String {
        let mut wtr = csvio::writer();
        wtr.write_record(["bin_center", "observed", "expected"])
            .unwrap();
        for ((c, o), e) in self
            .bin_centers
            .iter()
            .zip(&self.counts)
            .zip(&self.expected_counts)
        {
            wtr.write_record([fmt_f64(*c), o.to_string(), fmt_f64(*e)])
                .unwrap();
        }
        csvio::finish(wtr)
    }
}

/// Histogram, fit, goodness of fit and tail report for one pool.
///
/// `expected_counts` covers the binned range only. The chi-square test
/// treats the two outermost bins as open-ended so the fitted mass outside
/// the range is not silently dropped.
pub fn summarize(pool: &ResidualPool, bin_width: f64, tail_k: f64) -> Result<DistributionSummary> {
    let values = pool.values();
    let hist = histogram(&values, bin_width)?;
    let fit = normal_fit(&values)?;
    let n = values.len();
    let expected = expected_counts(fit, &hist, n)?;

    let mut open_edges: Vec<(f64, f64)> = (0..hist.counts.len()).map(|i| hist.edges(i)).collect();
    open_edges[0].0 = f64::NEG_INFINITY;
    let last = open_edges.len() - 1;
    open_edges[last].1 = f64::INFINITY;
    let expected_open = expected_counts_for_edges(fit, &open_edges, n)?;
    let observed: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let chi = gof_chi_square(&observed, &expected_open)?;

    let tail_report = tail_excess(&values, fit, tail_k)?;
    Ok(DistributionSummary {
        n,
        centering: pool.centering,
        bin_width,
        bin_centers: hist.centers(),
        counts: hist.counts,
        fit_mu: fit.mu,
        fit_sigma: fit.sigma,
        expected_counts: expected,
        chi_square: chi.statistic,
        dof: chi.dof,
        p_value: chi.p_value,
        tail_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::{AnnualSeries, PppBasis};
    use crate::special::normal_cdf;
    use crate::trendlab::increments;

    fn inc(country: &str, values: Vec<f64>) -> IncrementSeries {
        increments(&AnnualSeries::new(country, PppBasis::Eks2002, 1950, values).unwrap()).unwrap()
    }

    #[test]
    fn centered_pool_sums_to_zero() {
        let a = inc("A", vec![1000.0, 1300.0, 1800.0, 2200.0]);
        let b = inc("B", vec![5000.0, 5600.0, 5900.0, 6500.0]);
        let pool = pool_residuals(&[a, b], Centering::PerCountryMeanSubtracted).unwrap();
        assert_eq!(pool.len(), 6);
        assert!(pool.values().iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn uncentered_single_country_is_verbatim() {
        let a = inc("A", vec![10.0, 13.0, 11.0]);
        let pool = pool_residuals(std::slice::from_ref(&a), Centering::Uncentered).unwrap();
        assert_eq!(pool.values(), a.increments().collect::<Vec<_>>());
        assert!(pool_residuals(&[], Centering::Uncentered).is_err());
    }

    #[test]
    fn subset_rules() {
        let all = vec![
            inc("A", vec![10.0, 20.0, 40.0]),
            inc("B", vec![10.0, 15.0, 16.0]),
        ];
        let none = subset_pool(&all, &BTreeSet::new(), Centering::Uncentered).unwrap();
        assert_eq!(
            none.pool,
            pool_residuals(&all, Centering::Uncentered).unwrap()
        );
        let only_b = subset_pool(&all, &["A".to_string()].into(), Centering::Uncentered).unwrap();
        assert_eq!(only_b.mean, 3.0);
        let everything: BTreeSet<String> = ["A".to_string(), "B".to_string()].into();
        assert!(subset_pool(&all, &everything, Centering::Uncentered).is_err());
        let unknown: BTreeSet<String> = ["Z".to_string()].into();
        assert!(matches!(
            subset_pool(&all, &unknown, Centering::Uncentered),
            Err(Error::UnknownCountry(_))
        ));
    }

    #[test]
    fn histogram_bins_are_half_open() {
        let h = histogram(&[-50.0, 0.0, 99.999], 200.0).unwrap();
        assert_eq!((h.first_index, h.counts.clone()), (0, vec![3]));
        let h = histogram(&[100.0], 200.0).unwrap();
        assert_eq!(h.center(0), 200.0);
        let h = histogram(&[-100.0], 200.0).unwrap();
        assert_eq!(h.center(0), 0.0);
        let h = histogram(&[-350.0, 420.0], 200.0).unwrap();
        assert_eq!(h.centers(), vec![-400.0, -200.0, 0.0, 200.0, 400.0]);
        assert_eq!(h.counts, vec![1, 0, 0, 0, 1]);
        assert!(histogram(&[1.0], 0.0).is_err());
        assert!(histogram(&[], 200.0).is_err());
    }

    #[test]
    fn symmetric_pair_fit() {
        let fit = normal_fit(&[-3.0, 3.0]).unwrap();
        assert_eq!((fit.mu, fit.sigma), (0.0, 3.0));
        assert_eq!(normal_fit(&[2.0, 2.0, 2.0]), Err(Error::ZeroVariance));
        assert!(normal_fit(&[2.0]).is_err());
    }

    #[test]
    fn expected_count_for_central_bin() {
        let fit = NormalFit {
            mu: 0.0,
            sigma: 359.0,
        };
        let e = expected_counts_for_edges(fit, &[(-100.0, 100.0)], 1007).unwrap();
        // mpmath: 1007 * (Phi(100/359) - Phi(-100/359))
        assert!((e[0] - 220.946_864_176_707_78).abs() < 1e-9);
    }

    #[test]
    fn expected_counts_are_symmetric_and_telescope() {
        let fit = NormalFit {
            mu: 40.0,
            sigma: 300.0,
        };
        let values = [40.0 - 6.0 * 300.0, 40.0 + 6.0 * 300.0];
        let hist = histogram(&values, 200.0).unwrap();
        let e = expected_counts(fit, &hist, 1000).unwrap();
        let (lo, _) = hist.edges(0);
        let (_, hi) = hist.edges(hist.counts.len() - 1);
        let want = 1000.0 * (normal_cdf((hi - 40.0) / 300.0) - normal_cdf((lo - 40.0) / 300.0));
        assert!((e.iter().sum::<f64>() - want).abs() < 1e-9 * want);
        assert!((e.iter().sum::<f64>() - 1000.0).abs() < 1e-6 * 1000.0);

        let sym_fit = NormalFit {
            mu: 0.0,
            sigma: 1.0,
        };
        let edges: Vec<(f64, f64)> = (-5..5)
            .map(|k| (k as f64 * 0.5, (k + 1) as f64 * 0.5))
            .collect();
        let e = expected_counts_for_edges(sym_fit, &edges, 500).unwrap();
        for i in 0..5 {
            let (a, b) = (e[i], e[9 - i]);
            assert!((a - b).abs() <= 1e-9 * a.max(b), "{a} vs {b}");
        }
        assert!(expected_counts_for_edges(
            NormalFit {
                mu: 0.0,
                sigma: 0.0
            },
            &edges,
            1
        )
        .is_err());
    }

    #[test]
    fn perfect_fit_has_zero_statistic() {
        let e = vec![3.0, 8.0, 20.0, 40.0, 20.0, 8.0, 3.0, 1.0];
        let chi = gof_chi_square(&e, &e).unwrap();
        assert_eq!(chi.statistic, 0.0);
        assert_eq!(chi.p_value, 1.0);
    }

    #[test]
    fn merging_reaches_five_everywhere() {
        let e = vec![
            0.1, 0.5, 2.0, 4.0, 9.0, 30.0, 50.0, 30.0, 9.0, 3.0, 1.0, 0.2,
        ];
        let groups = merge_groups(&e);
        let mut covered = 0;
        for &(lo, hi) in &groups {
            assert_eq!(lo, covered);
            covered = hi + 1;
            assert!(e[lo..=hi].iter().sum::<f64>() >= MIN_EXPECTED);
        }
        assert_eq!(covered, e.len());
        let chi = gof_chi_square(&e, &e).unwrap();
        assert_eq!(chi.dof, groups.len() - 3);
    }

    #[test]
    fn too_few_bins() {
        let e = vec![2.0, 6.0, 6.0, 2.0];
        assert!(matches!(gof_chi_square(&e, &e), Err(Error::TooFewBins(_))));
        assert!(matches!(
            gof_chi_square(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn tail_counts() {
        let zeros = vec![0.0; 10];
        let t = tail_excess(
            &zeros,
            NormalFit {
                mu: 0.0,
                sigma: 1.0,
            },
            3.0,
        )
        .unwrap();
        assert_eq!(t.observed_beyond, 0);
        let t = tail_excess(
            &[1.0, -2.0, 5.0],
            NormalFit {
                mu: 0.0,
                sigma: 1.0,
            },
            0.0,
        )
        .unwrap();
        assert_eq!(t.observed_beyond, 3);
        let t = tail_excess(
            &[1.0, 500.0],
            NormalFit {
                mu: 0.0,
                sigma: 1.0,
            },
            60.0,
        )
        .unwrap();
        assert_eq!(t.excess_ratio, ExcessRatio::Infinite);
        assert_eq!(serde_json::to_string(&t.excess_ratio).unwrap(), "\"inf\"");
    }

    #[test]
    fn summary_csv_shape() {
        let values: Vec<f64> = (0..400).map(|i| ((i * 37) % 1000) as f64 - 500.0).collect();
        let pool = ResidualPool {
            residuals: values
                .iter()
                .enumerate()
                .map(|(i, v)| Residual {
                    country: "X".into(),
                    year: 1950 + i as i32,
                    value: *v,
                })
                .collect(),
            centering: Centering::Uncentered,
        };
        let s = summarize(&pool, 200.0, 3.0).unwrap();
        assert_eq!(s.counts.iter().sum::<u64>(), 400);
        assert!(s.expected_counts.iter().sum::<f64>() <= 400.0);
        let csv = s.to_csv();
        assert!(csv.starts_with("bin_center,observed,expected\n"));
        assert_eq!(csv.lines().count(), s.counts.len() + 1);
    }
}
