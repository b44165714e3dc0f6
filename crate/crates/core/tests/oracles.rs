//! Estimators checked against independently constructed ground truth.

mod common;

use gdp_trend::correction::correct_series;
use gdp_trend::datastore::{emit_gdp_csv, parse_gdp_csv, validate_series, FillMissing};
use gdp_trend::fluctuations::{
    bin_edges, histogram, normal_fit, summarize, tail_excess, Centering, Residual, ResidualPool,
};
use gdp_trend::growthmodel::fit_model;
use gdp_trend::special::normal_sf;
use gdp_trend::synthlab::{
    generate, simulate, CountrySpec, NoiseKind, NoiseSource, NoiseSpec, PopulationSpec,
    SimulationSpec,
};
use gdp_trend::trendlab::{country_table, increments, mean_increment, CountryPanel};
use gdp_trend::{ModelParams, PppBasis, RawSeries};

use common::{panel, poisson_band};

fn draws(seed: u64, n: usize, kind: NoiseKind) -> Vec<f64> {
    let mut src = NoiseSource::new(seed, 0);
    (0..n).map(|_| src.draw(&kind)).collect()
}

fn pool(values: &[f64]) -> ResidualPool {
    ResidualPool {
        residuals: values
            .iter()
            .enumerate()
            .map(|(i, &value)| Residual {
                country: "X".into(),
                year: i as i32,
                value,
            })
            .collect(),
        centering: Centering::Uncentered,
    }
}

#[test]
fn nineteen_country_fixture_round_trips_bit_exactly() {
    let p = panel(11, NoiseKind::Normal { sigma: 359.0 });
    assert_eq!(p.series.len(), 19);
    let text = emit_gdp_csv(&p.series);
    let parsed = parse_gdp_csv(&text, PppBasis::Eks2002).unwrap();
    assert_eq!(parsed.len(), 19);
    for (raw, original) in parsed.iter().zip(&p.series) {
        let back = raw.to_annual().unwrap();
        assert_eq!(back.len(), 54);
        assert_eq!(&back, original);
        for (a, b) in back.values().iter().zip(original.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn injected_gap_is_reported_then_filled_from_next_year() {
    let p = panel(3, NoiseKind::Normal { sigma: 359.0 });
    let mut raw = RawSeries::from(&p.series[4]);
    let later = raw.observations[&1971];
    raw.observations.remove(&1970);
    let report = validate_series(&raw);
    assert_eq!(report.gaps.len(), 1);
    assert_eq!(report.gaps[0].year, 1970);
    let (filled, fill) = raw.fill_missing(1950..=2003).unwrap();
    assert_eq!(filled.observations[&1970], later);
    assert_eq!(fill.filled[0].source_year, 1971);
}

#[test]
fn histogram_matches_brute_force_binning() {
    let values = draws(2718, 10_000, NoiseKind::Normal { sigma: 359.0 });
    let width = 200.0;
    let h = histogram(&values, width).unwrap();
    // scan every candidate bin for every value
    for (i, &count) in h.counts.iter().enumerate() {
        let k = h.first_index + i as i64;
        let (lo, hi) = bin_edges(k, width);
        let brute = values.iter().filter(|&&v| lo <= v && v < hi).count() as u64;
        assert_eq!(count, brute, "bin {k}");
    }
    let below = bin_edges(h.first_index, width).0;
    let above = bin_edges(h.first_index + h.counts.len() as i64 - 1, width).1;
    assert!(values.iter().all(|&v| below <= v && v < above));
    assert_eq!(h.total(), 10_000);
}

#[test]
fn normal_draws_fit_and_pass() {
    let values = draws(0, 1007, NoiseKind::Normal { sigma: 359.0 });
    let fit = normal_fit(&values).unwrap();
    // sampling error of sigma is about 359 / sqrt(2 * 1007) = 8
    assert!(
        (fit.sigma - 359.0).abs() <= 0.05 * 359.0,
        "sigma {}",
        fit.sigma
    );
    let s = summarize(&pool(&values), 200.0, 3.0).unwrap();
    assert!(s.p_value > 0.01, "p {}", s.p_value);

    let t = tail_excess(&values, fit, 3.0).unwrap();
    let lambda = 2.0 * normal_sf(3.0) * 1007.0;
    assert!((t.expected_beyond - lambda).abs() < 1e-9);
    assert!((lambda - 2.7186946357).abs() < 1e-9);
    let (lo, hi) = poisson_band(lambda, 0.005);
    assert!(
        (lo..=hi).contains(&t.observed_beyond),
        "{} not in [{lo},{hi}]",
        t.observed_beyond
    );
}

#[test]
fn mixture_draws_are_rejected() {
    let kind = NoiseKind::Mixture {
        sigma_core: 200.0,
        sigma_tail: 2000.0,
        tail_fraction: 0.05,
    };
    let values = draws(42, 1007, kind);
    let s = summarize(&pool(&values), 200.0, 3.0).unwrap();
    assert!(s.p_value < 0.01, "p {}", s.p_value);
}

#[test]
fn ten_sigma_outliers_blow_up_the_tail() {
    let mut values = draws(5, 1000, NoiseKind::Normal { sigma: 359.0 });
    for (i, v) in values.iter_mut().enumerate().filter(|(i, _)| i % 20 == 0) {
        *v = if i % 40 == 0 { 3590.0 } else { -3590.0 };
    }
    let fit = normal_fit(&values).unwrap();
    let t = tail_excess(&values, fit, 3.0).unwrap();
    assert!(t.observed_beyond >= 50);
    assert!(t.excess_ratio.value() > 10.0, "ratio {:?}", t.excess_ratio);
}

#[test]
fn poisson_band_oracle() {
    // P(X <= 8) for lambda 2.7187 is 0.9972, P(X <= 7) is 0.9909
    assert_eq!(poisson_band(2.7186946357, 0.005), (0, 8));
    let (lo, hi) = poisson_band(100.0, 0.005);
    assert!((74..=76).contains(&lo) && (125..=127).contains(&hi));
}

#[test]
fn noisy_mean_increment_within_sampling_error() {
    let params = ModelParams::new(450.0, 10000.0, 1950).unwrap();
    let noise = NoiseSpec {
        kind: NoiseKind::Normal { sigma: 359.0 },
        seed: 42,
    };
    let (s, _) = generate(&params, &noise, 54, "X", PppBasis::Eks2002).unwrap();
    let bound = 3.0 * 359.0 / 53f64.sqrt();
    let a = mean_increment(&increments(&s).unwrap()).unwrap();
    assert!((a - 450.0).abs() <= bound, "A {a}");
    assert_eq!(fit_model(&s).unwrap().a, a);
}

#[test]
fn table_rows_equal_scripted_means() {
    let spec = SimulationSpec {
        seed: 77,
        start_year: 1950,
        years: 54,
        ppp_basis: PppBasis::Eks2002,
        noise: NoiseKind::Normal { sigma: 300.0 },
        countries: vec![
            CountrySpec {
                name: "Alpha".into(),
                a: 400.0,
                b: 9000.0,
            },
            CountrySpec {
                name: "Beta".into(),
                a: 500.0,
                b: 12000.0,
            },
            CountrySpec {
                name: "Gamma".into(),
                a: 350.0,
                b: 7000.0,
            },
        ],
        random_countries: None,
        population: None,
    };
    let p = simulate(&spec).unwrap();
    let panels: Vec<CountryPanel> = p
        .series
        .iter()
        .map(|s| CountryPanel {
            country: s.country().to_string(),
            eks_original: s.clone(),
            eks_corrected: None,
            gk_original: None,
            gk_corrected: None,
        })
        .collect();
    let rows = country_table(&panels).unwrap();
    for (row, truth) in rows.iter().zip(&p.truths) {
        assert_eq!(row.country, truth.country);
        assert_eq!(row.mean_original, Some(truth.mean_increment()));
    }
}

#[test]
fn correction_restores_the_truth_line() {
    let spec = SimulationSpec {
        seed: 5,
        start_year: 1950,
        years: 54,
        ppp_basis: PppBasis::Eks2002,
        noise: NoiseKind::None,
        countries: vec![CountrySpec {
            name: "X".into(),
            a: 450.0,
            b: 10000.0,
        }],
        random_countries: None,
        population: Some(PopulationSpec {
            ratio_start: 1.45,
            ratio_end: 1.25,
            base_adult: 1e9,
        }),
    };
    let p = simulate(&spec).unwrap();
    let corrected = correct_series(&p.series[0], p.population.as_ref().unwrap()).unwrap();
    for (c, t) in corrected
        .corrected_values
        .iter()
        .zip(p.truth_series[0].values())
    {
        assert!(((c - t) / t).abs() <= 1e-12);
    }
    let fitted = fit_model(&corrected.corrected()).unwrap();
    assert!((fitted.a - 450.0).abs() < 1e-9);
}
