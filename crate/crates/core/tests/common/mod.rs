#![allow(dead_code)]

use gdp_trend::fluctuations::{pool_residuals, Centering, ResidualPool};
use gdp_trend::pipeline::increments_all;
use gdp_trend::synthlab::{simulate, NoiseKind, RandomCountries, SimulationSpec, SyntheticPanel};
use gdp_trend::PppBasis;

/// Smallest `lo` and largest `hi` with `P(X < lo) <= tail` and
/// `P(X > hi) <= tail` for `X ~ Poisson(lambda)`.
pub fn poisson_band(lambda: f64, tail: f64) -> (u64, u64) {
    let mut pmf = (-lambda).exp();
    let mut cdf = 0.0;
    let mut lo = None;
    let mut k = 0u64;
    loop {
        // cdf currently holds P(X < k)
        if lo.is_none() && cdf + pmf > tail {
            lo = Some(k);
        }
        cdf += pmf;
        if 1.0 - cdf <= tail {
            return (lo.unwrap(), k);
        }
        k += 1;
        pmf *= lambda / k as f64;
    }
}

/// 19 countries x 54 years, A in [350, 550], B in [5000, 15000].
pub fn panel_spec(seed: u64, noise: NoiseKind) -> SimulationSpec {
    SimulationSpec {
        seed,
        start_year: 1950,
        years: 54,
        ppp_basis: PppBasis::Eks2002,
        noise,
        countries: vec![],
        random_countries: Some(RandomCountries {
            count: 19,
            a_min: 350.0,
            a_max: 550.0,
            b_min: 5000.0,
            b_max: 15000.0,
        }),
        population: None,
    }
}

pub fn panel(seed: u64, noise: NoiseKind) -> SyntheticPanel {
    simulate(&panel_spec(seed, noise)).unwrap()
}

pub fn centered_pool(panel: &SyntheticPanel) -> ResidualPool {
    let inc = increments_all(&panel.series).unwrap();
    pool_residuals(&inc, Centering::PerCountryMeanSubtracted).unwrap()
}
