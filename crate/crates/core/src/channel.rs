//! LAP to CAP link gains: ABG pathloss, spatially correlated log-normal
//! shadowing and Rayleigh block fading.
//!
//! The complex gain of channel `m` is `κ_m · 10^(-(PL + Ω) / 10)`, with `κ_m`
//! drawn i.i.d. `CN(0, 1)` per slot and per channel. LOS state and the
//! shadowing process belong to the link; fading is redrawn every slot.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{distance, Point};
use crate::scenario::{ScenarioConfig, Stream};

/// Pathloss in dB for a link of length `d` meters. Distances below 1 m are
/// clamped to 1 m.
pub fn pathloss_db(d: f64, los: bool, config: &ScenarioConfig) -> f64 {
    let (a, b, g) = if los {
        (config.pl_los_alpha, config.pl_los_beta_db, config.pl_los_gamma)
    } else {
        (config.pl_nlos_alpha, config.pl_nlos_beta_db, config.pl_nlos_gamma)
    };
    let d = d.max(1.0);
    10.0 * a * d.log10() + b + 10.0 * g * config.carrier_ghz.log10()
}

/// LOS probability `exp(-d / k)` with `k = -d_clutter / ln(1 - r)`.
pub fn los_probability(d: f64, config: &ScenarioConfig) -> f64 {
    let r = config.los_clutter_density;
    if r <= 0.0 {
        return 1.0;
    }
    if r >= 1.0 {
        return if d <= 0.0 { 1.0 } else { 0.0 };
    }
    let k = -config.los_clutter_size_m / (1.0 - r).ln();
    (-d / k).exp()
}

pub fn shadow_std_db(los: bool, config: &ScenarioConfig) -> f64 {
    if los {
        config.shadow_std_los_db
    } else {
        config.shadow_std_nlos_db
    }
}

/// Circularly symmetric complex Gaussian with unit power.
pub fn complex_normal(stream: &mut Stream) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = stream.sample(StandardNormal);
    let im: f64 = stream.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Log-normal shadowing that decorrelates exponentially with the distance
/// travelled by the link end point.
#[derive(Debug, Clone)]
pub struct ShadowingProcess {
    std_db: f64,
    decorrelation_m: f64,
    last: Option<(Point, f64)>,
}

impl ShadowingProcess {
    pub fn new(std_db: f64, decorrelation_m: f64) -> Self {
        Self {
            std_db,
            decorrelation_m,
            last: None,
        }
    }

    /// Shadowing in dB at `position`, correlated with the previous sample by
    /// `exp(-Δd / d_corr)`.
    pub fn sample(&mut self, position: Point, stream: &mut Stream) -> f64 {
        let z: f64 = stream.sample(StandardNormal);
        let value = match self.last {
            None => self.std_db * z,
            Some((prev_pos, prev)) => {
                let rho = (-distance(prev_pos, position) / self.decorrelation_m).exp();
                rho * prev + (1.0 - rho * rho).sqrt() * self.std_db * z
            }
        };
        self.last = Some((position, value));
        value
    }

    pub fn current(&self) -> Option<f64> {
        self.last.map(|(_, v)| v)
    }
}

/// Per-channel complex gain of one link in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGain {
    pub pathloss_db: f64,
    pub shadow_db: f64,
    pub fading: Vec<Complex64>,
    pub gain: Vec<Complex64>,
}

impl LinkGain {
    pub fn compose(pathloss_db: f64, shadow_db: f64, fading: Vec<Complex64>) -> Self {
        let scale = large_scale_amplitude(pathloss_db, shadow_db);
        let gain = fading.iter().map(|k| k * scale).collect();
        Self {
            pathloss_db,
            shadow_db,
            fading,
            gain,
        }
    }
}

pub fn large_scale_amplitude(pathloss_db: f64, shadow_db: f64) -> f64 {
    10f64.powf(-(pathloss_db + shadow_db) / 10.0)
}

/// Link state held for the lifetime of a placement snapshot.
#[derive(Debug, Clone)]
pub struct Link {
    pub los: bool,
    pub shadowing: ShadowingProcess,
}

impl Link {
    /// Draws the LOS state for a link of initial length `d`.
    pub fn new(d: f64, config: &ScenarioConfig, stream: &mut Stream) -> Self {
        let los = stream.random::<f64>() < los_probability(d, config);
        Self {
            los,
            shadowing: ShadowingProcess::new(shadow_std_db(los, config), config.shadow_decorrelation_m),
        }
    }

    /// Gains of all `n_channels` at the current position of the LAP.
    pub fn draw(
        &mut self,
        position: Point,
        cap: Point,
        config: &ScenarioConfig,
        stream: &mut Stream,
    ) -> LinkGain {
        let shadow = self.shadowing.sample(position, stream);
        draw_link(distance(position, cap), self.los, shadow, config, stream)
    }
}

/// Composes pathloss, the given shadowing value and fresh fading per channel.
pub fn draw_link(
    d: f64,
    los: bool,
    shadow_db: f64,
    config: &ScenarioConfig,
    stream: &mut Stream,
) -> LinkGain {
    let pl = pathloss_db(d, los, config);
    let fading = (0..config.n_channels).map(|_| complex_normal(stream)).collect();
    LinkGain::compose(pl, shadow_db, fading)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::derive_stream;

    #[test]
    fn unit_distance_leaves_constant_terms() {
        let c = ScenarioConfig::default();
        let expected = c.pl_nlos_beta_db + 10.0 * c.pl_nlos_gamma * 6f64.log10();
        assert!((pathloss_db(1.0, false, &c) - expected).abs() < 1e-12);
        assert_eq!(pathloss_db(0.3, false, &c), pathloss_db(1.0, false, &c));
    }

    #[test]
    fn decade_step_is_ten_alpha() {
        let c = ScenarioConfig::default();
        for los in [true, false] {
            let a = if los { c.pl_los_alpha } else { c.pl_nlos_alpha };
            let diff = pathloss_db(100.0, los, &c) - pathloss_db(10.0, los, &c);
            assert!((diff - 10.0 * a).abs() < 1e-9);
        }
    }

    #[test]
    fn nlos_default_at_25m() {
        // 33 + 25.5 log10(25) + 20 log10(6), evaluated by hand:
        // 25.5 * 1.397940009 = 35.64747023, 20 * 0.778151250 = 15.56302501
        let c = ScenarioConfig::default();
        assert!((pathloss_db(25.0, false, &c) - 84.21049524).abs() < 1e-6);
    }

    #[test]
    fn pathloss_monotone() {
        let c = ScenarioConfig::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..500 {
            let pl = pathloss_db(1.0 + i as f64 * 0.2, false, &c);
            assert!(pl >= prev);
            prev = pl;
        }
    }

    #[test]
    fn composition_identities() {
        let k = vec![Complex64::new(0.3, -0.7), Complex64::new(1.0, 0.0)];
        let g = LinkGain::compose(0.0, 0.0, k.clone());
        assert_eq!(g.gain, k);
        let g = LinkGain::compose(20.0, 0.0, vec![Complex64::new(1.0, 0.0)]);
        assert!((g.gain[0].re - 0.01).abs() < 1e-15);
    }

    #[test]
    fn composition_recomputes_bit_exactly() {
        let c = ScenarioConfig { n_channels: 3, ..Default::default() };
        let mut s = derive_stream(9, "channel");
        for i in 0..200 {
            let g = draw_link(1.0 + i as f64 * 0.3, i % 2 == 0, 2.5 - i as f64 * 0.01, &c, &mut s);
            let scale = 10f64.powf(-(g.pathloss_db + g.shadow_db) / 10.0);
            for (k, h) in g.fading.iter().zip(&g.gain) {
                assert_eq!(*h, k * scale);
            }
        }
    }

    #[test]
    fn fading_has_unit_power() {
        let mut s = derive_stream(1, "channel");
        let n = 100_000;
        let p: f64 = (0..n).map(|_| complex_normal(&mut s).norm_sqr()).sum::<f64>() / n as f64;
        assert!((p - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn shadowing_zero_mean() {
        let mut s = derive_stream(2, "shadow");
        let sigma = 5.7;
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| ShadowingProcess::new(sigma, 10.0).sample(Point::new(0.0, 0.0), &mut s))
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "{mean}");
    }

    fn pair_correlation(dd: f64, seed: u64) -> f64 {
        let mut s = derive_stream(seed, "shadow");
        let n = 100_000;
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let mut p = ShadowingProcess::new(4.0, 10.0);
            let a = p.sample(Point::new(0.0, 0.0), &mut s);
            let b = p.sample(Point::new(dd, 0.0), &mut s);
            sa += a;
            sb += b;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        let n = n as f64;
        let cov = sab / n - sa / n * sb / n;
        cov / ((saa / n - (sa / n).powi(2)) * (sbb / n - (sb / n).powi(2))).sqrt()
    }

    #[test]
    fn shadowing_correlation_at_decorrelation_distance() {
        let r = pair_correlation(10.0, 3);
        assert!((r - (-1f64).exp()).abs() < 0.05, "{r}");
    }

    #[test]
    fn shadowing_fully_correlated_at_zero_distance() {
        let mut s = derive_stream(4, "shadow");
        let mut p = ShadowingProcess::new(4.0, 10.0);
        let a = p.sample(Point::new(3.0, 3.0), &mut s);
        let b = p.sample(Point::new(3.0, 3.0), &mut s);
        assert_eq!(a, b);
    }

    #[test]
    fn mean_power_matches_large_scale_average() {
        // E|h|^2 = 10^(-2 PL/10) * E[10^(-2 Ω/10)] at fixed PL; with Ω ~ N(0, σ²)
        // the log-normal moment is exp(2 (σ ln10 / 10)^2).
        let sigma = 4.0;
        let pl = 20.0;
        let mut s = derive_stream(5, "channel");
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let omega = ShadowingProcess::new(sigma, 10.0).sample(Point::new(0.0, 0.0), &mut s);
            let fading = vec![complex_normal(&mut s)];
            acc += LinkGain::compose(pl, omega, fading).gain[0].norm_sqr();
        }
        let empirical = acc / n as f64;
        let k = sigma * 10f64.ln() / 10.0;
        let expected = 10f64.powf(-2.0 * pl / 10.0) * (2.0 * k * k).exp();
        assert!((empirical / expected - 1.0).abs() < 0.05, "{empirical} vs {expected}");
    }

    #[test]
    fn los_probability_decreases() {
        let c = ScenarioConfig::default();
        assert_eq!(los_probability(0.0, &c), 1.0);
        assert!(los_probability(5.0, &c) > los_probability(30.0, &c));
    }
}
