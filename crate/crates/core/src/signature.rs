//! Pilot aggregation at the CAP and the contention-signature broadcast.
//!
//! Uplink: `y_m = Σ_n √snr · h_{n,m} · x_{n,m} + σ_m`.
//! Downlink: `y_{n,m} = √snr · h_{n,m} · y_m + σ̂_{n,m}`, reusing the uplink
//! gain of the same slot.
//!
//! Passing `None` as the noise stream produces the noiseless signal.

use num_complex::Complex64;

use crate::channel::complex_normal;
use crate::scenario::Stream;

fn noise(stream: &mut Option<&mut Stream>) -> Complex64 {
    match stream {
        Some(s) => complex_normal(s),
        None => Complex64::new(0.0, 0.0),
    }
}

/// Aggregated pilot signal received by the CAP.
///
/// `gains[k]` and `pilots[k]` belong to the k-th active LAP; every vector has
/// length `n_channels`.
pub fn aggregate_pilots(
    n_channels: usize,
    gains: &[&[Complex64]],
    pilots: &[&[Complex64]],
    snr: f64,
    mut noise_stream: Option<&mut Stream>,
) -> Vec<Complex64> {
    debug_assert_eq!(gains.len(), pilots.len());
    let amp = snr.sqrt();
    (0..n_channels)
        .map(|m| {
            let sum: Complex64 = gains.iter().zip(pilots).map(|(h, x)| h[m] * x[m]).sum();
            sum * amp + noise(&mut noise_stream)
        })
        .collect()
}

/// Contention signature received by one LAP.
pub fn broadcast_cs(
    y: &[Complex64],
    gain: &[Complex64],
    snr: f64,
    mut noise_stream: Option<&mut Stream>,
) -> Vec<Complex64> {
    let amp = snr.sqrt();
    y.iter()
        .zip(gain)
        .map(|(ym, hm)| hm * ym * amp + noise(&mut noise_stream))
        .collect()
}

/// Per-channel magnitudes scaled by `1 / (1 + max magnitude)`; every entry
/// lies in `[0, 1)`.
pub fn featurize(y_n: &[Complex64]) -> Vec<f64> {
    let mags: Vec<f64> = y_n.iter().map(|c| c.norm()).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    let scale = 1.0 / (1.0 + max);
    mags.into_iter().map(|m| m * scale).collect()
}
