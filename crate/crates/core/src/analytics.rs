//! Exact small-instance oracles: shared-message success probability by
//! enumeration, deadline probabilities of the age chain, exhaustive search
//! over stationary access distributions, and per-decision complexity counts.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

const ROW_TOLERANCE: f64 = 1e-12;

/// Largest instance accepted by [`success_probability_bruteforce`].
pub const BRUTEFORCE_MAX_LAPS: usize = 6;
pub const BRUTEFORCE_MAX_CHANNELS: usize = 3;

/// Per-LAP distributions over the `2^M` transmission patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessDistribution {
    channels: usize,
    rows: Vec<Vec<f64>>,
}

impl AccessDistribution {
    pub fn new(channels: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = 1usize << channels;
        for (row, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(Error::InputLength {
                    expected: width,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid("psi", format!("row {row} has an entry outside [0, 1]")));
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::RowSum { row, sum });
            }
        }
        Ok(Self { channels, rows })
    }

    /// Every LAP picks uniformly among all patterns.
    pub fn uniform(laps: usize, channels: usize) -> Self {
        let width = 1usize << channels;
        Self {
            channels,
            rows: vec![vec![1.0 / width as f64; width]; laps],
        }
    }

    /// Every LAP plays one fixed pattern.
    pub fn deterministic(channels: usize, patterns: &[usize]) -> Result<Self> {
        let width = 1usize << channels;
        let rows = patterns
            .iter()
            .map(|&b| {
                if b >= width {
                    return Err(Error::PatternOutOfRange { index: b, channels });
                }
                let mut r = vec![0.0; width];
                r[b] = 1.0;
                Ok(r)
            })
            .collect::<Result<_>>()?;
        Ok(Self { channels, rows })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn laps(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Probability that at least one channel carries exactly one transmitter,
/// with LAP `n` active w.p. `p[n]` and, when active, playing pattern `b`
/// w.p. `psi[n][b]`.
pub fn success_probability_bruteforce(p: &[f64], psi: &AccessDistribution) -> Result<f64> {
    let n = p.len();
    let m = psi.channels;
    if n != psi.laps() {
        return Err(Error::InputLength {
            expected: psi.laps(),
            got: n,
        });
    }
    if n > BRUTEFORCE_MAX_LAPS || m > BRUTEFORCE_MAX_CHANNELS {
        return Err(Error::TooLarge(format!(
            "enumeration supports N ≤ {BRUTEFORCE_MAX_LAPS}, M ≤ {BRUTEFORCE_MAX_CHANNELS}; got N={n}, M={m}"
        )));
    }
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("p", "activation probabilities must lie in [0, 1]"));
    }
    let width = 1usize << m;
    // Per-LAP state: 0 = inactive, b + 1 = active with pattern b.
    let states = width + 1;
    let weight = |lap: usize, s: usize| {
        if s == 0 {
            1.0 - p[lap]
        } else {
            p[lap] * psi.rows[lap][s - 1]
        }
    };
    let mut total = 0.0;
    let mut choice = vec![0usize; n];
    let combos = states.pow(n as u32);
    for _ in 0..combos {
        let mut w = 1.0;
        for (lap, &s) in choice.iter().enumerate() {
            w *= weight(lap, s);
            if w == 0.0 {
                break;
            }
        }
        if w != 0.0 && delivers(&choice, m) {
            total += w;
        }
        for s in choice.iter_mut() {
            *s += 1;
            if *s < states {
                break;
            }
            *s = 0;
        }
    }
    Ok(total)
}

fn delivers(choice: &[usize], m: usize) -> bool {
    (0..m).any(|ch| {
        choice
            .iter()
            .filter(|&&s| s > 0 && ((s - 1) >> ch) & 1 == 1)
            .count()
            == 1
    })
}

/// Absorbing chain over alarm ages `0..=D` with absorbing states
/// S (delivered) and F (deadline violated).
#[derive(Debug, Clone, PartialEq)]
pub struct DtmcSpec {
    ps: Vec<f64>,
}

impl DtmcSpec {
    /// `ps[d]` is the delivery probability at age `d`; `D = ps.len() - 1`.
    pub fn new(ps: Vec<f64>) -> Result<Self> {
        if ps.is_empty() {
            return Err(Error::Empty("ps"));
        }
        if ps.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("ps", "success probabilities must lie in [0, 1]"));
        }
        Ok(Self { ps })
    }

    pub fn stationary(ps: f64, deadline: u32) -> Result<Self> {
        Self::new(vec![ps; deadline as usize + 1])
    }

    pub fn deadline(&self) -> usize {
        self.ps.len() - 1
    }

    pub fn success_probabilities(&self) -> &[f64] {
        &self.ps
    }

    /// Transient block: age `d` advances to `d + 1` w.p. `1 - P_s(d)`.
    pub fn transient(&self) -> DMatrix<f64> {
        let k = self.ps.len();
        let mut q = DMatrix::zeros(k, k);
        for d in 0..k - 1 {
            q[(d, d + 1)] = 1.0 - self.ps[d];
        }
        q
    }

    /// Absorbing block with columns (S, F).
    pub fn absorbing(&self) -> DMatrix<f64> {
        let k = self.ps.len();
        let mut r = DMatrix::zeros(k, 2);
        for d in 0..k {
            r[(d, 0)] = self.ps[d];
        }
        r[(k - 1, 1)] = 1.0 - self.ps[k - 1];
        r
    }

    /// Full one-step matrix over `0..=D, S, F`.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let k = self.ps.len();
        let mut p = DMatrix::zeros(k + 2, k + 2);
        p.view_mut((0, 0), (k, k)).copy_from(&self.transient());
        p.view_mut((0, k), (k, 2)).copy_from(&self.absorbing());
        p[(k, k)] = 1.0;
        p[(k + 1, k + 1)] = 1.0;
        p
    }
}

/// `(P_≤D, P_>D)` by the product form over ages.
pub fn deadline_probability(dtmc: &DtmcSpec) -> (f64, f64) {
    let mut survive = 1.0;
    let mut in_time = 0.0;
    for &ps in &dtmc.ps {
        in_time += ps * survive;
        survive *= 1.0 - ps;
    }
    (in_time, survive)
}

/// `(P_≤D, P_>D)` from the absorption probabilities `(I - Q)^{-1} R` of the
/// chain started at age 0.
pub fn deadline_probability_via_absorption(dtmc: &DtmcSpec) -> (f64, f64) {
    let k = dtmc.ps.len();
    let a = DMatrix::<f64>::identity(k, k) - dtmc.transient();
    // I - Q is unit upper triangular, so the factorisation never fails.
    let b = a
        .lu()
        .solve(&dtmc.absorbing())
        .expect("I - Q is nonsingular");
    (b[(0, 0)], b[(0, 1)])
}

/// `1 - (1 - P_s)^{D+1}`.
pub fn stationary_in_time_probability(ps: f64, deadline: u32) -> f64 {
    1.0 - (1.0 - ps).powi(deadline as i32 + 1)
}

pub const GRID_STEP: f64 = 0.25;
pub const GRID_MAX_LAPS: usize = 3;
pub const GRID_MAX_CHANNELS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub psi: AccessDistribution,
    pub success_probability: f64,
    pub violation_probability: f64,
}

/// Exhaustive search over access distributions whose entries are multiples
/// of [`GRID_STEP`], minimising `(1 - P_s)^{D+1}`. Ties keep the
/// lexicographically smallest candidate.
pub fn best_stationary_psi(p: &[f64], channels: usize, deadline: u32) -> Result<GridOptimum> {
    if p.len() > GRID_MAX_LAPS || channels > GRID_MAX_CHANNELS {
        return Err(Error::TooLarge(format!(
            "grid search supports N ≤ {GRID_MAX_LAPS}, M ≤ {GRID_MAX_CHANNELS}; got N={}, M={channels}",
            p.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::Empty("p"));
    }
    let rows = grid_rows(1usize << channels, (1.0 / GRID_STEP).round() as usize);
    let mut idx = vec![0usize; p.len()];
    let mut best: Option<GridOptimum> = None;
    loop {
        let psi = AccessDistribution {
            channels,
            rows: idx.iter().map(|&i| rows[i].clone()).collect(),
        };
        let ps = success_probability_bruteforce(p, &psi)?;
        let violation = (1.0 - ps).powi(deadline as i32 + 1);
        if best
            .as_ref()
            .is_none_or(|b| violation < b.violation_probability - ROW_TOLERANCE)
        {
            best = Some(GridOptimum {
                psi,
                success_probability: ps,
                violation_probability: violation,
            });
        }
        // Odometer with the first LAP as the most significant digit.
        let mut pos = idx.len();
        loop {
            if pos == 0 {
                return Ok(best.expect("at least one candidate"));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < rows.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// All distributions over `width` outcomes in steps of `1/units`, in
/// ascending lexicographic order.
fn grid_rows(width: usize, units: usize) -> Vec<Vec<f64>> {
    fn fill(width: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == width - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            fill(width, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(width, units, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|r| r.into_iter().map(|k| k as f64 / units as f64).collect())
        .collect()
}

/// Per-decision operation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Complexity {
    /// One forward pass: `Σ l_{i+1} (2 l_i + 1)`.
    pub forward: u64,
    /// `(B + 1) ζ₁ + 3`.
    pub lower: u64,
    /// `lower + 2^M - 1`.
    pub upper: u64,
}

pub fn complexity_bounds(channels: u32, minibatch: u64, layers: &[usize]) -> Result<Complexity> {
    let patterns = 1usize
        .checked_shl(channels)
        .filter(|_| channels < 63)
        .ok_or_else(|| invalid("channels", "too many channels"))?;
    if layers.len() < 2 || layers[0] != channels as usize || *layers.last().unwrap() != patterns {
        return Err(Error::LayerVector(format!(
            "expected [{channels}, .., {patterns}], got {layers:?}"
        )));
    }
    let forward: u64 = layers
        .windows(2)
        .map(|w| w[1] as u64 * (2 * w[0] as u64 + 1))
        .sum();
    let lower = (minibatch + 1) * forward + 3;
    Ok(Complexity {
        forward,
        lower,
        upper: lower + patterns as u64 - 1,
    })
}

/// Variant of [`expanded_lower_bound`] with a `2^M` term in place of `2M`:
/// `90·4^M + (123 + 60M)·2^M + 2^M + 7`. The two agree only at `M = 2`.
pub fn variant_lower_bound(channels: u32) -> u64 {
    let m = u64::from(channels);
    let p = 1u64 << channels;
    90 * p * p + (123 + 60 * m) * p + p + 7
}

/// Expansion of `(B + 1) ζ₁ + 3` for `l = [M, 1, 1, 2^M]` and `B = 30 · 2^M`:
/// `90·4^M + (123 + 60M)·2^M + 2M + 7`.
pub fn expanded_lower_bound(channels: u32) -> u64 {
    let m = u64::from(channels);
    let p = 1u64 << channels;
    90 * p * p + (123 + 60 * m) * p + 2 * m + 7
}
