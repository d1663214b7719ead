use rand::Rng;

use super::replay::Transition;
use crate::error::{Error, Result};

/// Fully connected network with rectifier hidden layers and a linear output.
///
/// All parameters live in one flat vector. Layer `i` maps `sizes[i]` inputs
/// to `sizes[i + 1]` outputs and occupies `sizes[i + 1] * sizes[i]` weights
/// (row-major, one row per output) followed by `sizes[i + 1]` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need input and output layers");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let n = Self::count_params(sizes);
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        }
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn init_uniform<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let mut model = Self::zeros(sizes);
        let mut off = 0;
        for w in model.sizes.clone().windows(2) {
            let (fan_in, out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut model.params[off..off + out * (fan_in + 1)] {
                *p = rng.random_range(-bound..=bound);
            }
            off += out * (fan_in + 1);
        }
        model
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let expected = Self::count_params(sizes);
        if params.len() != expected {
            return Err(Error::Snapshot(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    fn count_params(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Multiply-add count of one forward pass, `Σ l_{i+1} (2 l_i + 1)`.
    pub fn forward_ops(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * (2 * w[0] + 1)).sum()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::InputLength {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(())
    }

    /// Action values for one context.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut acts = Vec::new();
        self.forward_into(x, &mut acts);
        Ok(acts.pop().unwrap())
    }

    /// Fills `acts` with the post-activation output of every layer; the last
    /// entry is the linear output.
    fn forward_into(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        let n_layers = self.sizes.len() - 1;
        let mut off = 0;
        let mut input = x.to_vec();
        for (li, w) in self.sizes.windows(2).enumerate() {
            let (fan_in, out) = (w[0], w[1]);
            let weights = &self.params[off..off + out * fan_in];
            let biases = &self.params[off + out * fan_in..off + out * (fan_in + 1)];
            let hidden = li + 1 < n_layers;
            let next: Vec<f64> = (0..out)
                .map(|o| {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    let z = biases[o] + row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>();
                    if hidden {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
            off += out * (fan_in + 1);
            acts.push(std::mem::replace(&mut input, next));
        }
        acts.push(input);
    }
}

/// Mean squared residual between rewards and the values of the taken actions.
pub fn loss(model: &Mlp, batch: &[&Transition]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut acc = 0.0;
    for t in batch {
        let v = model.forward(&t.context)?;
        let r = t.reward - v[t.action];
        acc += r * r;
    }
    Ok(acc / batch.len() as f64)
}

/// Loss and its exact gradient with respect to every parameter.
pub fn loss_and_gradient(model: &Mlp, batch: &[&Transition]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let b = batch.len() as f64;
    let sizes = &model.sizes;
    let n_layers = sizes.len() - 1;
    let mut offsets = Vec::with_capacity(n_layers);
    let mut off = 0;
    for w in sizes.windows(2) {
        offsets.push(off);
        off += w[1] * (w[0] + 1);
    }

    let mut grad = vec![0.0; model.params.len()];
    let mut acts = Vec::with_capacity(n_layers + 1);
    let mut total = 0.0;
    for t in batch {
        model.check_input(&t.context)?;
        if t.action >= model.output_size() {
            return Err(Error::PatternOutOfRange {
                index: t.action,
                channels: model.input_size(),
            });
        }
        model.forward_into(&t.context, &mut acts);
        let residual = t.reward - acts[n_layers][t.action];
        total += residual * residual;

        // dJ/dV for the taken action only.
        let mut delta = vec![0.0; model.output_size()];
        delta[t.action] = -2.0 * residual / b;

        for li in (0..n_layers).rev() {
            let (fan_in, out) = (sizes[li], sizes[li + 1]);
            let base = offsets[li];
            let input = &acts[li];
            for o in 0..out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[base + o * fan_in..base + (o + 1) * fan_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[base + out * fan_in + o] += d;
            }
            if li > 0 {
                let weights = &model.params[base..base + out * fan_in];
                let prev: Vec<f64> = (0..fan_in)
                    .map(|i| {
                        // rectifier derivative, taken as 0 at 0
                        if input[i] > 0.0 {
                            (0..out).map(|o| weights[o * fan_in + i] * delta[o]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                delta = prev;
            }
        }
    }
    Ok((total / b, grad))
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"AMLP";
const SNAPSHOT_VERSION: u32 = 1;

/// Weight snapshot: little-endian header (magic, version, layer sizes,
/// update and event counters, learning rate) followed by the flat parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub model: Mlp,
    pub updates: u64,
    pub events: u64,
    pub learning_rate: f64,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.model.sizes();
        let mut out = Vec::with_capacity(40 + 4 * sizes.len() + 8 * self.model.param_count());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for &s in sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.updates.to_le_bytes());
        out.extend_from_slice(&self.events.to_le_bytes());
        out.extend_from_slice(&self.learning_rate.to_le_bytes());
        for p in self.model.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let n = cur.u32()? as usize;
        if n < 2 {
            return Err(Error::Snapshot(format!("{n} layers")));
        }
        let sizes = (0..n).map(|_| cur.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        if sizes.contains(&0) {
            return Err(Error::Snapshot("zero layer size".into()));
        }
        let updates = cur.u64()?;
        let events = cur.u64()?;
        let learning_rate = f64::from_bits(cur.u64()?);
        let count = Mlp::count_params(&sizes);
        let params = (0..count).map(|_| cur.u64().map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
        if cur.pos != bytes.len() {
            return Err(Error::Snapshot("trailing bytes".into()));
        }
        Ok(Self {
            model: Mlp::from_params(&sizes, params)?,
            updates,
            events,
            learning_rate,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Snapshot("truncated".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::derive_stream;
    use proptest::prelude::*;

    fn t(context: Vec<f64>, action: usize, reward: f64) -> Transition {
        Transition { context, action, reward }
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = Mlp::zeros(&[3, 1, 1, 8]);
        assert_eq!(m.forward(&[0.2, 0.5, 0.9]).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn dead_hidden_unit_passes_output_biases() {
        // [1, 1, 2]: pre-activation = -1 regardless of input 0.
        let mut m = Mlp::zeros(&[1, 1, 2]);
        // layer 0: w, b ; layer 1: w0, w1, b0, b1
        m.params_mut().copy_from_slice(&[0.7, -1.0, 3.0, -2.0, 0.25, -0.5]);
        assert_eq!(m.forward(&[0.0]).unwrap(), vec![0.25, -0.5]);
    }

    #[test]
    fn hand_evaluated_two_layer_model() {
        // [1, 2, 2], x = 0.5
        // hidden: relu(0.4*0.5 + 0.1) = 0.3, relu(-0.6*0.5 + 0.2) = relu(-0.1) = 0
        // out0 = 1.5*0.3 + (-2.0)*0 + 0.05 = 0.5
        // out1 = -0.7*0.3 + 0.9*0 - 0.3 = -0.51
        let m = Mlp::from_params(&[1, 2, 2], vec![0.4, -0.6, 0.1, 0.2, 1.5, -2.0, -0.7, 0.9, 0.05, -0.3]).unwrap();
        let v = m.forward(&[0.5]).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12);
        assert!((v[1] + 0.51).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let m = Mlp::zeros(&[2, 1, 4]);
        assert!(matches!(m.forward(&[f64::NAN, 0.0]), Err(Error::NonFiniteInput)));
        assert!(matches!(m.forward(&[0.0]), Err(Error::InputLength { .. })));
    }

    #[test]
    fn counts_follow_layer_formulas() {
        let m = Mlp::zeros(&[2, 1, 1, 4]);
        assert_eq!(m.param_count(), 3 + 2 + 4 * 2);
        assert_eq!(m.forward_ops(), 20);
    }

    #[test]
    fn loss_examples() {
        let m = Mlp::zeros(&[1, 1, 2]);
        assert!(matches!(loss(&m, &[]), Err(Error::EmptyBatch)));
        let a = t(vec![0.3], 0, 0.0);
        assert_eq!(loss(&m, &[&a]).unwrap(), 0.0);
        let b = t(vec![0.3], 1, 1.0);
        assert_eq!(loss(&m, &[&b]).unwrap(), 1.0);
        let c = t(vec![0.3], 0, -1.0);
        assert_eq!(loss(&m, &[&b, &c]).unwrap(), 1.0);
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let mut rng = derive_stream(1, "init");
        let m = Mlp::init_uniform(&[2, 3, 4], &mut rng);
        let x = vec![0.1, 0.7];
        let v = m.forward(&x).unwrap();
        let s = t(x, 2, v[2]);
        let (l, g) = loss_and_gradient(&m, &[&s]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn untaken_outputs_get_no_gradient() {
        let mut rng = derive_stream(2, "init");
        let sizes = [2, 3, 4];
        let m = Mlp::init_uniform(&sizes, &mut rng);
        let s = t(vec![0.4, 0.9], 1, 1.0);
        let (_, g) = loss_and_gradient(&m, &[&s]).unwrap();
        let base = 3 * 3; // first layer params
        for o in [0usize, 2, 3] {
            for i in 0..3 {
                assert_eq!(g[base + o * 3 + i], 0.0);
            }
            assert_eq!(g[base + 4 * 3 + o], 0.0);
        }
    }

    #[test]
    fn loss_agrees_with_gradient_pass() {
        let mut rng = derive_stream(3, "init");
        let m = Mlp::init_uniform(&[3, 2, 2, 8], &mut rng);
        let batch: Vec<_> = (0..10)
            .map(|i| t(vec![0.1 * i as f64, 0.3, 0.9 - 0.05 * i as f64], i % 8, if i % 3 == 0 { 1.0 } else { -1.0 }))
            .collect();
        let refs: Vec<_> = batch.iter().collect();
        let (l, _) = loss_and_gradient(&m, &refs).unwrap();
        assert!((l - loss(&m, &refs).unwrap()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn snapshot_round_trip(seed in 0u64..1000, m in 1usize..4, h in 1usize..5, layers in 1usize..3,
                               updates in any::<u64>(), events in any::<u64>()) {
            let mut sizes = vec![m];
            sizes.extend(std::iter::repeat_n(h, layers));
            sizes.push(1 << m);
            let snap = Snapshot {
                model: Mlp::init_uniform(&sizes, &mut derive_stream(seed, "init")),
                updates,
                events,
                learning_rate: 0.01 * (seed as f64 + 1.0),
            };
            prop_assert_eq!(Snapshot::from_bytes(&snap.to_bytes()).unwrap(), snap);
        }
    }

    #[test]
    fn snapshot_is_little_endian_with_header() {
        let snap = Snapshot { model: Mlp::zeros(&[1, 1, 2]), updates: 3, events: 2, learning_rate: 0.5 };
        let b = snap.to_bytes();
        assert_eq!(&b[..4], b"AMLP");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &3u32.to_le_bytes());
        assert_eq!(&b[12..24], &[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(b.len(), 4 + 4 + 4 + 12 + 8 + 8 + 8 + 6 * 8);
        assert!(Snapshot::from_bytes(&b[..b.len() - 1]).is_err());
    }
}
