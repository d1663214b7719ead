pub fn l2_norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Rescales `g` in place to `β₀ g / max(‖g‖₂, β₀)` and returns the norm
/// before clipping.
pub fn clip_gradient(g: &mut [f64], beta0: f64) -> f64 {
    let norm = l2_norm(g);
    if norm > beta0 {
        let scale = beta0 / norm;
        for v in g.iter_mut() {
            *v *= scale;
        }
    }
    norm
}

/// RMSProp with a per-event decaying learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub decay: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    mean_square: Vec<f64>,
}

impl RmsProp {
    pub fn new(n_params: usize, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self {
            decay,
            epsilon,
            learning_rate,
            mean_square: vec![0.0; n_params],
        }
    }

    pub fn mean_square(&self) -> &[f64] {
        &self.mean_square
    }

    /// `s ← γ s + (1-γ) g²`, `w ← w − lr g / (√s + ε)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        debug_assert_eq!(params.len(), self.mean_square.len());
        for ((w, s), &g) in params.iter_mut().zip(&mut self.mean_square).zip(grad) {
            *s = self.decay * *s + (1.0 - self.decay) * g * g;
            *w -= self.learning_rate * g / (s.sqrt() + self.epsilon);
        }
    }

    /// Multiplies the learning rate by `1 - rate`.
    pub fn decay_learning_rate(&mut self, rate: f64) {
        self.learning_rate *= 1.0 - rate;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn below_threshold_unchanged() {
        let mut g = vec![3.0, 0.0];
        clip_gradient(&mut g, 5.0);
        assert_eq!(g, vec![3.0, 0.0]);
    }

    #[test]
    fn above_threshold_halved() {
        let mut g = vec![6.0, 8.0];
        assert_eq!(clip_gradient(&mut g, 5.0), 10.0);
        assert_eq!(g, vec![3.0, 4.0]);
        assert!((l2_norm(&g) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_stays_zero() {
        let mut g = vec![0.0; 4];
        clip_gradient(&mut g, 5.0);
        assert_eq!(g, vec![0.0; 4]);
    }

    proptest! {
        #[test]
        fn clipping_bounds_norm_and_keeps_direction(g in prop::collection::vec(-100.0f64..100.0, 1..20), beta in 0.1f64..10.0) {
            let mut c = g.clone();
            clip_gradient(&mut c, beta);
            prop_assert!(l2_norm(&c) <= beta * (1.0 + 1e-12));
            let n = l2_norm(&g);
            if n > 0.0 {
                let cos = g.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / (n * l2_norm(&c));
                prop_assert!((cos - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_gradient_only_decays_state() {
        let mut opt = RmsProp::new(2, 0.01, 0.9, 1e-8);
        opt.mean_square = vec![1.0, 0.5];
        let mut w = vec![0.3, -0.2];
        opt.step(&mut w, &[0.0, 0.0]);
        assert_eq!(w, vec![0.3, -0.2]);
        assert_eq!(opt.mean_square(), &[0.9, 0.45]);
    }

    #[test]
    fn single_step_closed_form() {
        let mut opt = RmsProp::new(1, 0.01, 0.9, 1e-8);
        let mut w = vec![0.0];
        opt.step(&mut w, &[1.0]);
        assert!((opt.mean_square()[0] - 0.1).abs() < 1e-15);
        let expected = -0.01 / (0.1f64.sqrt() + 1e-8);
        assert!((w[0] - expected).abs() < 1e-15);
        assert!((w[0] + 0.0316228).abs() < 1e-6);
    }

    #[test]
    fn repeated_steps_shrink() {
        let mut opt = RmsProp::new(1, 0.01, 0.9, 1e-8);
        let mut w = vec![0.0];
        opt.step(&mut w, &[1.0]);
        let first = w[0];
        opt.step(&mut w, &[1.0]);
        assert!((w[0] - first).abs() < first.abs());
    }

    #[test]
    fn learning_rate_decay() {
        let mut opt = RmsProp::new(1, 0.01, 0.9, 1e-8);
        opt.decay_learning_rate(0.015);
        assert!((opt.learning_rate - 0.00985).abs() < 1e-15);
    }
}
