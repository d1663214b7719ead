//! Fast oracle checks run by the `selftest` subcommand.

use rand::Rng;

use crate::analytics::{
    complexity_bounds, deadline_probability, deadline_probability_via_absorption, expanded_lower_bound,
    variant_lower_bound, stationary_in_time_probability, success_probability_bruteforce, AccessDistribution,
    DtmcSpec,
};
use crate::engine::resolve_collisions;
use crate::nn::{clip_gradient, l2_norm, loss, loss_and_gradient, Mlp, Transition};
use crate::policy::{EpsilonSchedule, TransmissionPattern};
use crate::scenario::{derive_stream, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

type CheckFn = fn() -> Result<(), String>;

const CHECKS: [(&str, CheckFn); 7] = [
    ("collision_indicator", collision_indicator),
    ("deadline_routes_agree", deadline_routes_agree),
    ("stationary_closed_form", stationary_closed_form),
    ("bruteforce_two_laps", bruteforce_two_laps),
    ("gradient_finite_difference", gradient_finite_difference),
    ("clip_and_epsilon", clip_and_epsilon),
    ("complexity_identities", complexity_identities),
];

pub fn run_all() -> Vec<Check> {
    CHECKS
        .iter()
        .map(|&(name, f)| Check { name, outcome: f() })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn collision_indicator() -> Result<(), String> {
    for m in 1..=2usize {
        let width = 1usize << m;
        for n in 1..=3usize {
            for code in 0..width.pow(n as u32) {
                let idx: Vec<usize> = (0..n).map(|k| code / width.pow(k as u32) % width).collect();
                let pats: Vec<_> = idx
                    .iter()
                    .map(|&i| TransmissionPattern::from_index(i, m).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
                let expected = (0..m).any(|ch| idx.iter().filter(|&&i| i >> ch & 1 == 1).count() == 1);
                ensure(resolve_collisions(&pats, m).success() == expected, || {
                    format!("M={m} patterns {idx:?}")
                })?;
            }
        }
    }
    Ok(())
}

fn deadline_routes_agree() -> Result<(), String> {
    let mut s = derive_stream(0, "selftest/dtmc");
    for _ in 0..20 {
        let d = s.random_range(0..=10usize);
        let ps: Vec<f64> = (0..=d).map(|_| s.random()).collect();
        let dtmc = DtmcSpec::new(ps).map_err(|e| e.to_string())?;
        let (a, b) = deadline_probability(&dtmc);
        let (c, _) = deadline_probability_via_absorption(&dtmc);
        ensure((a - c).abs() < 1e-10 && (a + b - 1.0).abs() < 1e-12, || format!("{a} vs {c}"))?;
    }
    Ok(())
}

fn stationary_closed_form() -> Result<(), String> {
    for d in 0..=10u32 {
        for ps in [0.0, 0.1, 0.5, 0.99] {
            let (a, _) = deadline_probability(&DtmcSpec::stationary(ps, d).map_err(|e| e.to_string())?);
            let closed = stationary_in_time_probability(ps, d);
            ensure((a - closed).abs() < 1e-12, || format!("P_s={ps} D={d}: {a} vs {closed}"))?;
        }
    }
    Ok(())
}

fn bruteforce_two_laps() -> Result<(), String> {
    let ps = success_probability_bruteforce(&[1.0, 1.0], &AccessDistribution::uniform(2, 1)).map_err(|e| e.to_string())?;
    ensure((ps - 0.5).abs() < 1e-15, || format!("got {ps}, expected 0.5"))
}

fn gradient_finite_difference() -> Result<(), String> {
    let mut s = derive_stream(0, "selftest/grad");
    for _ in 0..10 {
        let m = s.random_range(1..=3usize);
        let sizes = [m, s.random_range(1..=4), 1 << m];
        let model = Mlp::init_uniform(&sizes, &mut s);
        let batch: Vec<Transition> = (0..4)
            .map(|_| Transition {
                context: (0..m).map(|_| s.random()).collect(),
                action: s.random_range(0..1 << m),
                reward: if s.random::<bool>() { 1.0 } else { -1.0 },
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let (_, g) = loss_and_gradient(&model, &refs).map_err(|e| e.to_string())?;
        let h = 1e-6;
        for (i, &gi) in g.iter().enumerate() {
            let mut up = model.clone();
            up.params_mut()[i] += h;
            let mut down = model.clone();
            down.params_mut()[i] -= h;
            let fd = (loss(&up, &refs).map_err(|e| e.to_string())? - loss(&down, &refs).map_err(|e| e.to_string())?)
                / (2.0 * h);
            let rel = (fd - gi).abs() / fd.abs().max(gi.abs()).max(1e-6);
            ensure(rel < 1e-4, || format!("param {i}: analytic {gi} vs numeric {fd}"))?;
        }
    }
    Ok(())
}

fn clip_and_epsilon() -> Result<(), String> {
    let mut s = derive_stream(0, "selftest/clip");
    for _ in 0..100 {
        let mut g: Vec<f64> = (0..20).map(|_| (s.random::<f64>() - 0.5) * 100.0).collect();
        clip_gradient(&mut g, 5.0);
        ensure(l2_norm(&g) <= 5.0 + 1e-12, || format!("norm {}", l2_norm(&g)))?;
    }
    let mut eps = EpsilonSchedule::from_config(&ScenarioConfig::default());
    for _ in 0..180 {
        eps.advance();
    }
    ensure(eps.value() == 0.1, || format!("epsilon after 180 events = {}", eps.value()))?;
    eps.advance();
    ensure(eps.value() == 0.1, || "epsilon fell below its floor".into())
}

fn complexity_identities() -> Result<(), String> {
    for m in 1..=8u32 {
        let p = 1usize << m;
        let c = complexity_bounds(m, 30 * p as u64, &[m as usize, 1, 1, p]).map_err(|e| e.to_string())?;
        ensure(c.upper - c.lower == p as u64 - 1, || format!("M={m}"))?;
        ensure(c.lower == expanded_lower_bound(m), || format!("expansion at M={m}"))?;
    }
    ensure(variant_lower_bound(2) == 2423, || "variant polynomial at M=2".into())
}
