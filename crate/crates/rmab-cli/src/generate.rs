//! Synthetic cohort generators and the matrix perturbation scheme.
//!
//! Every generator is seed-deterministic and only ever emits models that
//! pass strict-natural validation. Rejection sampling shares a global
//! attempt budget so an infeasible spec fails instead of spinning.

use std::str::FromStr;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use thiserror::Error;

use rmab_core::belief::forward_threshold_condition;
use rmab_core::model::{ModelError, TransitionModel};

const REJECTION_BUDGET: u64 = 1_000_000;

/// Clamp bound for perturbed probabilities.
pub const PERTURB_EPS: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("fraction {0} is not in [0,1]")]
    BadFraction(f64),
    #[error("window start {0} must lie in (0, 0.9) so probabilities stay inside (0,1)")]
    BadWindow(f64),
    #[error("sample count must be at least 1")]
    EmptyCohort,
    #[error("rejection sampling exhausted {REJECTION_BUDGET} attempts; spec looks infeasible")]
    RejectionBudgetExhausted,
    #[error("perturbed model invalid: {0}")]
    PerturbedInvalid(#[from] ModelError),
    #[error("cannot parse generator spec `{spec}`: {reason}")]
    BadSpec { spec: String, reason: String },
}

/// Cohort generator families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    /// Uniform(0,1)^4 rejection-sampled to the strict-natural region.
    UniformNatural,
    /// A `fraction` of arms recover on their own regardless of action;
    /// the rest collapse without attention. Acting looks immediately
    /// attractive on the former, which traps one-step-greedy policies.
    SelfCorrectingMix { fraction: f64 },
    /// All four probabilities drawn from `[x, x + 0.1]`; `x` near 0.5
    /// maximizes latent-state entropy.
    EntropySweep { x: f64 },
    /// A `fraction` of arms respond to intervention almost exclusively
    /// in the good state (passive rows and the bad-state active entry
    /// near 0.3, good-state active entry near 0.7).
    StateOneResponsive { fraction: f64 },
    /// Mixes arms that pass the forward threshold condition at `beta`
    /// with arms that fail it, at the requested `fraction` of passing
    /// arms.
    ThresholdOptimalMix { fraction: f64, beta: f64 },
}

impl FromStr for GeneratorSpec {
    type Err = GenerateError;

    /// Accepts `name` or `name:key=value,key=value`, e.g.
    /// `self-correcting-mix:fraction=0.6`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| GenerateError::BadSpec {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), a),
            None => (s.trim(), ""),
        };
        let mut fraction = None;
        let mut x = None;
        let mut beta = None;
        for pair in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| bad(&format!("`{pair}` is not key=value")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| bad(&format!("`{value}` is not a number")))?;
            match key.trim() {
                "fraction" | "frac" => fraction = Some(value),
                "x" => x = Some(value),
                "beta" => beta = Some(value),
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        let need_fraction = || fraction.ok_or_else(|| bad("missing fraction"));
        match name {
            "uniform-natural" | "uniform_natural" => Ok(GeneratorSpec::UniformNatural),
            "self-correcting-mix" | "self_correcting_mix" => Ok(GeneratorSpec::SelfCorrectingMix {
                fraction: need_fraction()?,
            }),
            "entropy-sweep" | "entropy_sweep" => Ok(GeneratorSpec::EntropySweep {
                x: x.ok_or_else(|| bad("missing x"))?,
            }),
            "state-one-responsive" | "state_one_responsive" => {
                Ok(GeneratorSpec::StateOneResponsive {
                    fraction: need_fraction()?,
                })
            }
            "threshold-optimal-mix" | "threshold_optimal_mix" => {
                Ok(GeneratorSpec::ThresholdOptimalMix {
                    fraction: need_fraction()?,
                    beta: beta.ok_or_else(|| bad("missing beta"))?,
                })
            }
            other => Err(bad(&format!("unknown generator `{other}`"))),
        }
    }
}

struct Sampler {
    rng: ChaCha12Rng,
    attempts: u64,
}

impl Sampler {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
            attempts: 0,
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    fn charge(&mut self) -> Result<(), GenerateError> {
        self.attempts += 1;
        if self.attempts > REJECTION_BUDGET {
            Err(GenerateError::RejectionBudgetExhausted)
        } else {
            Ok(())
        }
    }

    fn sample_until<F>(&mut self, mut draw: F) -> Result<TransitionModel, GenerateError>
    where
        F: FnMut(&mut Self) -> Result<TransitionModel, ModelError>,
    {
        loop {
            self.charge()?;
            if let Ok(model) = draw(self) {
                return Ok(model);
            }
        }
    }

    fn uniform_natural(&mut self) -> Result<TransitionModel, GenerateError> {
        self.sample_until(|s| {
            TransitionModel::strict_natural(s.uniform(), s.uniform(), s.uniform(), s.uniform())
        })
    }

    fn window(&mut self, x: f64) -> Result<TransitionModel, GenerateError> {
        self.sample_until(|s| {
            TransitionModel::strict_natural(
                s.uniform_in(x, x + 0.1),
                s.uniform_in(x, x + 0.1),
                s.uniform_in(x, x + 0.1),
                s.uniform_in(x, x + 0.1),
            )
        })
    }

    fn jittered_template(&mut self, template: [f64; 4]) -> Result<TransitionModel, GenerateError> {
        self.sample_until(|s| {
            let jitter = |s: &mut Self, v: f64| {
                (v + s.uniform_in(-0.02, 0.02)).clamp(PERTURB_EPS, 1.0 - PERTURB_EPS)
            };
            let p = template.map(|v| jitter(s, v));
            // map() above borrows s per element sequentially
            TransitionModel::strict_natural(p[0], p[1], p[2], p[3])
        })
    }

    fn state_one_responsive(&mut self) -> Result<TransitionModel, GenerateError> {
        self.sample_until(|s| {
            let mut low = [
                s.uniform_in(0.3, 0.32),
                s.uniform_in(0.3, 0.32),
                s.uniform_in(0.3, 0.32),
            ];
            low.sort_by(f64::total_cmp);
            // Smallest becomes p01p so both natural orderings hold.
            TransitionModel::strict_natural(low[0], low[1], low[2], s.uniform_in(0.7, 0.72))
        })
    }
}

/// Recovers quickly from the bad state no matter what the planner does:
/// fast mixing (p11p - p01p = 0.05) means the one-step belief gain of
/// 0.15 that a greedy ranking sees is also all the value there is.
const SELF_CORRECTING_TEMPLATE: [f64; 4] = [0.70, 0.75, 0.85, 0.90];
/// Rarely recovers once bad and barely shows a one-step action gain
/// (gaps of 0.03), but its states persist (p11p - p01p = 0.95), so each
/// action compounds for ~20 rounds. One-step-greedy rankings skip these
/// arms entirely; index policies price the persistence.
const NON_RECOVERABLE_TEMPLATE: [f64; 4] = [0.01, 0.96, 0.04, 0.99];

fn split(count: usize, fraction: f64) -> Result<(usize, usize), GenerateError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(GenerateError::BadFraction(fraction));
    }
    let first = (fraction * count as f64).round() as usize;
    Ok((first.min(count), count - first.min(count)))
}

/// Draws `count` strict-natural models per the generator spec.
pub fn generate_cohort(
    spec: GeneratorSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<TransitionModel>, GenerateError> {
    if count == 0 {
        return Err(GenerateError::EmptyCohort);
    }
    let mut sampler = Sampler::new(seed);
    let mut cohort = Vec::with_capacity(count);
    match spec {
        GeneratorSpec::UniformNatural => {
            for _ in 0..count {
                cohort.push(sampler.uniform_natural()?);
            }
        }
        GeneratorSpec::EntropySweep { x } => {
            if !(0.0..0.9).contains(&x) || x == 0.0 {
                return Err(GenerateError::BadWindow(x));
            }
            for _ in 0..count {
                cohort.push(sampler.window(x)?);
            }
        }
        GeneratorSpec::SelfCorrectingMix { fraction } => {
            let (self_correcting, rest) = split(count, fraction)?;
            for _ in 0..self_correcting {
                cohort.push(sampler.jittered_template(SELF_CORRECTING_TEMPLATE)?);
            }
            for _ in 0..rest {
                cohort.push(sampler.jittered_template(NON_RECOVERABLE_TEMPLATE)?);
            }
        }
        GeneratorSpec::StateOneResponsive { fraction } => {
            let (responsive, rest) = split(count, fraction)?;
            for _ in 0..responsive {
                cohort.push(sampler.state_one_responsive()?);
            }
            for _ in 0..rest {
                cohort.push(sampler.uniform_natural()?);
            }
        }
        GeneratorSpec::ThresholdOptimalMix { fraction, beta } => {
            let (passing, failing) = split(count, fraction)?;
            let mut pass_bucket = Vec::with_capacity(passing);
            let mut fail_bucket = Vec::with_capacity(failing);
            while pass_bucket.len() < passing || fail_bucket.len() < failing {
                let model = sampler.uniform_natural()?;
                let passes = forward_threshold_condition(&model, beta)
                    .map_err(|e| GenerateError::BadSpec {
                        spec: format!("threshold-optimal-mix beta={beta}"),
                        reason: e.to_string(),
                    })?;
                if passes && pass_bucket.len() < passing {
                    pass_bucket.push(model);
                } else if !passes && fail_bucket.len() < failing {
                    fail_bucket.push(model);
                }
            }
            cohort.extend(pass_bucket);
            cohort.extend(fail_bucket);
        }
    }
    Ok(cohort)
}

/// Splits one average transition row pair `(q01, q11)` into passive and
/// active matrices: the passive entries are reduced by `(d1, d2)`, the
/// active entries raised by `(d3, d4)`, all clamped to
/// `[eps, 1 - eps]`, and the result must be strict-natural.
pub fn perturb_matrix(
    base: (f64, f64),
    deltas: (f64, f64, f64, f64),
    eps: f64,
) -> Result<TransitionModel, GenerateError> {
    let clamp = |v: f64| v.clamp(eps, 1.0 - eps);
    let (q01, q11) = base;
    let (d1, d2, d3, d4) = deltas;
    Ok(TransitionModel::strict_natural(
        clamp(q01 - d1),
        clamp(q11 - d2),
        clamp(q01 + d3),
        clamp(q11 + d4),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rmab_core::model::Strictness;

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "uniform-natural".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::UniformNatural
        );
        assert_eq!(
            "self-correcting-mix:fraction=0.6"
                .parse::<GeneratorSpec>()
                .unwrap(),
            GeneratorSpec::SelfCorrectingMix { fraction: 0.6 }
        );
        assert_eq!(
            "entropy-sweep:x=0.45".parse::<GeneratorSpec>().unwrap(),
            GeneratorSpec::EntropySweep { x: 0.45 }
        );
        assert_eq!(
            "threshold-optimal-mix:fraction=0.8,beta=0.2"
                .parse::<GeneratorSpec>()
                .unwrap(),
            GeneratorSpec::ThresholdOptimalMix {
                fraction: 0.8,
                beta: 0.2
            }
        );
        assert!("entropy-sweep".parse::<GeneratorSpec>().is_err());
        assert!("bogus:x=1".parse::<GeneratorSpec>().is_err());
    }

    #[test]
    fn generators_only_emit_strict_natural_models() {
        let specs = [
            GeneratorSpec::UniformNatural,
            GeneratorSpec::SelfCorrectingMix { fraction: 0.5 },
            GeneratorSpec::EntropySweep { x: 0.45 },
            GeneratorSpec::StateOneResponsive { fraction: 0.7 },
            GeneratorSpec::ThresholdOptimalMix {
                fraction: 0.5,
                beta: 0.2,
            },
        ];
        for spec in specs {
            for model in generate_cohort(spec, 50, 3).unwrap() {
                assert_eq!(model.strictness(), Strictness::StrictNatural);
                // Re-validate from raw values.
                assert!(TransitionModel::strict_natural(
                    model.p01p(),
                    model.p11p(),
                    model.p01a(),
                    model.p11a()
                )
                .is_ok());
            }
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = generate_cohort(GeneratorSpec::UniformNatural, 20, 9).unwrap();
        let b = generate_cohort(GeneratorSpec::UniformNatural, 20, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_cohort(GeneratorSpec::UniformNatural, 20, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn entropy_sweep_stays_in_window() {
        for model in generate_cohort(GeneratorSpec::EntropySweep { x: 0.45 }, 100, 1).unwrap() {
            for p in [model.p01p(), model.p11p(), model.p01a(), model.p11a()] {
                assert!((0.45..=0.55).contains(&p), "{p}");
            }
        }
    }

    #[test]
    fn threshold_mix_honors_the_fraction() {
        let beta = 0.2;
        let cohort = generate_cohort(
            GeneratorSpec::ThresholdOptimalMix {
                fraction: 1.0,
                beta,
            },
            100,
            5,
        )
        .unwrap();
        assert!(cohort
            .iter()
            .all(|m| forward_threshold_condition(m, beta).unwrap()));

        let mixed = generate_cohort(
            GeneratorSpec::ThresholdOptimalMix {
                fraction: 0.3,
                beta,
            },
            100,
            5,
        )
        .unwrap();
        let passing = mixed
            .iter()
            .filter(|m| forward_threshold_condition(m, beta).unwrap())
            .count();
        assert_eq!(passing, 30);
    }

    #[test]
    fn self_correcting_boundary_fractions() {
        let all_nr = generate_cohort(GeneratorSpec::SelfCorrectingMix { fraction: 0.0 }, 10, 1)
            .unwrap();
        // Non-recoverable template keeps p01p near 0.05.
        assert!(all_nr.iter().all(|m| m.p01p() < 0.08));
        let all_sc = generate_cohort(GeneratorSpec::SelfCorrectingMix { fraction: 1.0 }, 10, 1)
            .unwrap();
        assert!(all_sc.iter().all(|m| m.p01p() > 0.5));
    }

    #[test]
    fn state_one_responsive_ranges() {
        let cohort =
            generate_cohort(GeneratorSpec::StateOneResponsive { fraction: 1.0 }, 50, 2).unwrap();
        for m in cohort {
            assert!((0.3..=0.32).contains(&m.p01p()));
            assert!((0.3..=0.32).contains(&m.p11p()));
            assert!((0.3..=0.32).contains(&m.p01a()));
            assert!((0.7..=0.72).contains(&m.p11a()));
        }
    }

    #[test]
    fn perturb_hand_trace() {
        let m = perturb_matrix((0.4, 0.8), (0.05, 0.05, 0.1, 0.1), PERTURB_EPS).unwrap();
        assert!((m.p01p() - 0.35).abs() < 1e-15);
        assert!((m.p11p() - 0.75).abs() < 1e-15);
        assert!((m.p01a() - 0.5).abs() < 1e-15);
        assert!((m.p11a() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_perturbation_collapses_the_matrices() {
        let err = perturb_matrix((0.4, 0.8), (0.0, 0.0, 0.0, 0.0), PERTURB_EPS).unwrap_err();
        assert!(matches!(err, GenerateError::PerturbedInvalid(_)));
    }

    #[test]
    fn perturbation_clamps_before_validation() {
        // q01 - d1 goes negative and q11 + d4 exceeds one; both clamp
        // to the eps bounds and the result still validates.
        let m = perturb_matrix((0.01, 0.99), (0.05, 0.5, 0.05, 0.02), PERTURB_EPS).unwrap();
        assert_eq!(m.p01p(), PERTURB_EPS);
        assert_eq!(m.p11a(), 1.0 - PERTURB_EPS);
    }
}
