//! Keeping-alive and execution-placement decisions.
//!
//! The keeping-alive decision maker (KDM) scores a candidate (location,
//! keep-alive duration) pair by a three-term objective — expected service
//! time, expected service carbon, and keep-alive carbon, each normalized by
//! its per-function maximum — and searches the space with the swarm in
//! [`crate::dpso`]. The execution placement decision maker (EPDM)
//! short-circuits to any warm location and otherwise picks the location with
//! the lowest weighted service-time/carbon score.

use std::collections::{BTreeMap, VecDeque};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::carbon::{keepalive_carbon, service_carbon, Generation, HwPair};
use crate::dpso::{EnvironmentDelta, SearchSpace, Swarm, WeightBounds};
use crate::workload::FunctionProfile;
use crate::{Error, Result};

/// Shortest representable inter-arrival gap: one simulation clock tick.
const MIN_GAP_S: f64 = 0.001;

/// Optimization weights for service time (`lambda_s`) and carbon
/// (`lambda_c`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub lambda_s: f64,
    pub lambda_c: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            lambda_s: 0.5,
            lambda_c: 0.5,
        }
    }
}

impl ObjectiveWeights {
    pub fn new(lambda_s: f64, lambda_c: f64) -> Result<Self> {
        if lambda_s < 0.0 || lambda_c < 0.0 || lambda_s + lambda_c <= 0.0 {
            return Err(Error::Config(format!(
                "weights must be non-negative with a positive sum, got \
                 lambda_s={lambda_s}, lambda_c={lambda_c}"
            )));
        }
        Ok(ObjectiveWeights { lambda_s, lambda_c })
    }
}

/// Per-function normalization constants, re-evaluated at decision time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizers {
    /// Maximum service time: cold start plus execution on the slow end of
    /// the decision space, seconds.
    pub s_max: f64,
    /// Maximum service carbon: cold execution on the worst location at the
    /// current carbon intensity, grams.
    pub sc_max: f64,
    /// Maximum keep-alive carbon: the full grid maximum on the newer
    /// location at the current carbon intensity, grams.
    pub kc_max: f64,
}

/// Floor applied to `kc_max` so a `{0}` keep-alive grid cannot divide by
/// zero.
const KC_MAX_FLOOR: f64 = 1e-12;

pub fn normalizers(
    f: &FunctionProfile,
    hw: &HwPair,
    space: &SearchSpace,
    ci: f64,
) -> Result<Normalizers> {
    let slow = space.locations[0];
    let usage = f.on(slow)?;
    let s_max = usage.coldstart + usage.exec;

    let mut sc_max = 0.0f64;
    for &loc in &space.locations {
        let total = service_carbon(f, hw.get(loc), true, ci)?.total;
        sc_max = sc_max.max(total);
    }

    let kc_loc = *space.locations.last().unwrap();
    let max_kat = space.max_kat();
    let kc_max = if max_kat > 0.0 {
        keepalive_carbon(f, hw.get(kc_loc), max_kat, ci * max_kat)?
            .total
            .max(KC_MAX_FLOOR)
    } else {
        KC_MAX_FLOOR
    };
    Ok(Normalizers { s_max, sc_max, kc_max })
}

/// A keep-alive decision: where and for how long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub keep_location: Generation,
    /// Keep-alive duration in seconds; 0 means no keep-alive.
    pub keep_duration_s: f64,
}

/// Ring of the most recent inter-arrival gaps of one function, seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalHistory {
    gaps: VecDeque<f64>,
    window: usize,
}

impl ArrivalHistory {
    pub fn new(window: usize) -> Self {
        ArrivalHistory {
            gaps: VecDeque::with_capacity(window),
            window: window.max(1),
        }
    }

    pub fn push(&mut self, gap_s: f64) {
        if self.gaps.len() == self.window {
            self.gaps.pop_front();
        }
        self.gaps.push_back(gap_s.max(MIN_GAP_S));
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.gaps.iter().copied()
    }
}

/// The weighted placement score: lower is better.
pub fn epdm_score(weights: &ObjectiveWeights, s_ratio: f64, sc_ratio: f64) -> f64 {
    weights.lambda_s * s_ratio + weights.lambda_c * sc_ratio
}

fn argmin_ties_to_new(scored: impl Iterator<Item = (Generation, f64)>) -> Generation {
    scored
        .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("at least one candidate location")
        .0
}

/// Execution placement. A single warm location short-circuits; otherwise
/// the candidates (warm set, or the whole space when cold) are ranked by
/// the weighted score, ties going to the newer generation.
#[allow(clippy::too_many_arguments)]
pub fn epdm_choose(
    f: &FunctionProfile,
    hw: &HwPair,
    space: &SearchSpace,
    warm_old: bool,
    warm_new: bool,
    ci: f64,
    weights: &ObjectiveWeights,
    norms: &Normalizers,
) -> Result<Generation> {
    let warm_at = |gen: Generation| match gen {
        Generation::Old => warm_old,
        Generation::New => warm_new,
    };
    let warm: Vec<Generation> = space
        .locations
        .iter()
        .copied()
        .filter(|g| warm_at(*g))
        .collect();
    match warm.len() {
        1 => Ok(warm[0]),
        _ => {
            let cold = warm.is_empty();
            let candidates: &[Generation] = if cold { &space.locations } else { &warm };
            let mut scored = Vec::with_capacity(candidates.len());
            for &gen in candidates {
                let usage = f.on(gen)?;
                let s = usage.exec + if cold { usage.coldstart } else { 0.0 };
                let sc = service_carbon(f, hw.get(gen), cold, ci)?.total;
                scored.push((gen, epdm_score(weights, s / norms.s_max, sc / norms.sc_max)));
            }
            Ok(argmin_ties_to_new(scored.into_iter()))
        }
    }
}

/// The cold-start placement the EPDM would pick: used both at actual cold
/// starts and inside the fitness expectation for cold samples.
pub fn epdm_cold_location(
    f: &FunctionProfile,
    hw: &HwPair,
    space: &SearchSpace,
    ci: f64,
    weights: &ObjectiveWeights,
    norms: &Normalizers,
) -> Result<Generation> {
    epdm_choose(f, hw, space, false, false, ci, weights, norms)
}

/// The keeping-alive objective for one candidate decision, averaged over
/// the sampled inter-arrival gaps.
///
/// For each gap the sample is warm when the gap fits inside the candidate
/// keep-alive duration; warm samples execute at the keep location, cold
/// samples at the EPDM cold placement. Keep-alive carbon accrues for
/// `min(k, gap)` at the current carbon intensity.
#[allow(clippy::too_many_arguments)]
pub fn kdm_fitness(
    f: &FunctionProfile,
    hw: &HwPair,
    space: &SearchSpace,
    candidate: &Decision,
    history: &ArrivalHistory,
    ci_now: f64,
    weights: &ObjectiveWeights,
    norms: &Normalizers,
) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Domain(
            "kdm fitness needs at least one observed inter-arrival gap".into(),
        ));
    }
    let k = candidate.keep_duration_s;
    let keep_loc = candidate.keep_location;
    let cold_loc = epdm_cold_location(f, hw, space, ci_now, weights, norms)?;

    let warm_usage = f.on(keep_loc)?;
    let cold_usage = f.on(cold_loc)?;
    let warm_s = warm_usage.exec;
    let cold_s = cold_usage.exec + cold_usage.coldstart;
    let warm_sc = service_carbon(f, hw.get(keep_loc), false, ci_now)?.total;
    let cold_sc = service_carbon(f, hw.get(cold_loc), true, ci_now)?.total;
    let keep_hw = hw.get(keep_loc);

    let (mut s_sum, mut sc_sum, mut kc_sum) = (0.0, 0.0, 0.0);
    let mut n = 0usize;
    for gap in history.iter() {
        let warm = gap <= k;
        s_sum += if warm { warm_s } else { cold_s };
        sc_sum += if warm { warm_sc } else { cold_sc };
        let held = k.min(gap);
        kc_sum += keepalive_carbon(f, keep_hw, held, ci_now * held)?.total;
        n += 1;
    }
    let n = n as f64;
    Ok(weights.lambda_s * (s_sum / n) / norms.s_max
        + weights.lambda_c * (sc_sum / n) / norms.sc_max
        + weights.lambda_c * (kc_sum / n) / norms.kc_max)
}

/// Swarm, history, and environment memory for one function.
#[derive(Debug, Clone)]
pub struct FunctionState {
    pub swarm: Swarm,
    pub history: ArrivalHistory,
    pub env: EnvironmentDelta,
    last_invocation_ms: u64,
    last_gap_s: Option<f64>,
    last_ci: f64,
}

/// Tunables of the keeping-alive decision maker.
#[derive(Debug, Clone)]
pub struct KdmConfig {
    pub weights: ObjectiveWeights,
    pub space: SearchSpace,
    pub particles: usize,
    /// Swarm iterations per invocation.
    pub iterations: usize,
    /// Inter-arrival history window length.
    pub history_window: usize,
    pub bounds: WeightBounds,
    /// When false, the perception-response redistribution is skipped
    /// (ablation switch); dynamic weights stay active.
    pub perception_response: bool,
}

impl KdmConfig {
    pub fn new(weights: ObjectiveWeights, space: SearchSpace) -> Self {
        KdmConfig {
            weights,
            space,
            particles: 15,
            iterations: 10,
            history_window: 10,
            bounds: WeightBounds::default(),
            perception_response: true,
        }
    }
}

/// The full keeping-alive decision maker: one preserved swarm per function.
#[derive(Debug, Clone)]
pub struct Kdm {
    pub config: KdmConfig,
    functions: BTreeMap<String, FunctionState>,
    seed_rng: ChaCha8Rng,
}

impl Kdm {
    pub fn new(config: KdmConfig, seed: u64) -> Self {
        Kdm {
            config,
            functions: BTreeMap::new(),
            seed_rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self, function_id: &str) -> Option<&FunctionState> {
        self.functions.get(function_id)
    }

    /// Handle one invocation: place the execution via the EPDM, then advance
    /// the function's swarm and emit its keep-alive decision.
    ///
    /// The first invocation of a function only assigns a fresh swarm; later
    /// invocations observe the environment deltas, adapt the swarm weights,
    /// optionally redistribute, and run the configured iterations against
    /// the fitness above.
    pub fn on_invocation(
        &mut self,
        f: &FunctionProfile,
        hw: &HwPair,
        now_ms: u64,
        ci_now: f64,
        warm_old: bool,
        warm_new: bool,
    ) -> Result<(Generation, Decision)> {
        let cfg = &self.config;
        let norms = normalizers(f, hw, &cfg.space, ci_now)?;
        let exec_loc = epdm_choose(
            f, hw, &cfg.space, warm_old, warm_new, ci_now, &cfg.weights, &norms,
        )?;

        if !self.functions.contains_key(&f.id) {
            let seed = self.seed_rng.next_u64();
            let swarm = Swarm::init_with_bounds(&cfg.space, cfg.particles, seed, cfg.bounds)?;
            let state = FunctionState {
                swarm,
                history: ArrivalHistory::new(cfg.history_window),
                env: EnvironmentDelta::default(),
                last_invocation_ms: now_ms,
                last_gap_s: None,
                last_ci: ci_now,
            };
            let (loc, kat) = state.swarm.best_decision(&cfg.space);
            self.functions.insert(f.id.clone(), state);
            return Ok((
                exec_loc,
                Decision {
                    keep_location: loc,
                    keep_duration_s: kat,
                },
            ));
        }

        let state = self.functions.get_mut(&f.id).unwrap();
        let gap_s = ((now_ms - state.last_invocation_ms) as f64 / 1000.0).max(MIN_GAP_S);
        let delta_f = match state.last_gap_s {
            Some(prev) => (gap_s - prev).abs(),
            None => gap_s,
        };
        let delta_ci = (ci_now - state.last_ci).abs();
        state.env.observe(delta_f, delta_ci);
        state.history.push(gap_s);

        // Remembered best scores were taken under older CI and history;
        // re-anchor them to the current environment before moving anything.
        state.swarm.refresh(&cfg.space, |loc, kat| {
            kdm_fitness(
                f,
                hw,
                &cfg.space,
                &Decision {
                    keep_location: loc,
                    keep_duration_s: kat,
                },
                &state.history,
                ci_now,
                &cfg.weights,
                &norms,
            )
        })?;
        state.swarm.update_weights(&state.env);
        if cfg.perception_response {
            state.swarm.perceive_and_redistribute(&state.env, &cfg.space);
        }
        for _ in 0..cfg.iterations {
            state.swarm.step(&cfg.space, |loc, kat| {
                kdm_fitness(
                    f,
                    hw,
                    &cfg.space,
                    &Decision {
                        keep_location: loc,
                        keep_duration_s: kat,
                    },
                    &state.history,
                    ci_now,
                    &cfg.weights,
                    &norms,
                )
            })?;
        }

        state.last_invocation_ms = now_ms;
        state.last_gap_s = Some(gap_s);
        state.last_ci = ci_now;
        let (loc, kat) = state.swarm.best_decision(&cfg.space);
        Ok((
            exec_loc,
            Decision {
                keep_location: loc,
                keep_duration_s: kat,
            },
        ))
    }
}
