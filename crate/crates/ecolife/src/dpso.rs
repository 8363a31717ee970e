//! Dynamic particle swarm optimizer over the per-function decision space.
//!
//! The search space is two-dimensional and discrete: axis 0 indexes the
//! keep-alive location (hardware generation), axis 1 the keep-alive
//! duration drawn from a fixed grid. Particles move in the continuous
//! relaxation of that box and are discretized for fitness evaluation.
//!
//! Two mechanisms adapt the swarm to a changing environment:
//!
//! - inertia and acceleration coefficients are recomputed from the observed
//!   change in invocation gaps and carbon intensity, normalized by their
//!   running maxima: large changes raise inertia (exploration), small
//!   changes raise the cognitive/social pull (exploitation);
//! - when any change is perceived, the worse half of the swarm is
//!   redistributed uniformly at random with velocity and personal best
//!   reset, while the better half keeps its memory.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::carbon::Generation;
use crate::{Error, Result};

/// Discrete decision space: ordered locations × ordered keep-alive grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub locations: Vec<Generation>,
    /// Keep-alive durations in seconds, ascending, starting at 0 ("no
    /// keep-alive").
    pub kat: Vec<f64>,
}

impl SearchSpace {
    pub fn new(locations: Vec<Generation>, kat: Vec<f64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::Domain("search space needs at least one location".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &locations {
            if !seen.insert(*l) {
                return Err(Error::Domain(format!("duplicate location {l}")));
            }
        }
        if kat.first() != Some(&0.0) {
            return Err(Error::Domain("keep-alive grid must start at 0".into()));
        }
        if kat.windows(2).any(|w| w[1] <= w[0] || w[1].is_nan()) {
            return Err(Error::Domain(
                "keep-alive grid must be strictly ascending".into(),
            ));
        }
        Ok(SearchSpace { locations, kat })
    }

    pub fn max_kat(&self) -> f64 {
        *self.kat.last().unwrap()
    }

    /// Upper position bound per axis (inclusive).
    fn hi(&self) -> [f64; 2] {
        [
            (self.locations.len() - 1) as f64,
            (self.kat.len() - 1) as f64,
        ]
    }
}

/// Map a continuous position to a discrete decision. Positions truncate to
/// the cell index at or below them, so an exact half stays at the lower
/// index; inputs are expected inside the bounds box.
pub fn discretize(x: [f64; 2], space: &SearchSpace) -> (Generation, f64) {
    let li = (x[0].floor() as isize).clamp(0, space.locations.len() as isize - 1) as usize;
    let ki = (x[1].floor() as isize).clamp(0, space.kat.len() as isize - 1) as usize;
    (space.locations[li], space.kat[ki])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub pbest_x: [f64; 2],
    pub pbest_fit: f64,
}

/// Clamp ranges for the dynamic coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightBounds {
    pub w_min: f64,
    pub w_max: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl Default for WeightBounds {
    fn default() -> Self {
        WeightBounds {
            w_min: 0.5,
            w_max: 1.0,
            c_min: 0.3,
            c_max: 1.0,
        }
    }
}

/// Observed environment change for one function: invocation-gap delta and
/// carbon-intensity delta, with their running maxima.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnvironmentDelta {
    pub delta_f: f64,
    pub delta_f_max: f64,
    pub delta_ci: f64,
    pub delta_ci_max: f64,
}

impl EnvironmentDelta {
    /// Record the latest deltas and fold them into the running maxima.
    pub fn observe(&mut self, delta_f: f64, delta_ci: f64) {
        self.delta_f = delta_f;
        self.delta_f_max = self.delta_f_max.max(delta_f);
        self.delta_ci = delta_ci;
        self.delta_ci_max = self.delta_ci_max.max(delta_ci);
    }

    pub fn changed(&self) -> bool {
        self.delta_f > 0.0 || self.delta_ci > 0.0
    }

    fn ratios(&self) -> (f64, f64) {
        let ratio = |d: f64, max: f64| if max > 0.0 { d / max } else { 0.0 };
        (
            ratio(self.delta_f, self.delta_f_max),
            ratio(self.delta_ci, self.delta_ci_max),
        )
    }
}

/// One function's swarm state.
#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub gbest_x: [f64; 2],
    pub gbest_fit: f64,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub bounds: WeightBounds,
    rng: ChaCha8Rng,
}

impl Swarm {
    /// Create a swarm of `n` particles uniformly distributed over the
    /// continuous box, with zero velocity and personal bests at the initial
    /// positions (unevaluated).
    pub fn init(space: &SearchSpace, n: usize, seed: u64) -> Result<Swarm> {
        Self::init_with_bounds(space, n, seed, WeightBounds::default())
    }

    pub fn init_with_bounds(
        space: &SearchSpace,
        n: usize,
        seed: u64,
        bounds: WeightBounds,
    ) -> Result<Swarm> {
        if n == 0 {
            return Err(Error::Domain("swarm needs at least one particle".into()));
        }
        let hi = space.hi();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist0 = Uniform::new_inclusive(0.0, hi[0]);
        let dist1 = Uniform::new_inclusive(0.0, hi[1]);
        let particles: Vec<Particle> = (0..n)
            .map(|_| {
                let x = [dist0.sample(&mut rng), dist1.sample(&mut rng)];
                Particle {
                    x,
                    v: [0.0, 0.0],
                    pbest_x: x,
                    pbest_fit: f64::INFINITY,
                }
            })
            .collect();
        let gbest_x = particles[0].x;
        Ok(Swarm {
            particles,
            gbest_x,
            gbest_fit: f64::INFINITY,
            w: bounds.w_max,
            c1: bounds.c_max,
            c2: bounds.c_max,
            bounds,
            rng,
        })
    }

    /// Recompute `w`, `c1`, `c2` from the normalized environment deltas.
    /// Raw values can leave the configured ranges; clamping is part of the
    /// contract.
    pub fn update_weights(&mut self, env: &EnvironmentDelta) {
        let (rf, rc) = env.ratios();
        let b = self.bounds;
        self.w = (b.w_max * (rf + rc)).clamp(b.w_min, b.w_max);
        let c = (b.c_max * (1.0 - rf - rc)).clamp(b.c_min, b.c_max);
        self.c1 = c;
        self.c2 = c;
    }

    /// Perception-response: when any environment change is perceived,
    /// redistribute the worse ⌈N/2⌉ particles (by personal-best fitness,
    /// ties broken toward keeping the lower index) uniformly at random with
    /// zeroed velocity and reset personal best. No change, no update.
    pub fn perceive_and_redistribute(&mut self, env: &EnvironmentDelta, space: &SearchSpace) {
        if !env.changed() {
            return;
        }
        let n = self.particles.len();
        let moved = n.div_ceil(2);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            self.particles[a]
                .pbest_fit
                .total_cmp(&self.particles[b].pbest_fit)
                .then(a.cmp(&b))
        });
        let mut to_move: Vec<usize> = order[n - moved..].to_vec();
        to_move.sort_unstable(); // draw randomness in particle-index order
        let hi = space.hi();
        let dist0 = Uniform::new_inclusive(0.0, hi[0]);
        let dist1 = Uniform::new_inclusive(0.0, hi[1]);
        for i in to_move {
            let x = [dist0.sample(&mut self.rng), dist1.sample(&mut self.rng)];
            let p = &mut self.particles[i];
            p.x = x;
            p.v = [0.0, 0.0];
            p.pbest_x = x;
            p.pbest_fit = f64::INFINITY;
        }
    }

    /// Re-evaluate remembered bests under the current fitness.
    ///
    /// Fitness of a decision changes between invocations (carbon intensity
    /// moves, the gap history advances), so scores recorded earlier are not
    /// comparable to fresh evaluations. Personal bests keep their positions
    /// — the swarm's memory of good regions — but their scores are
    /// re-evaluated, and the global best is recomputed from them, so it can
    /// rise when the environment has turned against it.
    pub fn refresh<E>(
        &mut self,
        space: &SearchSpace,
        mut fitness: impl FnMut(Generation, f64) -> std::result::Result<f64, E>,
    ) -> std::result::Result<(), E> {
        for p in self.particles.iter_mut() {
            if p.pbest_fit.is_finite() {
                let (loc, kat) = discretize(p.pbest_x, space);
                p.pbest_fit = fitness(loc, kat)?;
            }
        }
        if let Some(best) = self
            .particles
            .iter()
            .enumerate()
            .filter(|(_, p)| p.pbest_fit.is_finite())
            .min_by(|(i, a), (j, b)| a.pbest_fit.total_cmp(&b.pbest_fit).then(i.cmp(j)))
        {
            self.gbest_fit = best.1.pbest_fit;
            self.gbest_x = best.1.pbest_x;
        }
        Ok(())
    }

    /// One iteration of the swarm: velocity/position update, position
    /// clamping, fitness evaluation at the discretized position, and
    /// strict-improvement personal/global best updates.
    pub fn step<E>(
        &mut self,
        space: &SearchSpace,
        fitness: impl FnMut(Generation, f64) -> std::result::Result<f64, E>,
    ) -> std::result::Result<(), E> {
        let draws: Vec<[f64; 2]> = (0..self.particles.len())
            .map(|_| [self.rng.gen::<f64>(), self.rng.gen::<f64>()])
            .collect();
        self.step_with_draws(space, &draws, fitness)
    }

    /// Deterministic core of [`Swarm::step`], with the per-particle
    /// `(r1, r2)` draws supplied by the caller.
    pub fn step_with_draws<E>(
        &mut self,
        space: &SearchSpace,
        draws: &[[f64; 2]],
        mut fitness: impl FnMut(Generation, f64) -> std::result::Result<f64, E>,
    ) -> std::result::Result<(), E> {
        assert_eq!(draws.len(), self.particles.len());
        let hi = space.hi();
        for (i, p) in self.particles.iter_mut().enumerate() {
            let [r1, r2] = draws[i];
            #[allow(clippy::needless_range_loop)]
            for d in 0..2 {
                p.v[d] = self.w * p.v[d]
                    + self.c1 * r1 * (p.pbest_x[d] - p.x[d])
                    + self.c2 * r2 * (self.gbest_x[d] - p.x[d]);
                p.x[d] = (p.x[d] + p.v[d]).clamp(0.0, hi[d]);
            }
            let (loc, kat) = discretize(p.x, space);
            let fit = fitness(loc, kat)?;
            if fit < p.pbest_fit {
                p.pbest_fit = fit;
                p.pbest_x = p.x;
            }
            if fit < self.gbest_fit {
                self.gbest_fit = fit;
                self.gbest_x = p.x;
            }
        }
        Ok(())
    }

    /// The swarm's current best decision.
    pub fn best_decision(&self, space: &SearchSpace) -> (Generation, f64) {
        discretize(self.gbest_x, space)
    }
}
