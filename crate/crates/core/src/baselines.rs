//! Reference policies: random incentives and an interpretable
//! power-per-hour greedy heuristic.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::Controller;
use crate::error::Result;
use crate::matching::IncentiveMatrix;
use crate::obs::ObservationGraph;

const EPS: f64 = 1e-6;

/// I.i.d. standard-normal incentives: the random action baseline.
pub fn random_policy(obs: &ObservationGraph, rng: &mut impl Rng) -> IncentiveMatrix {
    IncentiveMatrix::from_fn(obs.n_crews, obs.n_targets(), |_, _| {
        rng.sample(StandardNormal)
    })
    .expect("normal draws are finite")
}

/// Power-per-hour heuristic: damaged targets score
/// `power_lost_solo / (travel + repair_left + eps)`; depot columns score
/// `1 / (travel + eps)` scaled strictly below every positive damaged score,
/// so loaded crews prefer repair work and empty crews still find a depot.
pub fn greedy_policy(obs: &ObservationGraph) -> IncentiveMatrix {
    let n_targets = obs.n_targets();
    let mut values = vec![0.0; obs.n_crews * n_targets];

    let mut min_positive_damaged = f64::INFINITY;
    let mut max_depot_raw: f64 = 0.0;
    for c in 0..obs.n_crews {
        for t in 0..n_targets {
            let b0 = obs.travel_times[c * n_targets + t];
            let score = if t < obs.n_depots {
                let raw = 1.0 / (b0 + EPS);
                max_depot_raw = max_depot_raw.max(raw);
                raw
            } else {
                let feats = &obs.damaged[t - obs.n_depots];
                let s = feats.power_lost_solo / (b0 + feats.repair_time_left + EPS);
                if s > 0.0 {
                    min_positive_damaged = min_positive_damaged.min(s);
                }
                s
            };
            values[c * n_targets + t] = score;
        }
    }

    let depot_scale = if min_positive_damaged.is_finite() {
        0.5 * min_positive_damaged / (max_depot_raw + 1.0)
    } else {
        1.0
    };
    for c in 0..obs.n_crews {
        for t in 0..obs.n_depots {
            values[c * n_targets + t] *= depot_scale;
        }
    }

    IncentiveMatrix::new(obs.n_crews, n_targets, values).expect("greedy scores are finite")
}

/// `Controller` wrapper around `random_policy` carrying its own stream.
pub struct RandomController {
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: crate::rng::stream(seed, &[crate::rng::tag::POLICY]),
        }
    }
}

impl Controller for RandomController {
    fn incentives(&mut self, obs: &ObservationGraph) -> Result<IncentiveMatrix> {
        Ok(random_policy(obs, &mut self.rng))
    }
}

/// `Controller` wrapper around `greedy_policy`.
pub struct GreedyController;

impl Controller for GreedyController {
    fn incentives(&mut self, obs: &ObservationGraph) -> Result<IncentiveMatrix> {
        Ok(greedy_policy(obs))
    }
}
