//! Exact branch-and-bound planner for small determinized instances, plus the
//! deterministic plan executor shared with policy comparisons.
//!
//! The search branches over exactly the assignment batches the environment's
//! matcher can produce: maximum-cardinality conflict-free sets of
//! mask-permitted (crew, target) pairs, chosen once per step for unassigned
//! crews. Every behavior reachable by any policy through `EnvState::step` is
//! therefore inside the search space, so the returned reward upper-bounds
//! every policy on the same instance.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::env::{BudgetMode, EnvState, TargetRef};
use crate::error::{Error, Result};
use crate::matching::preprocess_mask;
use crate::routing::{remaining_time_from_position, CrewPosition};

/// Instance limits for the exact planner.
pub const MAX_CREWS: usize = 2;
pub const MAX_DAMAGED: usize = 6;
/// Search-size safety valve.
const NODE_BUDGET: u64 = 50_000_000;
const MEMO_CAP: usize = 1_000_000;

/// One assignment event: crew takes target at the start of `step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledAssignment {
    pub step: u32,
    pub crew: usize,
    pub target: TargetRef,
}

/// A restoration plan. `sequences` is the per-crew target order (the
/// human-readable view); `schedule` carries the exact step each assignment
/// was made, which the executor uses for faithful replay. Plans without a
/// schedule replay with as-soon-as-permitted semantics.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub sequences: Vec<Vec<TargetRef>>,
    #[serde(default)]
    pub schedule: Vec<ScheduledAssignment>,
}

impl Plan {
    pub fn from_schedule(n_crews: usize, schedule: Vec<ScheduledAssignment>) -> Self {
        let mut sequences = vec![Vec::new(); n_crews];
        for sa in &schedule {
            sequences[sa.crew].push(sa.target);
        }
        Self {
            sequences,
            schedule,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactResult {
    pub plan: Plan,
    pub reward: f64,
    pub nodes_explored: u64,
}

/// Travel time from a crew's position to a target's road node, via the
/// precomputed fields.
fn travel_time(state: &EnvState, pos: CrewPosition, target: TargetRef) -> f64 {
    remaining_time_from_position(
        &state.scenario().roads,
        state.poi_matrix(),
        pos,
        state.target_road(target),
    )
    .expect("targets are POIs on a strongly connected network")
}

/// All maximum-cardinality conflict-free assignment batches for the crews
/// that are currently unassigned. Ordered so promising batches come first.
fn assignment_batches(state: &EnvState) -> Vec<Vec<(usize, TargetRef)>> {
    let mask = preprocess_mask(state);
    let mut crews = Vec::new();
    let mut options: Vec<Vec<usize>> = Vec::new();
    for c in 0..state.n_crews() {
        if state.crews()[c].assignment.is_some() {
            continue;
        }
        let mut cols: Vec<usize> = (0..state.n_targets())
            .filter(|&t| mask.allowed(c, t))
            .collect();
        if cols.is_empty() {
            continue;
        }
        // Promising options first: damaged nodes by restored power per hour,
        // then depots by travel time.
        let score = |&col: &usize| -> (u8, f64) {
            let target = state.target(col);
            let travel = travel_time(state, state.crews()[c].position, target);
            match target {
                TargetRef::Damaged(t) => {
                    let ds = &state.damaged_states()[t];
                    let rate = ds.power_lost_solo / (travel + ds.repair_time_remaining + 1e-6);
                    (0, -rate)
                }
                TargetRef::Depot(_) => (1, travel),
            }
        };
        cols.sort_by(|a, b| score(a).partial_cmp(&score(b)).expect("finite scores"));
        crews.push(c);
        options.push(cols);
    }
    if crews.is_empty() {
        return vec![Vec::new()];
    }

    // Enumerate all conflict-free selections (a crew may be skipped), then
    // keep only those of maximum cardinality: exactly the sets a
    // maximum-cardinality matching can produce.
    let mut out: Vec<Vec<(usize, TargetRef)>> = Vec::new();
    let mut current: Vec<(usize, TargetRef)> = Vec::new();
    let mut taken: Vec<usize> = Vec::new();
    fn recurse(
        state: &EnvState,
        crews: &[usize],
        options: &[Vec<usize>],
        k: usize,
        current: &mut Vec<(usize, TargetRef)>,
        taken: &mut Vec<usize>,
        out: &mut Vec<Vec<(usize, TargetRef)>>,
    ) {
        if k == crews.len() {
            out.push(current.clone());
            return;
        }
        for &col in &options[k] {
            if taken.contains(&col) {
                continue;
            }
            taken.push(col);
            current.push((crews[k], state.target(col)));
            recurse(state, crews, options, k + 1, current, taken, out);
            current.pop();
            taken.pop();
        }
        // Skip branch: this crew idles (only survives max-cardinality
        // filtering when its options were all taken by other crews).
        recurse(state, crews, options, k + 1, current, taken, out);
    }
    recurse(
        state,
        &crews,
        &options,
        0,
        &mut current,
        &mut taken,
        &mut out,
    );
    let max_card = out.iter().map(Vec::len).max().unwrap_or(0);
    out.retain(|batch| batch.len() == max_card);
    out
}

fn all_repaired(state: &EnvState) -> bool {
    state.damaged_states().iter().all(|d| !d.damaged)
}

/// Exact hashable snapshot of the searchable state.
fn state_key(state: &EnvState) -> Box<[u64]> {
    let mut key: Vec<u64> =
        Vec::with_capacity(2 + 3 * state.n_crews() + 3 * state.n_damaged_initial());
    key.push(u64::from(state.step_index()));
    for crew in state.crews() {
        let (a, b) = match crew.position {
            CrewPosition::AtNode(n) => (u64::from(n.0), u64::MAX),
            CrewPosition::OnEdge { edge, fraction } => (edge as u64, fraction.to_bits()),
        };
        key.push(a);
        key.push(b);
        let assign = match crew.assignment {
            None => u64::MAX,
            Some(TargetRef::Depot(d)) => d as u64,
            Some(TargetRef::Damaged(t)) => (1 << 32) | t as u64,
        };
        key.push(assign ^ (u64::from(crew.cargo) << 40));
    }
    for ds in state.damaged_states() {
        key.push(u64::from(ds.damaged) | (u64::from(ds.resources_required_remaining) << 1));
        key.push(ds.repair_time_remaining.to_bits());
    }
    key.into_boxed_slice()
}

struct Searcher {
    horizon: u32,
    step_hours: f64,
    time_weight: f64,
    p_max: f64,
    p_init: f64,
    episode_hours: f64,
    best_value: f64,
    best_schedule: Vec<ScheduledAssignment>,
    nodes: u64,
    memo: HashMap<Box<[u64]>, f64>,
}

impl Searcher {
    /// Optimistic upper bound on the reward still collectable from `state`:
    /// every damaged node finishes at the earliest time any crew could
    /// possibly reach and repair it, and only the single worst unfinished
    /// node is charged per step (served power is bounded by the best case of
    /// each damaged node alone).
    fn future_bound(&self, state: &EnvState) -> f64 {
        let now = f64::from(state.step_index()) * self.step_hours;
        let mut pending: Vec<(u32, f64)> = Vec::new();
        for ds in state.damaged_states() {
            if !ds.damaged {
                continue;
            }
            let mut best_travel = f64::INFINITY;
            for crew in state.crews() {
                let t = remaining_time_from_position(
                    &state.scenario().roads,
                    state.poi_matrix(),
                    crew.position,
                    ds.coupled_road,
                )
                .expect("damaged road is a POI");
                best_travel = best_travel.min(t);
            }
            let tau = now + best_travel + ds.repair_time_remaining;
            let first_counted_step = (tau / self.step_hours).ceil() as u32;
            pending.push((first_counted_step, ds.power_lost_solo));
        }
        let mut bound = 0.0;
        for s in state.step_index()..self.horizon {
            let mut worst = 0.0f64;
            for &(s_t, loss) in &pending {
                if s < s_t {
                    worst = worst.max(loss);
                }
            }
            let p_hat = self.p_max - worst;
            bound += crate::env::compute_reward(
                p_hat,
                self.p_init,
                self.p_max,
                self.step_hours,
                self.episode_hours,
            );
        }
        bound
    }

    fn offer(&mut self, value: f64, schedule: &[ScheduledAssignment]) {
        if value > self.best_value {
            self.best_value = value;
            self.best_schedule = schedule.to_vec();
        }
    }

    fn dfs(
        &mut self,
        state: EnvState,
        cum: f64,
        schedule: &mut Vec<ScheduledAssignment>,
    ) -> Result<()> {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            return Err(Error::InstanceTooLarge(format!(
                "search exceeded {NODE_BUDGET} nodes"
            )));
        }
        if state.is_done() {
            self.offer(cum, schedule);
            return Ok(());
        }
        if all_repaired(&state) {
            // Remaining steps all earn the full step weight; accumulate the
            // same way the executor would so values compare bit-exactly.
            let mut total = cum;
            for _ in state.step_index()..self.horizon {
                total += self.time_weight;
            }
            self.offer(total, schedule);
            return Ok(());
        }
        if cum + self.future_bound(&state) <= self.best_value {
            return Ok(());
        }
        let key = state_key(&state);
        if let Some(&seen) = self.memo.get(&key) {
            if cum <= seen {
                return Ok(());
            }
        }
        if self.memo.len() < MEMO_CAP {
            self.memo.insert(key, cum);
        }

        let step = state.step_index();
        for batch in assignment_batches(&state) {
            let mut next = state.clone();
            let reward = next.step_with_assignments(&batch)?;
            for &(crew, target) in &batch {
                schedule.push(ScheduledAssignment { step, crew, target });
            }
            self.dfs(next, cum + reward, schedule)?;
            schedule.truncate(schedule.len() - batch.len());
        }
        Ok(())
    }
}

/// Finds a reward-maximizing plan for a small determinized instance by
/// branch and bound. The state must use deterministic budgets; instances
/// above `MAX_CREWS`/`MAX_DAMAGED` are refused.
pub fn exact_plan(initial: &EnvState) -> Result<ExactResult> {
    if initial.budget_mode() != BudgetMode::Deterministic {
        return Err(Error::InvalidConfig(
            "exact_plan requires a deterministic-budget state".into(),
        ));
    }
    if initial.n_crews() > MAX_CREWS || initial.n_damaged_initial() > MAX_DAMAGED {
        return Err(Error::InstanceTooLarge(format!(
            "{} crews / {} damaged exceeds the {MAX_CREWS} crew / {MAX_DAMAGED} damaged limit",
            initial.n_crews(),
            initial.n_damaged_initial()
        )));
    }
    let config = initial.config();
    let mut searcher = Searcher {
        horizon: config.horizon_steps,
        step_hours: config.step_hours,
        time_weight: config.step_hours / config.episode_hours(),
        p_max: initial.p_max(),
        p_init: initial.p_init(),
        episode_hours: config.episode_hours(),
        best_value: f64::NEG_INFINITY,
        best_schedule: Vec::new(),
        nodes: 0,
        memo: HashMap::new(),
    };
    let mut schedule = Vec::new();
    searcher.dfs(initial.clone(), 0.0, &mut schedule)?;
    Ok(ExactResult {
        plan: Plan::from_schedule(initial.n_crews(), searcher.best_schedule.clone()),
        reward: searcher.best_value,
        nodes_explored: searcher.nodes,
    })
}

/// Runs a plan on a clone of `initial` under environment dynamics with no
/// re-matching: scheduled plans replay their exact assignment steps;
/// schedule-free plans assign each crew's next target as soon as it is
/// permitted. Returns the cumulative episode reward.
pub fn simulate_plan(initial: &EnvState, plan: &Plan) -> Result<f64> {
    if initial.budget_mode() != BudgetMode::Deterministic {
        return Err(Error::InvalidConfig(
            "simulate_plan requires a deterministic-budget state".into(),
        ));
    }
    if plan.sequences.len() > initial.n_crews() {
        return Err(Error::InfeasiblePlan(format!(
            "plan has {} crew sequences, instance has {} crews",
            plan.sequences.len(),
            initial.n_crews()
        )));
    }
    if plan.schedule.is_empty() {
        simulate_sequences(initial, plan)
    } else {
        simulate_schedule(initial, plan)
    }
}

fn simulate_schedule(initial: &EnvState, plan: &Plan) -> Result<f64> {
    let mut by_step: BTreeMap<u32, Vec<(usize, TargetRef)>> = BTreeMap::new();
    for sa in &plan.schedule {
        by_step
            .entry(sa.step)
            .or_default()
            .push((sa.crew, sa.target));
    }
    let mut state = initial.clone();
    let mut cum = 0.0;
    while !state.is_done() {
        let batch = by_step.remove(&state.step_index()).unwrap_or_default();
        cum += state.step_with_assignments(&batch)?;
    }
    if !by_step.is_empty() {
        return Err(Error::InfeasiblePlan(
            "schedule extends beyond the episode horizon".into(),
        ));
    }
    Ok(cum)
}

fn simulate_sequences(initial: &EnvState, plan: &Plan) -> Result<f64> {
    let mut state = initial.clone();
    let mut queues: Vec<VecDeque<TargetRef>> = plan
        .sequences
        .iter()
        .map(|seq| seq.iter().copied().collect())
        .collect();
    queues.resize(state.n_crews(), VecDeque::new());

    let mut cum = 0.0;
    while !state.is_done() {
        let claimed: Vec<bool> = {
            let mut claimed = vec![false; state.n_damaged_initial()];
            for crew in state.crews() {
                if let Some(TargetRef::Damaged(t)) = crew.assignment {
                    claimed[t] = true;
                }
            }
            claimed
        };
        let mut batch: Vec<(usize, TargetRef)> = Vec::new();
        let mut taken_cols: Vec<usize> = Vec::new();
        for c in 0..state.n_crews() {
            if state.crews()[c].assignment.is_some() {
                continue;
            }
            let Some(&head) = queues[c].front() else {
                continue;
            };
            let col = state.target_column(head);
            match head {
                TargetRef::Damaged(t) => {
                    let ds = &state.damaged_states()[t];
                    if !ds.damaged {
                        return Err(Error::InfeasiblePlan(format!(
                            "crew {c} is planned onto already-repaired node {}",
                            ds.node
                        )));
                    }
                    if claimed[t] || taken_cols.contains(&col) {
                        continue; // wait until the node frees up
                    }
                    if state.crews()[c].cargo == 0 {
                        return Err(Error::InfeasiblePlan(format!(
                            "cargo underflow: crew {c} has no resources for node {}",
                            ds.node
                        )));
                    }
                }
                TargetRef::Depot(_) => {
                    if taken_cols.contains(&col) {
                        continue; // another crew took this depot this step
                    }
                    if state.crews()[c].cargo == state.config().crew_capacity {
                        return Err(Error::InfeasiblePlan(format!(
                            "crew {c} is planned onto a depot at full cargo"
                        )));
                    }
                }
            }
            queues[c].pop_front();
            taken_cols.push(col);
            batch.push((c, head));
        }
        cum += state.step_with_assignments(&batch)?;
    }
    Ok(cum)
}
