//! Target-agnostic demo logic: scenario generation and a steppable episode
//! with JSON frames.

use serde::Serialize;

use gridmend_core::baselines::{GreedyController, RandomController};
use gridmend_core::env::{BudgetMode, Controller, EnvState, TargetRef};
use gridmend_core::gen::{generate_scenario, ScenarioSpec};
use gridmend_core::io;
use gridmend_core::net::SharedScenario;
use gridmend_core::obs::ObservationGraph;
use gridmend_core::policy::ActorGnn;
use gridmend_core::routing::CrewPosition;
use gridmend_core::EpisodeConfig;

/// Genome shipped with the demo; produced by `gridmend train` on the
/// desk-train preset.
pub const TRAINED_GENOME_JSON: &str = include_str!("../assets/trained_genome.json");

pub fn generate_demo_scenario(
    seed: u64,
    crews: usize,
    depots: usize,
    damaged: usize,
    feeder_nodes: usize,
    grid: usize,
    horizon: u32,
) -> Result<String, String> {
    let mut config = EpisodeConfig::new(crews, depots, damaged);
    config.horizon_steps = horizon;
    let mut spec = ScenarioSpec::new(config, feeder_nodes, grid.max(2), grid.max(2));
    spec.cell_km = 1.5;
    let scenario = generate_scenario(&spec, seed).map_err(|e| e.to_string())?;
    Ok(io::scenario_to_json(&scenario))
}

enum PolicyKind {
    Random(Box<RandomController>),
    Greedy(GreedyController),
    Trained(Box<ActorGnn>),
}

impl PolicyKind {
    fn controller(&mut self) -> &mut dyn Controller {
        match self {
            PolicyKind::Random(c) => c.as_mut(),
            PolicyKind::Greedy(c) => c,
            PolicyKind::Trained(actor) => actor.as_mut(),
        }
    }
}

#[derive(Serialize)]
struct CrewView {
    x: f64,
    y: f64,
    cargo: u32,
    target: Option<String>,
}

#[derive(Serialize)]
struct DamagedView {
    power_id: u32,
    road_id: u32,
    damaged: bool,
    resources_needed: u32,
    repair_hours_left: f64,
    power_lost_solo: f64,
}

#[derive(Serialize)]
struct Frame {
    step: u32,
    horizon: u32,
    done: bool,
    p_init: f64,
    p_max: f64,
    p_current: f64,
    restored_fraction: f64,
    reward: f64,
    cumulative_reward: f64,
    n_repaired: usize,
    crews: Vec<CrewView>,
    damaged: Vec<DamagedView>,
}

pub struct Runner {
    state: EnvState,
    obs: ObservationGraph,
    policy: PolicyKind,
    last_reward: f64,
    cumulative: f64,
}

impl Runner {
    pub fn new(scenario_json: &str, policy: &str, seed: u64) -> Result<Runner, String> {
        let scenario = SharedScenario::new(
            io::scenario_from_json(scenario_json, "demo scenario").map_err(|e| e.to_string())?,
        );
        let policy = match policy {
            "random" => PolicyKind::Random(Box::new(RandomController::new(seed))),
            "greedy" => PolicyKind::Greedy(GreedyController),
            "trained" => {
                let genome = io::genome_from_json(TRAINED_GENOME_JSON, "embedded genome")
                    .map_err(|e| e.to_string())?;
                PolicyKind::Trained(Box::new(
                    ActorGnn::from_genome(&genome).map_err(|e| e.to_string())?,
                ))
            }
            other => return Err(format!("unknown policy '{other}'")),
        };
        let (state, obs) = EnvState::reset_with_mode(scenario, seed, BudgetMode::Stochastic)
            .map_err(|e| e.to_string())?;
        Ok(Runner {
            state,
            obs,
            policy,
            last_reward: 0.0,
            cumulative: 0.0,
        })
    }

    pub fn done(&self) -> bool {
        self.state.is_done()
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.cumulative
    }

    pub fn frame(&self) -> Result<String, String> {
        let scenario = self.state.scenario();
        let crews = self
            .state
            .crews()
            .iter()
            .map(|crew| {
                let (x, y) = match crew.position {
                    CrewPosition::AtNode(id) => {
                        let n = scenario.roads.node(id).expect("crew on known node");
                        (n.x, n.y)
                    }
                    CrewPosition::OnEdge { edge, fraction } => {
                        let e = &scenario.roads.edges()[edge];
                        let a = scenario.roads.node(e.from).expect("edge tail");
                        let b = scenario.roads.node(e.to).expect("edge head");
                        (a.x + fraction * (b.x - a.x), a.y + fraction * (b.y - a.y))
                    }
                };
                CrewView {
                    x,
                    y,
                    cargo: crew.cargo,
                    target: crew.assignment.map(|t| match t {
                        TargetRef::Depot(d) => format!("depot {d}"),
                        TargetRef::Damaged(i) => {
                            format!("node {}", self.state.damaged_states()[i].node.0)
                        }
                    }),
                }
            })
            .collect();
        let damaged = self
            .state
            .damaged_states()
            .iter()
            .map(|ds| DamagedView {
                power_id: ds.node.0,
                road_id: ds.coupled_road.0,
                damaged: ds.damaged,
                resources_needed: ds.resources_required_remaining,
                repair_hours_left: ds.repair_time_remaining,
                power_lost_solo: ds.power_lost_solo,
            })
            .collect();
        let denom = self.state.p_max() - self.state.p_init();
        let restored_fraction = if denom > 0.0 {
            (self.state.p_current() - self.state.p_init()) / denom
        } else {
            1.0
        };
        let frame = Frame {
            step: self.state.step_index(),
            horizon: self.state.config().horizon_steps,
            done: self.state.is_done(),
            p_init: self.state.p_init(),
            p_max: self.state.p_max(),
            p_current: self.state.p_current(),
            restored_fraction,
            reward: self.last_reward,
            cumulative_reward: self.cumulative,
            n_repaired: self.state.n_repaired(),
            crews,
            damaged,
        };
        serde_json::to_string(&frame).map_err(|e| e.to_string())
    }

    pub fn step(&mut self) -> Result<String, String> {
        if self.state.is_done() {
            return self.frame();
        }
        let incentives = self
            .policy
            .controller()
            .incentives(&self.obs)
            .map_err(|e| e.to_string())?;
        let result = self.state.step(&incentives).map_err(|e| e.to_string())?;
        self.last_reward = result.reward;
        self.cumulative += result.reward;
        self.obs = result.observation;
        self.frame()
    }

    pub fn run_curve(&mut self) -> Result<String, String> {
        let mut curve = Vec::with_capacity(self.state.config().horizon_steps as usize + 1);
        let p_init = self.state.p_init();
        let denom = self.state.p_max() - p_init;
        let fraction = move |p: f64| {
            if denom > 0.0 {
                (p - p_init) / denom
            } else {
                1.0
            }
        };
        curve.push(fraction(self.state.p_current()));
        while !self.state.is_done() {
            let incentives = self
                .policy
                .controller()
                .incentives(&self.obs)
                .map_err(|e| e.to_string())?;
            let result = self.state.step(&incentives).map_err(|e| e.to_string())?;
            self.last_reward = result.reward;
            self.cumulative += result.reward;
            self.obs = result.observation;
            curve.push(fraction(self.state.p_current()));
        }
        serde_json::to_string(&serde_json::json!({
            "curve": curve,
            "cumulative_reward": self.cumulative,
        }))
        .map_err(|e| e.to_string())
    }
}
