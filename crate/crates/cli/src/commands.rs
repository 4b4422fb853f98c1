use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use gridmend_core::baselines::{GreedyController, RandomController};
use gridmend_core::env::{self, BudgetMode, Controller, EnvState};
use gridmend_core::evolve::{evolve, GaConfig};
use gridmend_core::exact::{exact_plan, simulate_plan};
use gridmend_core::gen::{generate_scenario, preset, ScenarioSpec, PRESET_NAMES};
use gridmend_core::io;
use gridmend_core::net::SharedScenario;
use gridmend_core::policy::ActorGnn;
use gridmend_core::rng;
use gridmend_core::EpisodeConfig;

#[derive(Args)]
pub struct GenerateArgs {
    /// Preset name (see --help for the list) or omit and give explicit counts.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<ScenarioSpec>,
    #[arg(long)]
    crews: Option<usize>,
    #[arg(long)]
    depots: Option<usize>,
    #[arg(long)]
    damaged: Option<usize>,
    #[arg(long)]
    feeder_nodes: Option<usize>,
    /// Road grid side length (grid is square).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    cell_km: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of scenario files to generate.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_preset(name: &str) -> std::result::Result<ScenarioSpec, String> {
    preset(name).ok_or_else(|| {
        format!(
            "unknown preset '{name}'; known presets: {}",
            PRESET_NAMES.join(", ")
        )
    })
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let mut spec = match args.preset {
        Some(spec) => spec,
        None => {
            let (crews, depots, damaged) = match (args.crews, args.depots, args.damaged) {
                (Some(c), Some(d), Some(n)) => (c, d, n),
                _ => bail!("either --preset or all of --crews/--depots/--damaged are required"),
            };
            let config = EpisodeConfig::new(crews, depots, damaged);
            let feeder = (5 * damaged).max(24);
            let side = ((1.7 * feeder as f64).sqrt().ceil() as usize).max(4);
            ScenarioSpec::new(config, feeder, side, side)
        }
    };
    if let Some(c) = args.crews {
        spec.config.n_crews = c;
    }
    if let Some(d) = args.depots {
        spec.config.n_depots = d;
    }
    if let Some(n) = args.damaged {
        spec.config.n_damaged = n;
    }
    if let Some(f) = args.feeder_nodes {
        spec.feeder_nodes = f;
    }
    if let Some(g) = args.grid {
        spec.grid_w = g;
        spec.grid_h = g;
    }
    if let Some(h) = args.horizon {
        spec.config.horizon_steps = h;
    }
    if let Some(c) = args.cell_km {
        spec.cell_km = c;
    }
    if args.count == 0 {
        bail!("--count must be at least 1");
    }

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    let mut files = Vec::new();
    let mut seeds = Vec::new();
    for i in 0..args.count {
        let scenario_seed = rng::mix(args.seed, &[0x5ce0, i as u64]);
        let scenario = generate_scenario(&spec, scenario_seed)
            .with_context(|| format!("generating scenario {i}"))?;
        let name = format!("scenario_{i:03}.json");
        io::save_scenario(&scenario, &args.out.join(&name))?;
        files.push(name);
        seeds.push(scenario_seed);
    }

    let manifest = serde_json::json!({
        "command": "generate",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": args.seed,
        "count": args.count,
        "config": {
            "n_crews": spec.config.n_crews,
            "n_depots": spec.config.n_depots,
            "n_damaged": spec.config.n_damaged,
            "horizon_steps": spec.config.horizon_steps,
            "step_hours": spec.config.step_hours,
            "crew_capacity": spec.config.crew_capacity,
        },
        "feeder_nodes": spec.feeder_nodes,
        "grid": [spec.grid_w, spec.grid_h],
        "cell_km": spec.cell_km,
        "scenario_seeds": seeds,
        "files": files,
    });
    io::write_atomic(
        &args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    println!(
        "generated {} scenario(s) in {}",
        args.count,
        args.out.display()
    );
    Ok(())
}

/// GA settings file; any omitted key falls back to the shipped default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaConfigFile {
    generations: Option<usize>,
    population: Option<usize>,
    elite_ratio: Option<f64>,
    crossover_prob: Option<f64>,
    mutation_prob: Option<f64>,
    mutation_sigma: Option<f64>,
    init_sigma: Option<f64>,
    repeats: Option<usize>,
    hidden: Option<usize>,
    layers: Option<usize>,
}

impl GaConfigFile {
    fn into_config(self, seed: u64) -> GaConfig {
        let d = GaConfig::default();
        GaConfig {
            generations: self.generations.unwrap_or(d.generations),
            population: self.population.unwrap_or(d.population),
            elite_ratio: self.elite_ratio.unwrap_or(d.elite_ratio),
            crossover_prob: self.crossover_prob.unwrap_or(d.crossover_prob),
            mutation_prob: self.mutation_prob.unwrap_or(d.mutation_prob),
            mutation_sigma: self.mutation_sigma.unwrap_or(d.mutation_sigma),
            init_sigma: self.init_sigma.unwrap_or(d.init_sigma),
            repeats: self.repeats.unwrap_or(d.repeats),
            hidden: self.hidden.unwrap_or(d.hidden),
            layers: self.layers.unwrap_or(d.layers),
            seed,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Directory of scenario JSON files (every *.json except manifests).
    #[arg(long)]
    scenarios: PathBuf,
    /// GA settings (TOML key = value); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output genome checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Convergence CSV path (default: the checkpoint path with a .history.csv extension).
    #[arg(long)]
    history: Option<PathBuf>,
}

fn load_scenario_dir(dir: &Path) -> Result<Vec<SharedScenario>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading scenario directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|ext| ext == "json")
                && p.file_name().is_some_and(|n| n != "manifest.json")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no scenario *.json files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            io::load_scenario(p)
                .map(SharedScenario::new)
                .map_err(|e| anyhow!(e))
        })
        .collect()
}

pub fn train(args: TrainArgs) -> Result<()> {
    let env_set = load_scenario_dir(&args.scenarios)?;
    let file_cfg: GaConfigFile = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading GA config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => GaConfigFile::default(),
    };
    let config = file_cfg.into_config(args.seed);

    println!(
        "training: {} environments, population {}, {} generations, {} repeats",
        env_set.len(),
        config.population,
        config.generations,
        config.repeats
    );
    let start = Instant::now();
    let result = evolve(&config, &env_set)?;
    for stats in &result.history {
        println!(
            "generation {:>3}  best {:.4}  mean {:.4}",
            stats.generation, stats.best_fitness, stats.mean_fitness
        );
    }
    println!(
        "trained in {:.1} s; best fitness {:.4}",
        start.elapsed().as_secs_f64(),
        result.best_fitness
    );

    io::save_genome(&result.best, &args.out)?;
    let history_path = args.history.unwrap_or_else(|| {
        let mut p = args.out.clone();
        p.set_extension("history.csv");
        p
    });
    let mut csv = String::from("generation,best_fitness,mean_fitness\n");
    for stats in &result.history {
        csv.push_str(&format!(
            "{},{},{}\n",
            stats.generation, stats.best_fitness, stats.mean_fitness
        ));
    }
    io::write_atomic(&history_path, csv.as_bytes())?;
    println!(
        "checkpoint: {}  history: {}",
        args.out.display(),
        history_path.display()
    );
    Ok(())
}

pub enum PolicyChoice {
    Random,
    Greedy,
    Trained(Box<ActorGnn>),
}

pub fn load_policy(spec: &str) -> Result<PolicyChoice> {
    match spec {
        "random" => Ok(PolicyChoice::Random),
        "greedy" => Ok(PolicyChoice::Greedy),
        path => {
            let genome = io::load_genome(Path::new(path))?;
            let actor = ActorGnn::from_genome(&genome)?;
            Ok(PolicyChoice::Trained(Box::new(actor)))
        }
    }
}

impl PolicyChoice {
    fn controller(&self, episode_seed: u64) -> Box<dyn Controller> {
        match self {
            PolicyChoice::Random => Box::new(RandomController::new(episode_seed)),
            PolicyChoice::Greedy => Box::new(GreedyController),
            PolicyChoice::Trained(actor) => Box::new((**actor).clone()),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            PolicyChoice::Random => "random",
            PolicyChoice::Greedy => "greedy",
            PolicyChoice::Trained(_) => "trained",
        }
    }
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// `random`, `greedy`, or a genome checkpoint path.
    #[arg(long)]
    policy: String,
    #[arg(long)]
    scenarios: PathBuf,
    /// Total number of episodes, distributed round-robin over scenarios.
    #[arg(long, default_value_t = 64)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-episode rewards CSV.
    #[arg(long)]
    out: PathBuf,
    /// Also write one trace CSV per episode into this directory.
    #[arg(long)]
    traces: Option<PathBuf>,
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let env_set = load_scenario_dir(&args.scenarios)?;
    let policy = load_policy(&args.policy)?;
    if args.episodes == 0 {
        bail!("--episodes must be at least 1");
    }

    let mut csv = String::from("episode,scenario,seed,reward\n");
    let mut rewards = Vec::with_capacity(args.episodes);
    for e in 0..args.episodes {
        let scenario_idx = e % env_set.len();
        let repeat = (e / env_set.len()) as u64;
        let episode_seed = rng::episode_seed(args.seed, scenario_idx as u64, repeat);
        let mut controller = policy.controller(episode_seed);
        let outcome = env::run_episode(
            SharedScenario::clone(&env_set[scenario_idx]),
            episode_seed,
            BudgetMode::Stochastic,
            controller.as_mut(),
        )?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            e, scenario_idx, episode_seed, outcome.cumulative_reward
        ));
        rewards.push(outcome.cumulative_reward);
        if let Some(tdir) = &args.traces {
            io::write_trace_csv(&outcome.trace, &tdir.join(format!("episode_{e:04}.csv")))?;
        }
    }
    io::write_atomic(&args.out, csv.as_bytes())?;

    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rewards.len() as f64;
    println!(
        "{}: {} episodes, mean reward {:.4}, std {:.4}",
        policy.name(),
        rewards.len(),
        mean,
        var.sqrt()
    );
    Ok(())
}

#[derive(Args)]
pub struct PlanExactArgs {
    /// Scenario JSON file (instance must fit the exact-planner limits).
    #[arg(long)]
    scenario: PathBuf,
    /// Seed determinizing the damage draw (repair times, requirements).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comparison CSV: method,reward,compute_seconds.
    #[arg(long)]
    out: PathBuf,
    /// Optional trained-policy checkpoint to include in the comparison.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Optional path for the winning plan as JSON.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

/// Runs one policy on the determinized instance, timing only the incentive
/// computations (the planner analogue of forward-inference time).
fn run_policy_on_instance(
    initial: &EnvState,
    controller: &mut dyn Controller,
) -> Result<(f64, f64)> {
    let mut state = initial.clone();
    let mut obs = state.build_observation()?;
    let mut cumulative = 0.0;
    let mut inference = 0.0;
    loop {
        let t0 = Instant::now();
        let incentives = controller.incentives(&obs)?;
        inference += t0.elapsed().as_secs_f64();
        let result = state.step(&incentives)?;
        cumulative += result.reward;
        if result.done {
            break;
        }
        obs = result.observation;
    }
    Ok((cumulative, inference))
}

pub fn plan_exact(args: PlanExactArgs) -> Result<()> {
    let scenario = SharedScenario::new(io::load_scenario(&args.scenario)?);
    let (state, _) = EnvState::reset_deterministic(SharedScenario::clone(&scenario), args.seed)?;

    let t0 = Instant::now();
    let exact = exact_plan(&state)?;
    let exact_seconds = t0.elapsed().as_secs_f64();
    // Replay as a consistency check; the executor must reproduce the value.
    let replayed = simulate_plan(&state, &exact.plan)?;
    if replayed != exact.reward {
        bail!(
            "plan replay reward {replayed} disagrees with search value {}",
            exact.reward
        );
    }

    let mut rows = vec![("exact".to_string(), exact.reward, exact_seconds)];
    let mut comparison: Vec<(String, Box<dyn Controller>)> = vec![
        (
            "greedy".to_string(),
            Box::new(GreedyController) as Box<dyn Controller>,
        ),
        (
            "random".to_string(),
            Box::new(RandomController::new(args.seed)),
        ),
    ];
    if let Some(ckpt) = &args.policy {
        let genome = io::load_genome(ckpt)?;
        comparison.push((
            "trained".to_string(),
            Box::new(ActorGnn::from_genome(&genome)?),
        ));
    }
    for (name, mut controller) in comparison {
        let (reward, inference_seconds) = run_policy_on_instance(&state, controller.as_mut())?;
        rows.push((name, reward, inference_seconds));
    }

    let mut csv = String::from("method,reward,compute_seconds\n");
    for (name, reward, seconds) in &rows {
        csv.push_str(&format!("{name},{reward},{seconds}\n"));
        println!("{name:>8}  reward {reward:.4}  compute {seconds:.4} s");
    }
    io::write_atomic(&args.out, csv.as_bytes())?;
    println!("explored {} search nodes", exact.nodes_explored);

    if let Some(plan_path) = &args.plan_out {
        let damaged_ids: Vec<u32> = state.damaged_states().iter().map(|d| d.node.0).collect();
        let depot_ids: Vec<u32> = scenario.depots.iter().map(|d| d.0).collect();
        let doc = serde_json::json!({
            "depot_road_ids": depot_ids,
            "damaged_power_ids": damaged_ids,
            "reward": exact.reward,
            "plan": exact.plan,
        });
        io::write_atomic(plan_path, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    }
    Ok(())
}
