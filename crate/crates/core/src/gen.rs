//! Synthetic network generators and named scenario presets.
//!
//! Stand-ins for real feeder/map data at desk scale: a random radial feeder
//! laid out over the road extent, and a jittered lattice road network with a
//! few deletions. Both are seed-deterministic and always pass
//! `validate_scenario`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::EpisodeConfig;
use crate::error::{Error, Result};
use crate::net::TransportNetwork;
use crate::net::{
    couple_networks, PowerNetwork, PowerNode, PowerNodeId, RoadEdge, RoadNode, RoadNodeId, Scenario,
};
use crate::rng::{self, tag};

/// Everything needed to generate one scenario family.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub config: EpisodeConfig,
    pub feeder_nodes: usize,
    pub grid_w: usize,
    pub grid_h: usize,
    /// Lattice spacing in km.
    pub cell_km: f64,
    /// Speed-limit range in km/h, sampled per directed edge.
    pub speed_range: (f64, f64),
    /// Load range in kW, sampled per consumer bus.
    pub load_range: (f64, f64),
    /// Fraction of directed road edges removed (kept only while the network
    /// stays strongly connected).
    pub edge_deletion: f64,
}

impl ScenarioSpec {
    pub fn new(config: EpisodeConfig, feeder_nodes: usize, grid_w: usize, grid_h: usize) -> Self {
        Self {
            config,
            feeder_nodes,
            grid_w,
            grid_h,
            cell_km: 1.0,
            speed_range: (30.0, 60.0),
            load_range: (10.0, 200.0),
            edge_deletion: 0.05,
        }
    }
}

fn table_spec(n_crews: usize, n_depots: usize, n_damaged: usize) -> ScenarioSpec {
    let feeder = (5 * n_damaged).max(24);
    let side = ((1.7 * feeder as f64).sqrt().ceil() as usize).max(4);
    ScenarioSpec::new(
        EpisodeConfig::new(n_crews, n_depots, n_damaged),
        feeder,
        side,
        side,
    )
}

fn desk_spec(
    n_crews: usize,
    n_depots: usize,
    n_damaged: usize,
    horizon: u32,
    feeder: usize,
    side: usize,
) -> ScenarioSpec {
    let mut config = EpisodeConfig::new(n_crews, n_depots, n_damaged);
    config.horizon_steps = horizon;
    let mut spec = ScenarioSpec::new(config, feeder, side, side);
    spec.cell_km = 1.5;
    spec
}

/// Named scenario presets. The `train`/`eval-*` family covers the standard
/// benchmark sizes; the `desk-*` family is sized for quick local experiments
/// and the acceptance suite.
pub fn preset(name: &str) -> Option<ScenarioSpec> {
    let spec = match name {
        "train" => table_spec(8, 4, 96),
        "eval-a" => table_spec(4, 2, 48),
        "eval-b" => table_spec(8, 4, 96),
        "eval-c" => table_spec(16, 8, 192),
        "eval-d" => table_spec(32, 16, 384),
        "eval-oa" => table_spec(2, 3, 5),
        "eval-ob" => table_spec(2, 3, 17),
        "desk-train" => desk_spec(4, 2, 12, 8, 60, 10),
        "desk-double" => desk_spec(8, 4, 24, 8, 120, 14),
        "desk-oracle" => desk_spec(2, 2, 5, 16, 24, 6),
        _ => return None,
    };
    Some(spec)
}

pub const PRESET_NAMES: &[&str] = &[
    "train",
    "eval-a",
    "eval-b",
    "eval-c",
    "eval-d",
    "eval-oa",
    "eval-ob",
    "desk-train",
    "desk-double",
    "desk-oracle",
];

/// Random radial feeder: a recursive tree rooted at one source, laid out
/// inside `extent` (km). Non-source loads are uniform in `load_range`.
pub fn generate_feeder(
    n_nodes: usize,
    extent: (f64, f64),
    load_range: (f64, f64),
    rng: &mut impl Rng,
) -> PowerNetwork {
    assert!(n_nodes >= 2, "feeder needs a source and at least one load");
    let (w, h) = extent;
    let step = (w.min(h) / (n_nodes as f64).sqrt()).max(0.25);

    let mut nodes: Vec<PowerNode> = Vec::with_capacity(n_nodes);
    let mut edges = Vec::with_capacity(n_nodes - 1);
    nodes.push(PowerNode {
        id: PowerNodeId(0),
        x: rng.random_range(0.25 * w..0.75 * w),
        y: rng.random_range(0.25 * h..0.75 * h),
        load_kw: 0.0,
        is_source: true,
    });
    for i in 1..n_nodes {
        // Bias toward extending the most recent branch so feeders develop
        // long backbones instead of star shapes.
        let parent = if rng.random_bool(0.5) {
            i - 1
        } else {
            rng.random_range(0..i)
        };
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let radius = rng.random_range(0.5 * step..1.5 * step);
        let (px, py) = (nodes[parent].x, nodes[parent].y);
        nodes.push(PowerNode {
            id: PowerNodeId(i as u32),
            x: (px + radius * angle.cos()).clamp(0.0, w),
            y: (py + radius * angle.sin()).clamp(0.0, h),
            load_kw: rng.random_range(load_range.0..load_range.1),
            is_source: false,
        });
        edges.push((PowerNodeId(parent as u32), PowerNodeId(i as u32)));
    }
    PowerNetwork::new(nodes, edges).expect("generated feeder is structurally valid")
}

fn strongly_connected(n: usize, edges: &[RoadEdge], alive: &[bool]) -> bool {
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for (e, edge) in edges.iter().enumerate() {
        if alive[e] {
            fwd[edge.from.0 as usize].push(edge.to.0 as usize);
            bwd[edge.to.0 as usize].push(edge.from.0 as usize);
        }
    }
    let full_reach = |adj: &Vec<Vec<usize>>| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    };
    full_reach(&fwd) && full_reach(&bwd)
}

/// Perturbed lattice road network. Every 4-neighbor pair gets a directed
/// edge in each direction with its own sampled speed limit; a fraction of
/// edges is then deleted, skipping deletions that would break strong
/// connectivity.
pub fn generate_roads(
    grid_w: usize,
    grid_h: usize,
    cell_km: f64,
    speed_range: (f64, f64),
    edge_deletion: f64,
    rng: &mut impl Rng,
) -> TransportNetwork {
    assert!(grid_w >= 2 && grid_h >= 2, "grid must be at least 2x2");
    let id = |col: usize, row: usize| RoadNodeId((row * grid_w + col) as u32);

    let mut nodes = Vec::with_capacity(grid_w * grid_h);
    for row in 0..grid_h {
        for col in 0..grid_w {
            let jitter = 0.25 * cell_km;
            nodes.push(RoadNode {
                id: id(col, row),
                x: col as f64 * cell_km + rng.random_range(-jitter..jitter),
                y: row as f64 * cell_km + rng.random_range(-jitter..jitter),
            });
        }
    }

    let mut edges = Vec::new();
    for row in 0..grid_h {
        for col in 0..grid_w {
            let mut neighbors = Vec::new();
            if col + 1 < grid_w {
                neighbors.push(id(col + 1, row));
            }
            if row + 1 < grid_h {
                neighbors.push(id(col, row + 1));
            }
            for b in neighbors {
                let a = id(col, row);
                let na = &nodes[a.0 as usize];
                let nb = &nodes[b.0 as usize];
                let length = ((na.x - nb.x).powi(2) + (na.y - nb.y).powi(2)).sqrt();
                for (from, to) in [(a, b), (b, a)] {
                    let speed = rng.random_range(speed_range.0..speed_range.1);
                    edges.push(RoadEdge {
                        from,
                        to,
                        travel_time_h: length / speed,
                    });
                }
            }
        }
    }

    // Random deletions, rejected when they would break strong connectivity.
    let n = nodes.len();
    let mut alive = vec![true; edges.len()];
    let target_deletions = (edge_deletion * edges.len() as f64).floor() as usize;
    let mut candidates: Vec<usize> = (0..edges.len()).collect();
    candidates.shuffle(rng);
    let mut deleted = 0;
    for e in candidates {
        if deleted >= target_deletions {
            break;
        }
        alive[e] = false;
        if strongly_connected(n, &edges, &alive) {
            deleted += 1;
        } else {
            alive[e] = true;
        }
    }
    let surviving: Vec<RoadEdge> = edges
        .into_iter()
        .zip(&alive)
        .filter(|(_, &keep)| keep)
        .map(|(e, _)| e)
        .collect();

    TransportNetwork::new(nodes, surviving).expect("generated roads are structurally valid")
}

/// Generates a complete validated scenario for `spec` from one seed.
/// Roads, feeder and depot placement each draw from their own substream, so
/// e.g. changing the depot count does not reshape the networks.
pub fn generate_scenario(spec: &ScenarioSpec, seed: u64) -> Result<Scenario> {
    spec.config.validate()?;
    if spec.feeder_nodes < 2 {
        return Err(Error::InvalidConfig("feeder_nodes must be >= 2".into()));
    }
    if spec.config.n_damaged + 1 > spec.feeder_nodes {
        return Err(Error::InvalidConfig(format!(
            "n_damaged = {} needs at least {} feeder nodes, spec has {}",
            spec.config.n_damaged,
            spec.config.n_damaged + 1,
            spec.feeder_nodes
        )));
    }
    if spec.config.n_depots > spec.grid_w * spec.grid_h {
        return Err(Error::InvalidConfig(format!(
            "n_depots = {} exceeds the {} road nodes",
            spec.config.n_depots,
            spec.grid_w * spec.grid_h
        )));
    }

    let mut roads_rng = rng::stream(seed, &[tag::ROADS]);
    let roads = generate_roads(
        spec.grid_w,
        spec.grid_h,
        spec.cell_km,
        spec.speed_range,
        spec.edge_deletion,
        &mut roads_rng,
    );

    let extent = (
        (spec.grid_w - 1) as f64 * spec.cell_km,
        (spec.grid_h - 1) as f64 * spec.cell_km,
    );
    let mut feeder_rng = rng::stream(seed, &[tag::FEEDER]);
    let power = generate_feeder(spec.feeder_nodes, extent, spec.load_range, &mut feeder_rng);

    let coupling = couple_networks(&power, &roads)?;

    let mut depot_rng = rng::stream(seed, &[tag::DEPOTS]);
    let depots: Vec<RoadNodeId> =
        rand::seq::index::sample(&mut depot_rng, roads.len(), spec.config.n_depots)
            .into_iter()
            .map(|i| roads.nodes()[i].id)
            .collect();

    let mut config = spec.config.clone();
    config.seed = seed;
    Scenario::new(power, roads, coupling, depots, config).validated()
}
