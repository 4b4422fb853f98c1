//! File formats: scenario JSON, genome checkpoints, and the CSV outputs
//! behind training/evaluation runs.
//!
//! Scenario files carry `power_nodes`, `power_edges`, `road_nodes`,
//! `road_edges`, `depots` and `config`. Road edges state either
//! `travel_time_h` directly or `length_km` + `speed_kmh` (converted on
//! load). Loading validates the scenario and rejects files with violations.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::EpisodeConfig;
use crate::env::TraceRow;
use crate::error::{Error, Result};
use crate::net::{
    couple_networks, PowerNetwork, PowerNode, PowerNodeId, RoadEdge, RoadNode, RoadNodeId,
    Scenario, TransportNetwork,
};
use crate::policy::{GenomeLayout, PolicyGenome};

pub const GENOME_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RoadEdgeRecord {
    from: u32,
    to: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    travel_time_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    length_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    speed_kmh: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PowerNodeRecord {
    id: u32,
    x: f64,
    y: f64,
    load_kw: f64,
    is_source: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RoadNodeRecord {
    id: u32,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioFile {
    power_nodes: Vec<PowerNodeRecord>,
    power_edges: Vec<(u32, u32)>,
    road_nodes: Vec<RoadNodeRecord>,
    road_edges: Vec<RoadEdgeRecord>,
    depots: Vec<u32>,
    config: EpisodeConfig,
}

fn scenario_to_file(s: &Scenario) -> ScenarioFile {
    ScenarioFile {
        power_nodes: s
            .power
            .nodes()
            .iter()
            .map(|n| PowerNodeRecord {
                id: n.id.0,
                x: n.x,
                y: n.y,
                load_kw: n.load_kw,
                is_source: n.is_source,
            })
            .collect(),
        power_edges: s.power.edges().iter().map(|&(a, b)| (a.0, b.0)).collect(),
        road_nodes: s
            .roads
            .nodes()
            .iter()
            .map(|n| RoadNodeRecord {
                id: n.id.0,
                x: n.x,
                y: n.y,
            })
            .collect(),
        road_edges: s
            .roads
            .edges()
            .iter()
            .map(|e| RoadEdgeRecord {
                from: e.from.0,
                to: e.to.0,
                travel_time_h: Some(e.travel_time_h),
                length_km: None,
                speed_kmh: None,
            })
            .collect(),
        depots: s.depots.iter().map(|d| d.0).collect(),
        config: s.config.clone(),
    }
}

fn file_to_scenario(file: ScenarioFile, origin: &str) -> Result<Scenario> {
    let power_nodes: Vec<PowerNode> = file
        .power_nodes
        .into_iter()
        .map(|n| PowerNode {
            id: PowerNodeId(n.id),
            x: n.x,
            y: n.y,
            load_kw: n.load_kw,
            is_source: n.is_source,
        })
        .collect();
    let power_edges: Vec<(PowerNodeId, PowerNodeId)> = file
        .power_edges
        .into_iter()
        .map(|(a, b)| (PowerNodeId(a), PowerNodeId(b)))
        .collect();
    let power = PowerNetwork::new(power_nodes, power_edges).map_err(|e| Error::Parse {
        path: origin.to_string(),
        detail: e.to_string(),
    })?;

    let road_nodes: Vec<RoadNode> = file
        .road_nodes
        .into_iter()
        .map(|n| RoadNode {
            id: RoadNodeId(n.id),
            x: n.x,
            y: n.y,
        })
        .collect();
    let mut road_edges = Vec::with_capacity(file.road_edges.len());
    for (i, e) in file.road_edges.into_iter().enumerate() {
        let travel_time_h = match (e.travel_time_h, e.length_km, e.speed_kmh) {
            (Some(t), None, None) => t,
            (None, Some(len), Some(speed)) => {
                if speed.is_nan() || speed <= 0.0 {
                    return Err(Error::Parse {
                        path: origin.to_string(),
                        detail: format!("road edge #{i}: speed_kmh must be positive, got {speed}"),
                    });
                }
                len / speed
            }
            _ => {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    detail: format!(
                        "road edge #{i}: expected either travel_time_h or length_km + speed_kmh"
                    ),
                });
            }
        };
        road_edges.push(RoadEdge {
            from: RoadNodeId(e.from),
            to: RoadNodeId(e.to),
            travel_time_h,
        });
    }
    let roads = TransportNetwork::new(road_nodes, road_edges).map_err(|e| Error::Parse {
        path: origin.to_string(),
        detail: e.to_string(),
    })?;

    let coupling = couple_networks(&power, &roads)?;
    let depots = file.depots.into_iter().map(RoadNodeId).collect();
    Scenario::new(power, roads, coupling, depots, file.config).validated()
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&scenario_to_file(s)).expect("scenario serializes")
}

pub fn scenario_from_json(json: &str, origin: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(json).map_err(|e| Error::Parse {
        path: origin.to_string(),
        detail: e.to_string(),
    })?;
    file_to_scenario(file, origin)
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    write_atomic(path, scenario_to_json(s).as_bytes())
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    scenario_from_json(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GenomeFile {
    format_version: u32,
    feature_dim: usize,
    hidden: usize,
    layers: usize,
    values: Vec<f64>,
}

pub fn genome_to_json(genome: &PolicyGenome) -> String {
    let file = GenomeFile {
        format_version: GENOME_FORMAT_VERSION,
        feature_dim: genome.layout.feature_dim,
        hidden: genome.layout.hidden,
        layers: genome.layout.layers,
        values: genome.values.clone(),
    };
    serde_json::to_string(&file).expect("genome serializes")
}

pub fn genome_from_json(json: &str, origin: &str) -> Result<PolicyGenome> {
    let file: GenomeFile = serde_json::from_str(json).map_err(|e| Error::Parse {
        path: origin.to_string(),
        detail: e.to_string(),
    })?;
    if file.format_version != GENOME_FORMAT_VERSION {
        return Err(Error::Parse {
            path: origin.to_string(),
            detail: format!("unsupported genome format_version {}", file.format_version),
        });
    }
    let genome = PolicyGenome {
        layout: GenomeLayout {
            feature_dim: file.feature_dim,
            hidden: file.hidden,
            layers: file.layers,
        },
        values: file.values,
    };
    genome.validate()?;
    Ok(genome)
}

pub fn save_genome(genome: &PolicyGenome, path: &Path) -> Result<()> {
    write_atomic(path, genome_to_json(genome).as_bytes())
}

pub fn load_genome(path: &Path) -> Result<PolicyGenome> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    genome_from_json(&text, &path.display().to_string())
}

/// Episode trace CSV: `step,p_current_kw,reward,cumulative_reward,n_repaired`.
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,p_current_kw,reward,cumulative_reward,n_repaired\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.step, row.p_current_kw, row.reward, row.cumulative_reward, row.n_repaired
        ));
    }
    out
}

pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    write_atomic(path, trace_to_csv(trace).as_bytes())
}

/// Writes via a temporary sibling and renames, so partially-written files
/// never appear under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}
