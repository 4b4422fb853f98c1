//! Browser demo bindings: generate a scenario, run an episode step by step
//! under a chosen policy, and read render-ready frames as JSON.
//!
//! Build with `wasm-pack build crates/demo --target web --out-dir www/pkg`
//! and serve `crates/demo/www/`. Everything crosses the JS boundary as JSON
//! strings, so no further glue is needed. The core logic lives in `runner`
//! (plain `Result<_, String>`) so it is testable on any target; the
//! `wasm_bindgen` layer only converts errors at the boundary.

use wasm_bindgen::prelude::*;

pub mod runner;

use runner::Runner;

fn err_to_js(e: String) -> JsValue {
    JsValue::from_str(&e)
}

/// Generates a scenario and returns it in the standard scenario JSON format
/// (road/power geometry included, ready to draw).
#[wasm_bindgen]
pub fn generate_demo_scenario(
    seed: u64,
    crews: usize,
    depots: usize,
    damaged: usize,
    feeder_nodes: usize,
    grid: usize,
    horizon: u32,
) -> Result<String, JsValue> {
    runner::generate_demo_scenario(seed, crews, depots, damaged, feeder_nodes, grid, horizon)
        .map_err(err_to_js)
}

/// One episode under one policy, stepped from JavaScript.
#[wasm_bindgen]
pub struct EpisodeRunner {
    inner: Runner,
}

#[wasm_bindgen]
impl EpisodeRunner {
    /// `policy` is one of `random`, `greedy`, `trained`.
    #[wasm_bindgen(constructor)]
    pub fn new(scenario_json: &str, policy: &str, seed: u64) -> Result<EpisodeRunner, JsValue> {
        Ok(EpisodeRunner {
            inner: Runner::new(scenario_json, policy, seed).map_err(err_to_js)?,
        })
    }

    pub fn done(&self) -> bool {
        self.inner.done()
    }

    /// Current frame as JSON (also valid before the first step).
    pub fn frame(&self) -> Result<String, JsValue> {
        self.inner.frame().map_err(err_to_js)
    }

    /// Advances one step and returns the new frame.
    pub fn step(&mut self) -> Result<String, JsValue> {
        self.inner.step().map_err(err_to_js)
    }

    /// Runs the episode to completion and returns the restored-power
    /// fraction after each step (for curve comparisons).
    pub fn run_curve(&mut self) -> Result<String, JsValue> {
        self.inner.run_curve().map_err(err_to_js)
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.inner.cumulative_reward()
    }
}
