// Demo driver: wires the wasm module to the canvas map and curve plot.
// Build the module first:
//   wasm-pack build crates/demo --target web --out-dir www/pkg
// then serve crates/demo/www/ from any static file server.

const errorBox = document.getElementById("error");

let wasm;
try {
  wasm = await import("./pkg/gridmend_demo.js");
  await wasm.default();
} catch (e) {
  errorBox.style.display = "block";
  errorBox.innerHTML =
    "Could not load the WebAssembly module. Build it with " +
    "<code>wasm-pack build crates/demo --target web --out-dir www/pkg</code> " +
    "and serve this directory over HTTP.<br><br>" + e;
  throw e;
}

const $ = (id) => document.getElementById(id);
const map = $("map").getContext("2d");
const curveCtx = $("curve").getContext("2d");

let scenario = null; // parsed scenario JSON
let runner = null;
let timer = null;
let curves = []; // [{label, color, points, cumulative}]
let liveCurve = null;

const POLICY_COLORS = { trained: "#2d6cdf", greedy: "#e08a00", random: "#8a93a2" };

function controls() {
  return {
    seed: BigInt($("seed").value || 0),
    crews: +$("crews").value,
    depots: +$("depots").value,
    damaged: +$("damaged").value,
    feeder: +$("feeder").value,
    grid: +$("grid").value,
    horizon: +$("horizon").value,
    policy: $("policy").value,
  };
}

function worldTransform() {
  const xs = scenario.road_nodes.map((n) => n.x);
  const ys = scenario.road_nodes.map((n) => n.y);
  const pad = 24;
  const minX = Math.min(...xs), maxX = Math.max(...xs);
  const minY = Math.min(...ys), maxY = Math.max(...ys);
  const w = map.canvas.width - 2 * pad;
  const h = map.canvas.height - 2 * pad;
  const scale = Math.min(w / (maxX - minX || 1), h / (maxY - minY || 1));
  return (x, y) => [pad + (x - minX) * scale, pad + (y - minY) * scale];
}

function drawScenario(frame) {
  const t = worldTransform();
  const c = map;
  c.clearRect(0, 0, c.canvas.width, c.canvas.height);

  const roadById = new Map(scenario.road_nodes.map((n) => [n.id, n]));
  const powerById = new Map(scenario.power_nodes.map((n) => [n.id, n]));

  // Road edges.
  c.strokeStyle = "#ccd4db";
  c.lineWidth = 1.5;
  for (const e of scenario.road_edges) {
    const a = roadById.get(e.from), b = roadById.get(e.to);
    c.beginPath();
    c.moveTo(...t(a.x, a.y));
    c.lineTo(...t(b.x, b.y));
    c.stroke();
  }

  // Power edges.
  c.strokeStyle = "rgba(224, 138, 0, 0.45)";
  c.lineWidth = 1.2;
  for (const [a, b] of scenario.power_edges) {
    const pa = powerById.get(a), pb = powerById.get(b);
    c.beginPath();
    c.moveTo(...t(pa.x, pa.y));
    c.lineTo(...t(pb.x, pb.y));
    c.stroke();
  }

  const damagedState = new Map((frame ? frame.damaged : []).map((d) => [d.power_id, d]));

  // Coupling links for damaged nodes.
  c.strokeStyle = "rgba(226, 87, 76, 0.5)";
  c.setLineDash([3, 3]);
  for (const d of damagedState.values()) {
    const p = powerById.get(d.power_id), r = roadById.get(d.road_id);
    c.beginPath();
    c.moveTo(...t(p.x, p.y));
    c.lineTo(...t(r.x, r.y));
    c.stroke();
  }
  c.setLineDash([]);

  // Power nodes.
  for (const n of scenario.power_nodes) {
    const [x, y] = t(n.x, n.y);
    const d = damagedState.get(n.id);
    if (n.is_source) {
      c.fillStyle = "#2d9c4a";
      c.fillRect(x - 5, y - 5, 10, 10);
      continue;
    }
    const r = 2 + 3 * Math.sqrt(n.load_kw / 200);
    if (d) {
      c.fillStyle = d.damaged ? "#e2574c" : "#59b36b";
    } else {
      c.fillStyle = "#e0a96e";
    }
    c.beginPath();
    c.arc(x, y, d ? r + 1.5 : r, 0, 2 * Math.PI);
    c.fill();
    if (d && d.damaged) {
      c.strokeStyle = "#a02c23";
      c.lineWidth = 1;
      c.stroke();
    }
  }

  // Depots.
  c.fillStyle = "#2d6cdf";
  for (const id of scenario.depots) {
    const n = roadById.get(id);
    const [x, y] = t(n.x, n.y);
    c.fillRect(x - 5, y - 5, 10, 10);
  }

  // Crews.
  if (frame) {
    frame.crews.forEach((crew, i) => {
      const [x, y] = t(crew.x, crew.y);
      c.fillStyle = "#7a3ce0";
      c.beginPath();
      c.arc(x, y, 6, 0, 2 * Math.PI);
      c.fill();
      c.fillStyle = "#fff";
      c.font = "9px sans-serif";
      c.textAlign = "center";
      c.textBaseline = "middle";
      c.fillText(String(crew.cargo), x, y);
      c.fillStyle = "#4a5560";
      c.font = "10px sans-serif";
      c.fillText(`c${i}`, x, y - 11);
    });
  }
}

function drawCurves() {
  const c = curveCtx;
  const w = c.canvas.width, h = c.canvas.height;
  const padL = 36, padB = 26, padT = 12, padR = 10;
  c.clearRect(0, 0, w, h);

  c.strokeStyle = "#c3ccd4";
  c.lineWidth = 1;
  c.beginPath();
  c.moveTo(padL, padT);
  c.lineTo(padL, h - padB);
  c.lineTo(w - padR, h - padB);
  c.stroke();

  c.fillStyle = "#5a6b7c";
  c.font = "11px sans-serif";
  c.textAlign = "center";
  c.fillText("step (hours)", (padL + w - padR) / 2, h - 8);
  c.save();
  c.translate(11, (padT + h - padB) / 2);
  c.rotate(-Math.PI / 2);
  c.fillText("power restored", 0, 0);
  c.restore();
  c.textAlign = "right";
  c.fillText("100%", padL - 4, padT + 6);
  c.fillText("0%", padL - 4, h - padB + 4);

  const all = liveCurve ? [...curves, liveCurve] : curves;
  const maxLen = Math.max(2, ...all.map((k) => k.points.length));
  const sx = (i) => padL + (i / (maxLen - 1)) * (w - padL - padR);
  const sy = (v) => h - padB - v * (h - padB - padT);

  for (const k of all) {
    c.strokeStyle = k.color;
    c.lineWidth = 2;
    c.beginPath();
    k.points.forEach((v, i) => (i === 0 ? c.moveTo(sx(i), sy(v)) : c.lineTo(sx(i), sy(v))));
    c.stroke();
  }

  let ly = padT + 10;
  c.textAlign = "left";
  for (const k of all) {
    c.fillStyle = k.color;
    c.fillRect(padL + 8, ly - 7, 14, 3);
    c.fillStyle = "#42525f";
    const score = k.cumulative == null ? "" : `  reward ${k.cumulative.toFixed(3)}`;
    c.fillText(`${k.label}${score}`, padL + 26, ly - 2);
    ly += 15;
  }
}

function setStatus(frame) {
  if (!frame) {
    $("status").textContent = "Generate a scenario to begin.";
    return;
  }
  const pct = (100 * frame.restored_fraction).toFixed(1);
  $("status").textContent =
    `step ${frame.step}/${frame.horizon}   served ${frame.p_current.toFixed(0)} / ` +
    `${frame.p_max.toFixed(0)} kW (${pct}% of lost power restored)\n` +
    `repaired ${frame.n_repaired}/${frame.damaged.length}   ` +
    `cumulative reward ${frame.cumulative_reward.toFixed(4)}`;
}

function stopTimer() {
  if (timer) {
    clearInterval(timer);
    timer = null;
    $("btn-run").textContent = "Run";
  }
}

function generate() {
  stopTimer();
  const a = controls();
  try {
    const json = wasm.generate_demo_scenario(
      a.seed, a.crews, a.depots, a.damaged, a.feeder, a.grid, a.horizon
    );
    scenario = JSON.parse(json);
    runner = new wasm.EpisodeRunner(json, a.policy, a.seed);
    const frame = JSON.parse(runner.frame());
    curves = [];
    liveCurve = {
      label: a.policy,
      color: POLICY_COLORS[a.policy],
      points: [frame.restored_fraction],
      cumulative: null,
    };
    drawScenario(frame);
    drawCurves();
    setStatus(frame);
    $("compare-out").textContent = "";
    for (const id of ["btn-run", "btn-step", "btn-compare"]) $(id).disabled = false;
  } catch (e) {
    $("status").textContent = "generation failed: " + e;
  }
}

function stepOnce() {
  if (!runner || runner.done()) {
    stopTimer();
    return;
  }
  const frame = JSON.parse(runner.step());
  liveCurve.points.push(frame.restored_fraction);
  if (frame.done) {
    liveCurve.cumulative = frame.cumulative_reward;
    stopTimer();
  }
  drawScenario(frame);
  drawCurves();
  setStatus(frame);
}

function toggleRun() {
  if (timer) {
    stopTimer();
    return;
  }
  if (!runner || runner.done()) return;
  $("btn-run").textContent = "Pause";
  timer = setInterval(stepOnce, 350);
}

function compare() {
  stopTimer();
  if (!scenario) return;
  const a = controls();
  const json = JSON.stringify(scenario);
  curves = [];
  liveCurve = null;
  const lines = [];
  for (const policy of ["trained", "greedy", "random"]) {
    const r = new wasm.EpisodeRunner(json, policy, a.seed);
    const out = JSON.parse(r.run_curve());
    curves.push({
      label: policy,
      color: POLICY_COLORS[policy],
      points: out.curve,
      cumulative: out.cumulative_reward,
    });
    lines.push(`${policy}: cumulative reward ${out.cumulative_reward.toFixed(4)}`);
  }
  drawCurves();
  $("compare-out").textContent =
    "Same scenario, damage draw and crew budgets for every policy.\n" + lines.join("\n");
  $("compare-out").style.whiteSpace = "pre-line";
}

$("btn-generate").addEventListener("click", generate);
$("btn-step").addEventListener("click", stepOnce);
$("btn-run").addEventListener("click", toggleRun);
$("btn-compare").addEventListener("click", compare);
