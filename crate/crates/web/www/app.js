import init, { scenarios, run_scenario, compare_pair, simulate } from "./pkg/mfg_epi_web.js";

const KNOBS = ["horizon", "beta_scale", "infection_cost_scale", "vaccination_cost_scale"];
const COLORS = { L: "#d62728", M: "#2ca02c", H: "#1f77b4" };
const $ = (id) => document.getElementById(id);

function colorFor(label) {
  return COLORS[label[0]] || "#666";
}

function knobs() {
  const out = {};
  for (const k of KNOBS) out[k] = Number($(k).value);
  return JSON.stringify(out);
}

function status(text, error = false) {
  $("status").textContent = text;
  $("status").className = error ? "err" : "";
}

// series: [{ label, color, dash, points: [[t, y], ...] }]
function chart(title, series) {
  const canvas = document.createElement("canvas");
  const w = (canvas.width = 940);
  const h = (canvas.height = 260);
  const ctx = canvas.getContext("2d");
  const pad = { l: 56, r: 150, t: 24, b: 28 };
  const all = series.flatMap((s) => s.points);
  let [x0, x1] = [Math.min(...all.map((p) => p[0])), Math.max(...all.map((p) => p[0]))];
  let [y0, y1] = [Math.min(...all.map((p) => p[1])), Math.max(...all.map((p) => p[1]))];
  if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
  const sx = (x) => pad.l + ((x - x0) / (x1 - x0 || 1)) * (w - pad.l - pad.r);
  const sy = (y) => h - pad.b - ((y - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.font = "12px sans-serif";
  ctx.fillStyle = "#222";
  ctx.fillText(title, pad.l, 16);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  for (let i = 0; i <= 4; i++) {
    const y = y0 + ((y1 - y0) * i) / 4;
    ctx.fillText(y.toPrecision(3), 4, sy(y) + 4);
    const x = x0 + ((x1 - x0) * i) / 4;
    ctx.fillText(x.toFixed(0), sx(x) - 8, h - 10);
  }
  series.forEach((s, i) => {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.points.forEach(([x, y], j) => (j ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
    ctx.stroke();
    const ly = pad.t + 8 + 15 * i;
    ctx.beginPath();
    ctx.moveTo(w - pad.r + 10, ly);
    ctx.lineTo(w - pad.r + 32, ly);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillText(s.label, w - pad.r + 38, ly + 4);
  });
  return canvas;
}

function groupSeries(result, key, dash, suffix = "") {
  return result.groups.map((g) => ({
    label: g.label + suffix,
    color: colorFor(g.label),
    dash: dash || (g.label.endsWith("I") ? [2, 3] : []),
    points: g[key],
  }));
}

function table(head, rows) {
  const fmt = (v) => (typeof v === "number" ? v.toFixed(4) : v);
  return (
    "<table><tr>" + head.map((h) => `<th>${h}</th>`).join("") + "</tr>" +
    rows.map((r) => "<tr>" + r.map((v) => `<td>${fmt(v)}</td>`).join("") + "</tr>").join("") +
    "</table>"
  );
}

function show(canvases, html) {
  $("charts").replaceChildren(...canvases);
  $("table").innerHTML = html;
}

function timed(label, fn) {
  status(label + "…");
  // Let the status line paint before the solver blocks the thread.
  setTimeout(() => {
    const t0 = performance.now();
    try {
      const note = fn();
      status(`${note} (${((performance.now() - t0) / 1000).toFixed(1)} s)`);
    } catch (e) {
      status(String(e), true);
    }
  }, 20);
}

function onSolve() {
  timed("Solving", () => {
    const r = JSON.parse(run_scenario($("scenario").value, knobs()));
    const peaks = r.peaks;
    const rows = peaks.infected_proportion.map((p, k) => [
      p.group, p.value, p.time, peaks.socialization_s[k].value, peaks.vaccination[k].value,
    ]);
    show(
      [
        chart("Infected proportion", groupSeries(r, "I")),
        chart("Socialization of susceptibles", groupSeries(r, "alpha_S")),
        chart("Vaccination rate", groupSeries(r, "nu")),
      ],
      table(["group", "peak infected", "at t", "lowest socialization", "peak vaccination"], rows),
    );
    return `${r.name}: ${r.converged ? "converged" : "NOT converged"} in ${r.iterations} iterations`;
  });
}

function onCompare() {
  timed("Solving both members", () => {
    const r = JSON.parse(compare_pair($("pair").value, knobs()));
    const b = r.baseline, t = r.treatment;
    const both = (key) => [
      ...groupSeries(b.result, key, [], ` (${b.name})`),
      ...groupSeries(t.result, key, [7, 4], ` (${t.name})`),
    ];
    const rows = r.peak_differences.map((d) => [d.quantity, d.group, d.treatment_group, d.signed]);
    show(
      [chart("Infected proportion", both("I")), chart("Vaccination rate", both("nu"))],
      table(["quantity", "group", "treatment group", "treatment − baseline"], rows),
    );
    return `${r.name}: ${b.name} solid, ${t.name} dashed`;
  });
}

function onSimulate() {
  timed("Simulating", () => {
    const r = JSON.parse(simulate($("scenario").value, knobs(), 5000, 10, 2024));
    const series = r.groups.flatMap((g) => [
      { label: g.label + " mean field", color: colorFor(g.label), dash: [], points: g.mean_field },
      { label: g.label + " agents", color: colorFor(g.label), dash: [2, 3], points: g.simulated },
    ]);
    const rows = r.groups.map((g, k) => [g.label, r.group_sizes[k]]);
    show([chart("Infected proportion: mean field vs simulated agents", series)], table(["group", "agents"], rows));
    return `${r.agents} agents, ${r.replicas} replicas, largest gap in infected share ${r.sup_deviation.toFixed(4)}`;
  });
}

async function main() {
  await init();
  const cat = JSON.parse(scenarios());
  for (const s of cat.scenarios) $("scenario").add(new Option(`${s.name}: ${s.description}`, s.name));
  for (const p of cat.comparisons) $("pair").add(new Option(p.name, p.name));
  for (const k of KNOBS) {
    const out = document.querySelector(`output[for=${k}]`);
    const sync = () => (out.value = $(k).value);
    $(k).addEventListener("input", sync);
    sync();
  }
  $("solve").onclick = onSolve;
  $("compare").onclick = onCompare;
  $("simulate").onclick = onSimulate;
  status("Ready.");
}

main().catch((e) => status(String(e), true));
