import init, { equilibrium_curves, implied_price_curve, tim_schedule } from "./pkg/impact_games_wasm.js";

const COLORS = ["#0969da", "#cf222e", "#8250df", "#1a7f37", "#9a6700"];

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height;
  const pad = { l: 56, r: 12, t: 12, b: 30 };
  ctx.clearRect(0, 0, w, h);

  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const s of series) {
    for (let i = 0; i < s.x.length; i++) {
      xmin = Math.min(xmin, s.x[i]); xmax = Math.max(xmax, s.x[i]);
      ymin = Math.min(ymin, s.y[i]); ymax = Math.max(ymax, s.y[i]);
    }
  }
  if (opts.zero) { ymin = Math.min(ymin, 0); ymax = Math.max(ymax, 0); }
  const yspan = (ymax - ymin) || 1;
  ymin -= 0.06 * yspan; ymax += 0.06 * yspan;

  const sx = x => pad.l + (x - xmin) / (xmax - xmin || 1) * (w - pad.l - pad.r);
  const sy = y => h - pad.b - (y - ymin) / (ymax - ymin) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#d0d7de";
  ctx.fillStyle = "#59636e";
  ctx.font = "11px system-ui";
  ctx.lineWidth = 1;
  const yticks = 5;
  for (let i = 0; i <= yticks; i++) {
    const y = ymin + (i / yticks) * (ymax - ymin);
    ctx.beginPath(); ctx.moveTo(pad.l, sy(y)); ctx.lineTo(w - pad.r, sy(y)); ctx.stroke();
    ctx.fillText(y.toPrecision(3), 6, sy(y) + 4);
  }
  const xticks = 5;
  for (let i = 0; i <= xticks; i++) {
    const x = xmin + (i / xticks) * (xmax - xmin);
    ctx.fillText(x.toFixed(2), sx(x) - 10, h - 10);
  }
  if (ymin < 0 && ymax > 0) {
    ctx.strokeStyle = "#8c959f";
    ctx.beginPath(); ctx.moveTo(pad.l, sy(0)); ctx.lineTo(w - pad.r, sy(0)); ctx.stroke();
  }

  series.forEach((s, idx) => {
    ctx.strokeStyle = s.color || COLORS[idx % COLORS.length];
    ctx.lineWidth = s.width || 2;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    for (let i = 0; i < s.x.length; i++) {
      const [px, py] = [sx(s.x[i]), sy(s.y[i])];
      i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
    }
    ctx.stroke();
    ctx.setLineDash([]);
    if (s.markers) {
      ctx.fillStyle = ctx.strokeStyle;
      for (let i = 0; i < s.x.length; i++) {
        ctx.beginPath(); ctx.arc(sx(s.x[i]), sy(s.y[i]), 2.6, 0, 7); ctx.fill();
      }
    }
    if (s.label) {
      ctx.fillStyle = ctx.strokeStyle;
      ctx.font = "12px system-ui";
      ctx.fillText(s.label, pad.l + 8, pad.t + 14 + 15 * idx);
    }
  });
}

const $ = id => document.getElementById(id);
const val = id => parseFloat($(id).value);

function bind(ids, render) {
  for (const id of ids) {
    $(id).addEventListener("input", render);
  }
  render();
}

function showOutputs(pairs) {
  for (const [out, input] of pairs) {
    $(out).textContent = $(input).value;
  }
}

function renderEquilibrium() {
  showOutputs([
    ["eq-theta-out", "eq-theta"], ["eq-g1-out", "eq-g1"],
    ["eq-n-out", "eq-n"], ["eq-agents-out", "eq-agents"],
  ]);
  try {
    const data = JSON.parse(equilibrium_curves(val("eq-n"), val("eq-g1"), val("eq-theta"), val("eq-agents")));
    const series = data.strategies.map((ys, i) => ({
      x: data.times, y: ys, markers: true,
      label: i === 0 ? "directional" : `arbitrageur ${i}`,
    }));
    plot($("eq-canvas"), series, { zero: true });
    $("eq-badge").textContent = data.directional_u_shape
      ? "U-shaped"
      : (val("eq-theta") < data.stability_threshold ? "below stability threshold" : "degenerate");
  } catch (e) {
    $("eq-badge").textContent = String(e);
  }
}

function renderImplied() {
  showOutputs([
    ["ip-theta-out", "ip-theta"], ["ip-g1-out", "ip-g1"],
    ["ip-n-out", "ip-n"], ["ip-agents-out", "ip-agents"],
  ]);
  try {
    const data = JSON.parse(implied_price_curve(val("ip-n"), val("ip-g1"), val("ip-theta"), val("ip-agents")));
    plot($("ip-canvas"), [
      { x: data.lags, y: data.lags.map(() => 1), dash: [6, 4], width: 1.5, color: "#8c959f", label: "true (permanent) kernel, scaled" },
      { x: data.lags, y: data.g_scaled, markers: true, color: "#cf222e", label: "implied kernel, scaled" },
    ], { zero: true });
    $("ip-badge").textContent = `G_impl(0) = ${data.g0.toFixed(4)}`;
  } catch (e) {
    $("ip-badge").textContent = String(e);
  }
}

const TIM_PARAMS = {
  exponential: { p1: "λ", p2: "ρ", kernel: (a, b) => ({ family: "exponential", lambda: a, rho: Math.max(b, 0), gamma: 0 }) },
  linear: { p1: "α", p2: "β", kernel: (a, b) => ({ family: "linear", alpha: a, beta: b }) },
  "power-law": { p1: "B", p2: "p", kernel: (a, b) => ({ family: "power-law", b: a, p: Math.min(Math.max(b, -3), 0.99), c: 0 }) },
  constant: { p1: "G₁", p2: "(unused)", kernel: (a) => ({ family: "constant", g1: Math.max(a, 0.01) }) },
};

function renderTim() {
  showOutputs([
    ["tim-p1-out", "tim-p1"], ["tim-p2-out", "tim-p2"],
    ["tim-theta-out", "tim-theta"], ["tim-n-out", "tim-n"],
  ]);
  const family = $("tim-family").value;
  const spec = TIM_PARAMS[family];
  $("tim-p1-label").textContent = spec.p1;
  $("tim-p2-label").textContent = spec.p2;
  try {
    const kernel = spec.kernel(val("tim-p1"), val("tim-p2"));
    const data = JSON.parse(tim_schedule(JSON.stringify(kernel), val("tim-n"), val("tim-theta")));
    plot($("tim-canvas"), [
      { x: data.times, y: data.trades, markers: true, label: "optimal schedule" },
    ], { zero: true });
    $("tim-badge").textContent = data.u_shape ? "U-shaped" : "";
  } catch (e) {
    $("tim-badge").textContent = String(e);
  }
}

init().then(() => {
  bind(["eq-theta", "eq-g1", "eq-n", "eq-agents"], renderEquilibrium);
  bind(["ip-theta", "ip-g1", "ip-n", "ip-agents"], renderImplied);
  bind(["tim-family", "tim-p1", "tim-p2", "tim-theta", "tim-n"], renderTim);
});
