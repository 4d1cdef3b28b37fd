import init, { cue_sample, simulate, memory_bound } from "./pkg/delaynet_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function call(fn, out, ...args) {
  const v = JSON.parse(fn(...args));
  if (v.error) {
    out.innerHTML = `<span class="err">${v.error}</span>`;
    return null;
  }
  return v;
}

function drawRaster(canvas, raster, colorOf, shade) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const sx = canvas.width / Math.max(raster.steps, 1);
  const sy = canvas.height / Math.max(raster.channels, 1);
  if (shade) {
    ctx.fillStyle = "#fde9c8";
    ctx.fillRect(shade[0] * sx, 0, (shade[1] - shade[0]) * sx, canvas.height);
  }
  for (const [t, c] of raster.events) {
    ctx.fillStyle = colorOf(c);
    ctx.fillRect(t * sx, c * sy, Math.max(sx, 1), Math.max(sy - 0.5, 1));
  }
}

function drawLine(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (xs.length < 2) return;
  const top = Math.max(...ys) || 1;
  const xmax = xs[xs.length - 1] || 1;
  ctx.strokeStyle = "#1f5fa8";
  ctx.beginPath();
  xs.forEach((x, i) => {
    const px = (x / xmax) * canvas.width;
    const py = canvas.height - (ys[i] / top) * (canvas.height - 12);
    i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
  });
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.fillText(`0 to ${xmax.toFixed(0)} Hz`, 4, 12);
}

function runCue() {
  const out = $("cue-info");
  const v = call(cue_sample, out, num("cue-n"), num("cue-wait"), num("cue-seed"));
  if (!v) return;
  const [left, right, recall, noise] = v.groups;
  const color = (c) => (c >= noise ? "#999" : c >= recall ? "#2a9d4b" : c >= right ? "#c0392b" : "#1f5fa8");
  drawRaster($("cue-canvas"), v.raster, color, [v.recall_start, v.recall_end]);
  out.textContent = `cues: ${v.cues.join(", ")}  |  answer: ${v.label}  |  ${v.raster.steps} ms`;
}

function runNet() {
  const out = $("net-info");
  const v = call(simulate, out, num("net-n"), num("net-gin"), num("net-grec"),
    $("net-delays").checked, 300, num("net-seed"));
  if (!v) return;
  const palette = ["#1f5fa8", "#c0392b", "#2a9d4b", "#8e44ad"];
  const bands = [...new Set(v.delays_ms)].sort((a, b) => a - b);
  drawRaster($("net-raster"), v.hidden, (c) => palette[bands.indexOf(v.delays_ms[c]) % palette.length]);
  const cut = v.frequencies_hz.findIndex((f) => f > 100);
  const end = cut < 0 ? v.frequencies_hz.length : cut;
  drawLine($("net-spectrum"), v.frequencies_hz.slice(1, end), v.magnitudes.slice(1, end));
  const peak = v.peak_hz == null ? "n/a" : v.peak_hz.toFixed(2);
  out.textContent = `mean rate ${v.rate_hz.toFixed(1)} Hz  |  spectrum peak ${peak} Hz  |  delay bands ${bands.join(", ")} ms`;
}

function runBound() {
  const out = $("mb-out");
  const rows = call(memory_bound, out, num("mb-bits"), num("mb-tau"), num("mb-dt"));
  if (!rows) return;
  const body = rows.map((r) =>
    `<tr><td>${r.n_bits}</td><td>${r.analytical_ms.toFixed(2)}</td><td>${r.empirical_ms.toFixed(2)}</td></tr>`).join("");
  out.innerHTML = `<table><tr><th>bits</th><th>analytical (ms)</th><th>simulated (ms)</th></tr>${body}</table>`;
}

await init();
$("cue-go").onclick = runCue;
$("net-go").onclick = runNet;
$("mb-go").onclick = runBound;
runCue();
runNet();
runBound();
