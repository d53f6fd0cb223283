import init, { uncertainty_curve, error_spectrum, commutator_kernel } from "./pkg/qest_web.js";

const $ = (id) => document.getElementById(id);

// Split a flat row-major array into columns.
function columns(flat, width) {
  const cols = Array.from({ length: width }, () => []);
  for (let i = 0; i < flat.length; i++) cols[i % width].push(flat[i]);
  return cols;
}

function plot(canvas, x, series, { logX = false, logY = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: W, height: H } = canvas;
  const pad = { l: 60, r: 12, t: 10, b: 30 };
  const fx = logX ? Math.log10 : (v) => v;
  const fy = logY ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  const xs = x.map(fx);
  const ys = series.flatMap((s) => s.y.map(fy));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-12) { y0 -= 1; y1 += 1; }
  const m = 0.05 * (y1 - y0);
  y0 -= m; y1 += m;
  const px = (v) => pad.l + ((v - x0) / (x1 - x0)) * (W - pad.l - pad.r);
  const py = (v) => H - pad.b - ((v - y0) / (y1 - y0)) * (H - pad.t - pad.b);

  ctx.clearRect(0, 0, W, H);
  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.strokeRect(pad.l, pad.t, W - pad.l - pad.r, H - pad.t - pad.b);
  for (let i = 0; i <= 5; i++) {
    const vx = x0 + (i / 5) * (x1 - x0);
    const vy = y0 + (i / 5) * (y1 - y0);
    const lx = logX ? `1e${vx.toFixed(1)}` : vx.toPrecision(3);
    const ly = logY ? `1e${vy.toFixed(1)}` : vy.toPrecision(3);
    ctx.fillText(lx, px(vx) - 14, H - 10);
    ctx.fillText(ly, 4, py(vy) + 4);
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    s.y.forEach((v, i) => {
      const X = px(xs[i]), Y = py(fy(v));
      i ? ctx.lineTo(X, Y) : ctx.moveTo(X, Y);
    });
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function redraw() {
  const nth = Number($("nth").value);
  const ratio = 10 ** Number($("rate").value);
  const omega0 = Number($("omega0").value);
  $("nth-v").textContent = nth;
  $("rate-v").textContent = ratio.toPrecision(3);
  $("omega0-v").textContent = omega0;
  try {
    const [g, , q] = columns(uncertainty_curve(nth, -2, 3, 121), 3);
    const ceiling = (2 * nth + 1) ** 2;
    plot($("curve"), g, [
      { y: q, color: "#1f77b4" },
      { y: g.map(() => 1), color: "#999", dash: [4, 4] },
      { y: g.map(() => ceiling), color: "#999", dash: [4, 4] },
    ], { logX: true, logY: true });

    const [d, sxx, err, imp] = columns(error_spectrum(nth, ratio, 4, 401), 4);
    plot($("spectrum"), d, [
      { y: sxx, color: "#1f77b4" },
      { y: err, color: "#d62728" },
      { y: imp, color: "#999", dash: [4, 4] },
    ], { logY: true });

    const [t, kxx, kxy, kyy] = columns(commutator_kernel(nth, ratio, omega0, 1201), 4);
    plot($("kernel"), t, [
      { y: kxx, color: "#1f77b4" },
      { y: kxy, color: "#d62728", dash: [6, 3] },
      { y: kyy, color: "#2ca02c" },
    ]);
    $("status").textContent = "";
  } catch (e) {
    $("status").textContent = e.message;
  }
}

await init();
for (const id of ["nth", "rate", "omega0"]) $(id).addEventListener("input", redraw);
redraw();
