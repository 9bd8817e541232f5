// Page logic for the irrcorr demo. Expects the wasm-bindgen output
// (`irrcorr_demo.js` + `irrcorr_demo_bg.wasm`) under ./pkg/.
import init, { decompose, sweep, moments } from "./pkg/irrcorr_demo.js";

const COLORS = ["#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"];

const $ = (id) => document.getElementById(id);

function status(text, isError = false) {
  const el = $("status");
  el.textContent = text;
  el.className = isError ? "error" : "";
}

function fmt(x) {
  return x === null || x === undefined ? "—" : Number(x).toFixed(6);
}

function table(headers, rows) {
  const head = "<tr>" + headers.map((h) => `<th>${h}</th>`).join("") + "</tr>";
  const body = rows.map((r) => "<tr>" + r.map((c) => `<td>${c}</td>`).join("") + "</tr>").join("");
  $("table").innerHTML = `<table>${head}${body}</table>`;
}

// Run after the status line has been painted; the solver blocks the thread.
function busy(label, work) {
  status(label + " …");
  setTimeout(() => {
    const start = performance.now();
    try {
      work();
      status(`${label} done in ${((performance.now() - start) / 1000).toFixed(2)} s`);
    } catch (e) {
      status(String(e.message ?? e), true);
    }
  }, 20);
}

function onDecompose() {
  busy("decomposing", () => {
    const r = JSON.parse(decompose($("spec").value));
    const orders = Object.keys(r.orders);
    table(
      ["S (bits)", "C_T", ...orders.map((m) => `C_${m}`), "flags"],
      [[fmt(r.entropy_bits), fmt(r.total_bits), ...orders.map((m) => fmt(r.orders[m])), r.flags]],
    );
  });
}

function onMoments() {
  busy("moments", () => {
    const r = JSON.parse(moments($("spec").value, Number($("level").value)));
    table(["Pauli string", "Tr(O ρ)"], r.moments.map(([s, v]) => [s, fmt(v)]));
  });
}

function onSweep() {
  busy("sweeping", () => {
    const r = JSON.parse(sweep($("spec").value, Number($("steps").value)));
    const series = [{ name: "C_T", values: r.total_bits }];
    for (const m of Object.keys(r.orders)) {
      series.push({ name: `C_${m}`, values: r.orders[m] });
    }
    plot(r.p0, series, r.state);
    const last = r.p0.length - 1;
    table(
      ["p0", ...series.map((s) => s.name), "flags"],
      [[fmt(r.p0[last]), ...series.map((s) => fmt(s.values[last])), r.flags[last]]],
    );
  });
}

function plot(xs, series, title) {
  const canvas = $("plot");
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height;
  const pad = { l: 56, r: 16, t: 28, b: 40 };
  const ymax = Math.max(0.5, ...series.flatMap((s) => s.values.filter((v) => v !== null)));
  const px = (x) => pad.l + x * (W - pad.l - pad.r);
  const py = (y) => H - pad.b - (y / (ymax * 1.05)) * (H - pad.t - pad.b);

  ctx.clearRect(0, 0, W, H);
  ctx.font = "12px system-ui";
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#333";
  ctx.beginPath();
  ctx.moveTo(pad.l, pad.t);
  ctx.lineTo(pad.l, H - pad.b);
  ctx.lineTo(W - pad.r, H - pad.b);
  ctx.stroke();
  for (let i = 0; i <= 5; i++) {
    const x = i / 5;
    ctx.fillText(x.toFixed(1), px(x) - 8, H - pad.b + 16);
  }
  const yticks = Math.ceil(ymax);
  for (let i = 0; i <= yticks; i++) {
    ctx.fillText(String(i), pad.l - 20, py(i) + 4);
  }
  ctx.fillText("p0", W / 2, H - 6);
  ctx.fillText("bits — " + title, pad.l, pad.t - 10);

  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    let pen = false;
    s.values.forEach((v, i) => {
      if (v === null) {
        pen = false;
        return;
      }
      if (pen) ctx.lineTo(px(xs[i]), py(v));
      else ctx.moveTo(px(xs[i]), py(v));
      pen = true;
    });
    ctx.stroke();
  });
  $("legend").innerHTML = series
    .map((s, k) => `<span><i style="background:${COLORS[k % COLORS.length]}"></i>${s.name}</span>`)
    .join("");
}

await init();
$("decompose").addEventListener("click", onDecompose);
$("sweep").addEventListener("click", onSweep);
$("moments").addEventListener("click", onMoments);
status("ready");
