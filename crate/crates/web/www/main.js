import init, { simulate, spikeCurve, estimateCsv } from "./pkg/factor_count_web.js";

const $ = (sel, root = document) => root.querySelector(sel);

function axes(ctx, w, h, xmax, ymax) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(40, 10);
  ctx.lineTo(40, h - 25);
  ctx.lineTo(w - 10, h - 25);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.fillText(ymax.toPrecision(3), 2, 14);
  ctx.fillText(xmax.toPrecision(3), w - 40, h - 8);
  return {
    x: (v) => 40 + (v / xmax) * (w - 50),
    y: (v) => h - 25 - (v / ymax) * (h - 35),
  };
}

function hline(ctx, s, y, colour, label) {
  ctx.strokeStyle = colour;
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(40, s.y(y));
  ctx.lineTo(ctx.canvas.width - 10, s.y(y));
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = colour;
  ctx.fillText(label, ctx.canvas.width - 120, s.y(y) - 4);
}

function estimatesTable(report, k) {
  const rows = report.estimates
    .map((e) => {
      const v = e.estimate ?? `error: ${e.error}`;
      const mark = k !== undefined && e.estimate === k ? " ✓" : "";
      return `<tr><th>${e.method}</th><td>${v}${mark}</td></tr>`;
    })
    .join("");
  return `<table>${rows}</table>`;
}

function showError(el, err) {
  el.innerHTML = `<p class="error">${err.message ?? err}</p>`;
}

function runSimulation() {
  const f = $("#sim");
  const out = $("#sim-out");
  const num = (name) => Number($(`[name=${name}]`, f).value);
  let report;
  try {
    report = JSON.parse(simulate(num("case"), num("p"), num("n"), num("k"), num("seed")));
  } catch (err) {
    showError(out, err);
    return;
  }
  const raw = report.correlation_eigenvalues ?? [];
  const adj = report.adjusted_eigenvalues ?? [];
  const canvas = $("#sim-plot");
  const ctx = canvas.getContext("2d");
  const ymax = Math.max(...raw, ...adj, report.threshold) * 1.05;
  const s = axes(ctx, canvas.width, canvas.height, raw.length + 1, ymax);
  const dots = (values, colour) => {
    ctx.fillStyle = colour;
    values.forEach((v, i) => ctx.fillRect(s.x(i + 1) - 3, s.y(v) - 3, 6, 6));
  };
  dots(raw, "#1f77b4");
  dots(adj, "#d62728");
  hline(ctx, s, report.threshold, "#2ca02c", "ACT threshold");
  ctx.fillStyle = "#1f77b4";
  ctx.fillText("sample correlation eigenvalues", 50, 20);
  ctx.fillStyle = "#d62728";
  ctx.fillText("adjusted", 50, 34);
  out.innerHTML = `<p>true K = ${report.k}</p>` + estimatesTable(report, report.k);
}

function drawSpike() {
  const rho = Number($("[name=rho]").value);
  $("#rho-val").textContent = rho.toFixed(2);
  const curve = JSON.parse(spikeCurve(rho, 3 * (1 + Math.sqrt(rho)), 100));
  const canvas = $("#spike-plot");
  const ctx = canvas.getContext("2d");
  const xmax = curve.population.at(-1) * 1.05;
  const ymax = curve.sample.at(-1) * 1.05;
  const s = axes(ctx, canvas.width, canvas.height, xmax, ymax);
  ctx.strokeStyle = "#d62728";
  ctx.beginPath();
  curve.population.forEach((x, i) => {
    const [px, py] = [s.x(x), s.y(curve.sample[i])];
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
  ctx.strokeStyle = "#aaa";
  ctx.beginPath();
  ctx.moveTo(s.x(0), s.y(0));
  ctx.lineTo(s.x(Math.min(xmax, ymax)), s.y(Math.min(xmax, ymax)));
  ctx.stroke();
  hline(ctx, s, curve.bulk_edge, "#1f77b4", "noise bulk edge");
  ctx.fillStyle = "#444";
  ctx.fillText("population spike →", canvas.width - 140, canvas.height - 30);
  ctx.fillText("sample eigenvalue", 50, 20);
}

function runCsv() {
  const f = $("#csv");
  const out = $("#csv-out");
  try {
    const report = JSON.parse(estimateCsv($("[name=text]", f).value, $("[name=methods]", f).value));
    out.innerHTML = `<p>n = ${report.n}, p = ${report.p}, r<sub>max</sub> = ${report.r_max}</p>` + estimatesTable(report);
  } catch (err) {
    showError(out, err);
  }
}

await init();
$("#sim button").addEventListener("click", runSimulation);
$("#csv button").addEventListener("click", runCsv);
$("[name=rho]").addEventListener("input", drawSpike);
drawSpike();
runSimulation();
