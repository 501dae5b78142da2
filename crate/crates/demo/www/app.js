import init, { bev_iou_scene, completeness_scene, cascade_curve } from "./pkg/lidarkit_demo.js";

function slider(containerId, spec, onChange) {
  const container = document.getElementById(containerId);
  const values = {};
  for (const [key, label, min, max, step, initial] of spec) {
    values[key] = initial;
    const lab = document.createElement("label");
    lab.textContent = label;
    const input = document.createElement("input");
    input.type = "range";
    input.min = min;
    input.max = max;
    input.step = step;
    input.value = initial;
    const out = document.createElement("output");
    out.textContent = Number(initial).toFixed(2);
    input.addEventListener("input", () => {
      values[key] = Number(input.value);
      out.textContent = Number(input.value).toFixed(2);
      onChange(values);
    });
    container.append(lab, input, out);
  }
  return values;
}

function world2canvas(ctx, extent) {
  const { width, height } = ctx.canvas;
  const s = Math.min(width, height) / (2 * extent);
  return ([x, y]) => [width / 2 + x * s, height / 2 - y * s];
}

function drawPolygon(ctx, map, polygon, stroke, fill, dashed = false) {
  if (polygon.length < 3) return;
  ctx.save();
  if (dashed) ctx.setLineDash([6, 4]);
  ctx.beginPath();
  polygon.forEach((p, i) => {
    const [x, y] = map(p);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.closePath();
  if (fill) {
    ctx.fillStyle = fill;
    ctx.fill();
  }
  ctx.strokeStyle = stroke;
  ctx.lineWidth = 1.6;
  ctx.stroke();
  ctx.restore();
}

// ---- rotated IoU panel ----
const iouCtx = document.getElementById("iou-canvas").getContext("2d");
const iouValues = slider(
  "iou-controls",
  [
    ["dx", "B offset x", -4, 4, 0.05, 1.0],
    ["dy", "B offset y", -3, 3, 0.05, 0.4],
    ["yaw", "B yaw", -1.57, 1.57, 0.01, 0.5],
    ["l", "B length", 1, 6, 0.05, 3.9],
    ["w", "B width", 0.5, 3, 0.05, 1.6],
  ],
  renderIou,
);

function renderIou() {
  const request = {
    a: { cx: 0, cy: 0, l: 3.9, w: 1.6, yaw: 0 },
    b: { cx: iouValues.dx, cy: iouValues.dy, l: iouValues.l, w: iouValues.w, yaw: iouValues.yaw },
  };
  const scene = JSON.parse(bev_iou_scene(JSON.stringify(request)));
  if (scene.error) return;
  iouCtx.clearRect(0, 0, iouCtx.canvas.width, iouCtx.canvas.height);
  const map = world2canvas(iouCtx, 5.5);
  drawPolygon(iouCtx, map, scene.a_polygon, "#5aa7e8");
  drawPolygon(iouCtx, map, scene.b_polygon, "#e8a75a");
  drawPolygon(iouCtx, map, scene.intersection, "#6fd3a9", "rgba(111,211,169,0.25)");
  document.getElementById("iou-readout").innerHTML =
    `BEV IoU <b>${scene.iou_bev.toFixed(4)}</b> · 3D IoU <b>${scene.iou_3d.toFixed(4)}</b> · ∩ area ${scene.intersection_area.toFixed(3)} m²`;
}

// ---- completeness panel ----
const pcsCtx = document.getElementById("pcs-canvas").getContext("2d");
const pcsValues = slider(
  "pcs-controls",
  [
    ["coverage", "coverage", 0.05, 1, 0.01, 0.55],
    ["points", "points", 5, 600, 1, 150],
    ["yaw", "box yaw", -1.57, 1.57, 0.01, 0.35],
    ["seed", "seed", 0, 50, 1, 7],
  ],
  renderPcs,
);

function renderPcs() {
  const request = {
    box: { cx: 0, cy: 0, l: 4.2, w: 1.9, h: 1.6, yaw: pcsValues.yaw },
    points: Math.round(pcsValues.points),
    coverage: pcsValues.coverage,
    seed: Math.round(pcsValues.seed),
  };
  const scene = JSON.parse(completeness_scene(JSON.stringify(request)));
  if (scene.error) return;
  pcsCtx.clearRect(0, 0, pcsCtx.canvas.width, pcsCtx.canvas.height);
  const map = world2canvas(pcsCtx, 3.2);
  drawPolygon(pcsCtx, map, scene.box_polygon, "#5aa7e8");
  drawPolygon(pcsCtx, map, scene.enclosing_polygon, "#6fd3a9", null, true);
  pcsCtx.fillStyle = "#e8e3a7";
  for (const p of scene.points) {
    const [x, y] = map(p);
    pcsCtx.fillRect(x - 1.2, y - 1.2, 2.4, 2.4);
  }
  document.getElementById("pcs-readout").innerHTML =
    `Q = <b>${scene.q.toFixed(3)}</b> (${scene.level}) over ${scene.point_count} points`;
}

// ---- cascade panel ----
const cascadeCtx = document.getElementById("cascade-canvas").getContext("2d");
const cascadeValues = slider(
  "cascade-controls",
  [
    ["lambda", "contraction λ", 0.05, 1, 0.05, 0.5],
    ["sigma", "jitter σ (m)", 0, 0.3, 0.005, 0.055],
    ["seed", "seed", 0, 50, 1, 6],
  ],
  renderCascade,
);

const GRID = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const STAGE_COLORS = { 1: "#e8a75a", 2: "#5aa7e8", 3: "#6fd3a9" };

function renderCascade() {
  const request = {
    lambda: cascadeValues.lambda,
    sigma: cascadeValues.sigma,
    stages: [1, 2, 3],
    grid: GRID,
    proposals: 250,
    seed: Math.round(cascadeValues.seed),
  };
  const rows = JSON.parse(cascade_curve(JSON.stringify(request)));
  if (rows.error) return;
  const { width, height } = cascadeCtx.canvas;
  const pad = 34;
  const px = (v) => pad + v * (width - 2 * pad);
  const py = (v) => height - pad - v * (height - 2 * pad);
  cascadeCtx.clearRect(0, 0, width, height);
  cascadeCtx.strokeStyle = "#39424e";
  cascadeCtx.strokeRect(px(0), py(1), px(1) - px(0), py(0) - py(1));
  cascadeCtx.beginPath();
  cascadeCtx.moveTo(px(0), py(0));
  cascadeCtx.lineTo(px(1), py(1));
  cascadeCtx.strokeStyle = "#4a5462";
  cascadeCtx.stroke();
  cascadeCtx.fillStyle = "#8b95a3";
  cascadeCtx.font = "11px system-ui";
  cascadeCtx.fillText("input IoU", width / 2 - 24, height - 8);
  cascadeCtx.save();
  cascadeCtx.translate(11, height / 2 + 30);
  cascadeCtx.rotate(-Math.PI / 2);
  cascadeCtx.fillText("mean output IoU", 0, 0);
  cascadeCtx.restore();
  for (const stages of [1, 2, 3]) {
    const points = rows.filter((r) => r.stages === stages);
    cascadeCtx.beginPath();
    points.forEach((r, i) => {
      const x = px(r.input_iou);
      const y = py(r.mean_output_iou);
      if (i === 0) cascadeCtx.moveTo(x, y);
      else cascadeCtx.lineTo(x, y);
    });
    cascadeCtx.strokeStyle = STAGE_COLORS[stages];
    cascadeCtx.lineWidth = 1.8;
    cascadeCtx.stroke();
  }
  document.getElementById("cascade-readout").innerHTML =
    `<span style="color:${STAGE_COLORS[1]}">T=1</span> · <span style="color:${STAGE_COLORS[2]}">T=2</span> · <span style="color:${STAGE_COLORS[3]}">T=3</span> — 250 proposals per grid point`;
}

await init();
renderIou();
renderPcs();
renderCascade();
