import init, { ToyScene, fusionGeometry } from "./pkg/aquaseg_demo.js";

const COLORS = [[31, 95, 139], [242, 140, 40], [200, 80, 122]];
const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function bindValue(id, digits = 2) {
  const show = () => ($(id + "-v").textContent = num(id).toFixed(digits));
  $(id).addEventListener("input", show);
  show();
}

function drawLabels(canvas, labels, side) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(side, side);
  labels.forEach((l, i) => {
    const [r, g, b] = COLORS[l];
    img.data.set([r, g, b, 255], i * 4);
  });
  const tmp = new OffscreenCanvas(side, side);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

let scene;
let query = 30;

function drawAttention() {
  const beta = num("attn-beta"), gamma = num("attn-gamma");
  const side = scene.geoSide;
  const cell = $("attn").width / side;
  const ctx = $("attn").getContext("2d");
  let row, mask;
  try {
    row = scene.attentionRow(query, beta, gamma);
    mask = scene.fallbackMask(beta, gamma);
  } catch (e) {
    $("attn-readout").textContent = String(e);
    return;
  }
  const peak = Math.max(...row);
  for (let p = 0; p < side * side; p++) {
    const v = Math.round(255 * Math.sqrt(row[p] / peak));
    ctx.fillStyle = `rgb(${v}, ${v}, ${v})`;
    ctx.fillRect((p % side) * cell, Math.floor(p / side) * cell, cell, cell);
    if (mask[p]) {
      ctx.strokeStyle = "#d33";
      ctx.strokeRect((p % side) * cell + 1, Math.floor(p / side) * cell + 1, cell - 2, cell - 2);
    }
  }
  ctx.strokeStyle = "#2a8";
  ctx.lineWidth = 2;
  ctx.strokeRect((query % side) * cell, Math.floor(query / side) * cell, cell, cell);
  ctx.lineWidth = 1;
  const fallbacks = mask.reduce((a, b) => a + b, 0);
  $("attn-readout").textContent =
    `query (${Math.floor(query / side)}, ${query % side})\n` +
    `self weight ${row[query].toFixed(3)}\nfallback rows ${fallbacks} / ${side * side}`;
}

function drawFusion() {
  const t = num("fu-text"), r = num("fu-reason"), wMax = num("fu-wmax"), tau = num("fu-tau");
  const canvas = $("fusion");
  const ctx = canvas.getContext("2d");
  const cx = canvas.width / 2, cy = canvas.height - 30, scale = canvas.width / 2 - 20;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#ccd";
  ctx.beginPath();
  ctx.arc(cx, cy, scale, Math.PI, 2 * Math.PI);
  ctx.moveTo(cx - scale, cy);
  ctx.lineTo(cx + scale, cy);
  ctx.stroke();
  const arrow = (deg, color, len = 1) => {
    const a = (deg * Math.PI) / 180;
    ctx.strokeStyle = color;
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + Math.cos(a) * scale * len, cy - Math.sin(a) * scale * len);
    ctx.stroke();
    ctx.lineWidth = 1;
  };
  const [s, w, , , fusedDeg] = fusionGeometry(t, r, wMax, tau);
  arrow(t, "#1f77b4");
  arrow(r, "#ff7f0e", 0.8);
  arrow(fusedDeg, "#2ca02c", 0.92);
  $("fu-readout").textContent =
    `similarity ${s.toFixed(4)}\nweight     ${w.toFixed(4)}${w === 0 ? "  (gate closed)" : ""}\n` +
    `fused at   ${fusedDeg.toFixed(2)}°`;
}

function drawSegmentation() {
  const seg = scene.segment(1.2, 3.0, 0.5, 0.5, $("seg-gmg").checked, $("seg-csa").checked);
  drawLabels($("seg-gt"), scene.groundTruth(), scene.imageSide);
  drawLabels($("seg-pred"), seg.labels(), scene.imageSide);
  $("seg-readout").textContent = `mIoU ${(100 * seg.miou).toFixed(2)}\naAcc ${(100 * seg.aacc).toFixed(2)}`;
  seg.free();
}

function rebuildScene() {
  if (scene) scene.free();
  scene = new ToyScene(Math.max(0, parseInt($("seg-seed").value, 10) || 0), num("seg-noise"));
  drawAttention();
  drawSegmentation();
}

await init();
["attn-beta", "attn-gamma", "fu-wmax", "fu-tau", "seg-noise"].forEach((id) => bindValue(id));
["fu-text", "fu-reason"].forEach((id) => bindValue(id, 0));
["attn-beta", "attn-gamma"].forEach((id) => $(id).addEventListener("input", drawAttention));
["fu-text", "fu-reason", "fu-wmax", "fu-tau"].forEach((id) => $(id).addEventListener("input", drawFusion));
["seg-gmg", "seg-csa"].forEach((id) => $(id).addEventListener("change", drawSegmentation));
["seg-noise", "seg-seed"].forEach((id) => $(id).addEventListener("change", rebuildScene));
$("attn").addEventListener("click", (ev) => {
  const side = scene.geoSide;
  const rect = $("attn").getBoundingClientRect();
  const x = Math.floor(((ev.clientX - rect.left) / rect.width) * side);
  const y = Math.floor(((ev.clientY - rect.top) / rect.height) * side);
  query = Math.min(side - 1, y) * side + Math.min(side - 1, x);
  drawAttention();
});
rebuildScene();
drawFusion();
