import init, { conjugatePoint, conjugateHeatmap, ratTumorHeatmap } from "./pkg/prisens_wasm.js";

const SEED = 1;
const $ = (id) => document.getElementById(id);

function show(target, f) {
  try {
    target.innerHTML = f();
  } catch (e) {
    target.textContent = String(e);
  }
}

function runPoint() {
  const out = $("point-out");
  try {
    const r = JSON.parse(conjugatePoint(Number($("mean").value), Number($("precision").value), SEED));
    const e = r.estimate;
    out.textContent =
      `h2  ${e.h2.toFixed(5)}   exact ${r.exact.h2.toFixed(5)}   se ${e.h2_se?.toFixed(5) ?? "-"}\n` +
      `kl  ${e.kl.toFixed(5)}   exact ${r.exact.kl.toFixed(5)}   se ${e.kl_se?.toFixed(5) ?? "-"}\n` +
      `ESS ${e.ess_ratio.toFixed(0)} of ${e.n_draws}` +
      (e.warnings.length ? `\n${e.warnings.join("\n")}` : "");
  } catch (err) {
    out.textContent = String(err);
  }
}

function drawConjugate() {
  const channel = document.querySelector("input[name=conj-channel]:checked").value;
  show($("conj-plot"), () => conjugateHeatmap(channel, SEED));
}

function drawRat() {
  show($("rat-plot"), () => ratTumorHeatmap($("rat-kind").value, $("rat-channel").value, SEED));
}

await init();
$("status").textContent = "";
$("point-run").addEventListener("click", runPoint);
document.querySelectorAll("input[name=conj-channel]").forEach((r) => r.addEventListener("change", drawConjugate));
$("rat-kind").addEventListener("change", drawRat);
$("rat-channel").addEventListener("change", drawRat);
runPoint();
drawConjugate();
drawRat();
