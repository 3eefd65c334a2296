import init, { pocockBoundary, compareProcedures, dataEfficiency } from "./pkg/dasense_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(target, e) {
  target.innerHTML = `<span class="err">${e}</span>`;
}

function runPocock() {
  const out = $("pk-out");
  try {
    const r = JSON.parse(pocockBoundary(num("pk-peeks"), num("pk-alpha"), num("pk-reps"), 7));
    out.textContent =
      `Test each look at p < ${r.per_look_alpha.toFixed(4)} ` +
      `(|z| > ${r.critical_z.toFixed(3)}); simulated overall rate ${r.achieved_fpr.toFixed(4)}.`;
  } catch (e) {
    fail(out, e);
  }
}

function runCompare() {
  const out = $("cp-out");
  try {
    const budget = num("cp-budget");
    const rows = JSON.parse(compareProcedures(
      num("cp-mean"), num("cp-var"), num("cp-delta"), budget,
      num("cp-peeks"), num("cp-reps"), num("cp-seed"),
    ));
    const body = rows.map((r) => {
      const width = Math.round(160 * r.mean_spend / budget);
      const stops = r.stops_by_look.map((s) => s.toFixed(2)).join(" / ");
      return `<tr><th>${r.label}</th><td>${r.per_look_alpha.toFixed(4)}</td>` +
        `<td>${r.power.toFixed(3)}</td><td>${r.mean_spend.toFixed(0)} ` +
        `<span class="bar" style="width:${width}px"></span></td><td>${stops}</td></tr>`;
    }).join("");
    out.innerHTML =
      "<table><tr><th>Plan</th><th>Per-look alpha</th><th>Power</th><th>Mean spend</th>" +
      `<th>Stops by look</th></tr>${body}</table>`;
  } catch (e) {
    fail(out, e);
  }
}

function runEfficiency() {
  const rho = num("de-rho");
  const r = num("de-r");
  $("de-rho-v").textContent = rho.toFixed(2);
  $("de-r-v").textContent = r.toFixed(3);
  try {
    $("de-out").textContent = dataEfficiency(rho, r).toFixed(4);
  } catch (e) {
    fail($("de-out"), e);
  }
}

await init();
$("pk-run").addEventListener("click", runPocock);
$("cp-run").addEventListener("click", runCompare);
$("de-rho").addEventListener("input", runEfficiency);
$("de-r").addEventListener("input", runEfficiency);
runEfficiency();
runPocock();
