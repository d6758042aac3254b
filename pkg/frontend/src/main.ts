import { ApiClient } from "./api.js";
import { StudioApp } from "./app.js";
import { CanvasPainter } from "./heatmap.js";

const params = new URLSearchParams(window.location.search);
const backend = params.get("backend") ?? "";
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app element");
}

const cellPx = 10;
const api = new ApiClient(backend, (url, init) => fetch(url, init));
const app = new StudioApp({
  root,
  api,
  makePainter: (canvas) => new CanvasPainter(canvas, cellPx),
  cellPx,
});

const exportBtn = root.querySelector("button.export") as HTMLElement;
exportBtn.addEventListener("click", () => {
  const blob = new Blob([app.exportCurrentPattern()], { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "pattern.json";
  a.click();
  URL.revokeObjectURL(a.href);
});

const importBtn = root.querySelector("button.import") as HTMLElement;
importBtn.addEventListener("click", () => {
  const input = document.createElement("input");
  input.type = "file";
  input.accept = "application/json";
  input.addEventListener("change", async () => {
    const file = input.files?.[0];
    if (file) {
      app.importPatternText(await file.text());
    }
  });
  input.click();
});

void api.health().then((h) => {
  const note = document.createElement("div");
  note.className = "health";
  note.textContent = `backend ${h.version}, surrogate ${h.model_loaded ? "loaded" : "not loaded"}`;
  root.appendChild(note);
});
