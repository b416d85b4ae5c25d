/** Studio wiring: editor canvas + reconstructed-wireframe and scene panes,
 * guidance picker, comparison strip, undo/redo, export. */

import { ServiceClient, ApiError } from "./api.js";
import { EditorCanvas, type Tool } from "./canvas.js";
import { RenderScheduler } from "./render.js";
import { serializeWireframe, toAnnotation } from "./schema.js";
import { initialState, reduce } from "./state.js";
import type { EditorAction, EditorState } from "./types.js";

const params = new URLSearchParams(location.search);
const serviceBase = params.get("service") ?? "http://127.0.0.1:8000";
const client = new ServiceClient(serviceBase);

let state: EditorState = initialState(256);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const sceneImg = el<HTMLImageElement>("scene");
const reconImg = el<HTMLImageElement>("recon");
const statusBox = el<HTMLDivElement>("status");
const validationBox = el<HTMLDivElement>("validation");
const retryBanner = el<HTMLDivElement>("retry");
const strip = el<HTMLDivElement>("strip");
const staleBadge = el<HTMLDivElement>("stale");
const guidanceInfo = el<HTMLSpanElement>("guidance-info");

const scheduler = new RenderScheduler(async () => {
  const wf = state.wireframe;
  if (wf.segments.length === 0) return;
  const annotation = toAnnotation(wf);
  const source = serializeWireframe(wf);
  try {
    const hist = state.guidance.kind === "reference" ? state.guidance.histogram : null;
    const body = await client.render(annotation, hist);
    dispatch({
      type: "render_succeeded",
      result: {
        scene: body.scene,
        reconstructedWireframe: body.reconstructed_wireframe,
        latencyMs: body.latency_ms,
        modelVersion: body.model_version,
        source,
      },
    });
  } catch (err) {
    if (err instanceof ApiError && err.status === 422) {
      dispatch({ type: "render_failed", message: err.detail, validation: true });
    } else {
      dispatch({
        type: "render_failed",
        message: err instanceof Error ? err.message : String(err),
        validation: false,
      });
    }
  }
});

function dispatch(action: EditorAction): void {
  const before = state;
  state = reduce(state, action);
  if (state.wireframe !== before.wireframe || state.guidance !== before.guidance) {
    scheduler.request();
  }
  sync();
}

const canvas = new EditorCanvas(
  el<HTMLCanvasElement>("editor"),
  {
    addJunction: (x, y) => dispatch({ type: "add_junction", x, y }),
    moveJunction: (id, x, y) => dispatch({ type: "move_junction", id, x, y }),
    deleteJunction: (id) => dispatch({ type: "delete_junction", id }),
    addSegment: (a, b) => dispatch({ type: "add_segment", a, b }),
    deleteSegment: (id) => dispatch({ type: "delete_segment", id }),
    select: (junctions, segments) => dispatch({ type: "select", junctions, segments }),
  },
  () => state,
);

function sync(): void {
  canvas.draw();
  validationBox.textContent = state.validationError ?? "";
  validationBox.hidden = !state.validationError;
  retryBanner.hidden = !state.serviceError;
  if (state.serviceError) {
    el<HTMLSpanElement>("retry-message").textContent = state.serviceError;
  }
  staleBadge.hidden = !(state.dirty && state.lastRender !== null);
  if (state.lastRender) {
    sceneImg.src = `data:image/png;base64,${state.lastRender.scene}`;
    reconImg.src = `data:image/png;base64,${state.lastRender.reconstructedWireframe}`;
    statusBox.textContent =
      `${state.lastRender.modelVersion} · ${state.lastRender.latencyMs.toFixed(0)} ms`;
  }
  strip.replaceChildren(
    ...state.renderHistory.map((r) => {
      const img = document.createElement("img");
      img.src = `data:image/png;base64,${r.scene}`;
      img.title = `${r.latencyMs.toFixed(0)} ms`;
      return img;
    }),
  );
  guidanceInfo.textContent =
    state.guidance.kind === "reference" ? state.guidance.name : "none";
}

for (const tool of ["select", "junction", "segment", "delete"] as Tool[]) {
  el<HTMLButtonElement>(`tool-${tool}`).addEventListener("click", () => {
    canvas.tool = tool;
    canvas.resetPending();
    document
      .querySelectorAll(".tool")
      .forEach((b) => b.classList.toggle("active", b.id === `tool-${tool}`));
  });
}
el<HTMLButtonElement>("undo").addEventListener("click", () => dispatch({ type: "undo" }));
el<HTMLButtonElement>("redo").addEventListener("click", () => dispatch({ type: "redo" }));
el<HTMLInputElement>("snap").addEventListener("change", (e) => {
  canvas.snapEnabled = (e.target as HTMLInputElement).checked;
});
el<HTMLButtonElement>("retry-button").addEventListener("click", () => {
  dispatch({ type: "clear_errors" });
  scheduler.request();
});

el<HTMLInputElement>("guidance-file").addEventListener("change", async (e) => {
  const input = e.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  try {
    const histogram = await client.histogram(file, file.name);
    drawHistogram(histogram);
    dispatch({ type: "set_guidance", name: file.name, histogram });
  } catch (err) {
    dispatch({
      type: "render_failed",
      message: err instanceof Error ? err.message : String(err),
      validation: err instanceof ApiError && err.status === 422,
    });
    sync();
  } finally {
    input.value = "";
  }
});
el<HTMLButtonElement>("guidance-clear").addEventListener("click", () => {
  el<HTMLCanvasElement>("histogram").getContext("2d")?.clearRect(0, 0, 256, 60);
  dispatch({ type: "clear_guidance" });
});

function drawHistogram(hist: number[][]): void {
  const hc = el<HTMLCanvasElement>("histogram");
  const ctx = hc.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, hc.width, hc.height);
  const peak = Math.max(1e-9, ...hist.flat());
  const colors = ["#ff5c5c", "#51d88a", "#6ab0ff"];
  for (let c = 0; c < 3; c++) {
    ctx.strokeStyle = colors[c];
    ctx.beginPath();
    for (let bin = 0; bin < 256; bin++) {
      const x = (bin / 255) * hc.width;
      const y = hc.height - (hist[bin][c] / peak) * (hc.height - 2);
      if (bin === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
}

el<HTMLButtonElement>("export-json").addEventListener("click", () => {
  download("wireframe.json", new Blob([serializeWireframe(state.wireframe)]));
});
el<HTMLButtonElement>("export-png").addEventListener("click", () => {
  if (!state.lastRender) return;
  const bytes = Uint8Array.from(atob(state.lastRender.scene), (ch) => ch.charCodeAt(0));
  download("scene.png", new Blob([bytes], { type: "image/png" }));
});

function download(name: string, blob: Blob): void {
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = name;
  a.click();
  URL.revokeObjectURL(url);
}

client
  .health()
  .then((h) => (statusBox.textContent = `service ${h.status} · ${h.model}`))
  .catch(() => (statusBox.textContent = `service unreachable at ${serviceBase}`));

sync();
