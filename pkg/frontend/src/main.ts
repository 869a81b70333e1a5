/** Application wiring: connect to a session, route UI actions through the
 * edit queue, apply service diffs. Thin client: all geometry and colors
 * displayed come from service responses. */

import { ApiClient } from "./api.js";
import { EditQueue } from "./queue.js";
import { SceneState } from "./state.js";
import { ServiceError, Vec3 } from "./types.js";
import { Viewer } from "./viewer.js";

const qs = new URLSearchParams(window.location.search);
const api = new ApiClient(qs.get("api") ?? "http://127.0.0.1:8008");
const state = new SceneState();
const queue = new EditQueue();
let sessionId: string | null = qs.get("session");

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

const banner = el<HTMLDivElement>("banner");
const status = el<HTMLSpanElement>("status");

function showError(message: string): void {
  banner.textContent = message;
  banner.classList.add("visible");
  setTimeout(() => banner.classList.remove("visible"), 6000);
}

function setStatus(text: string): void {
  status.textContent = text;
}

async function refreshState(): Promise<void> {
  if (!sessionId) return;
  try {
    state.loadState(await api.getState(sessionId, state.activeLevel));
    renderLevelButtons();
    setStatus(
      `session ${sessionId.slice(0, 8)} | level ${state.activeLevel} ` +
        `(${state.proxyPositions.length} proxies)` +
        (state.dirty ? " | hierarchy stale (rebuild before re-training)" : ""),
    );
  } catch (err) {
    showError(`failed to load state: ${(err as Error).message}`);
  }
}

function renderLevelButtons(): void {
  const box = el<HTMLDivElement>("levels");
  box.innerHTML = "";
  for (let l = 1; l <= state.levels; l++) {
    const btn = document.createElement("button");
    btn.textContent = `L${l} (${state.levelSizes[l - 1]})`;
    btn.className = l === state.activeLevel ? "active" : "";
    btn.onclick = () => void switchLevel(l);
    box.appendChild(btn);
  }
}

async function switchLevel(level: number): Promise<void> {
  // swap the proxy overlay only; the mesh stays as-is
  if (!sessionId) return;
  state.setLevel(level);
  try {
    state.loadProxies(await api.getState(sessionId, level));
    renderLevelButtons();
    setStatus(`level ${level} (${state.proxyPositions.length} proxies)`);
  } catch (err) {
    showError(`level switch failed: ${(err as Error).message}`);
  }
}

function commitDrag(index: number, displacement: Vec3): void {
  if (!sessionId) return;
  const body = {
    type: "drag" as const,
    level: state.activeLevel,
    point_index: index,
    displacement,
    tau: state.tau,
    scope: el<HTMLSelectElement>("scope").value as "subtree" | "global",
  };
  void queue.submit(async () => {
    const t0 = performance.now();
    try {
      const diff = await api.postEdit(sessionId!, body);
      state.applyDiff(diff);
      await refreshProxiesOnly();
      setStatus(`drag applied: ${diff.changed_indices.length} vertices in ${(performance.now() - t0).toFixed(0)} ms`);
    } catch (err) {
      showError(`edit rejected: ${(err as Error).message}`);
    }
  });
}

async function refreshProxiesOnly(): Promise<void> {
  // proxy positions of the active level may change after drags (level 1)
  // or stay stale (dirty hierarchy); re-fetch to show service truth
  if (!sessionId) return;
  const data = await api.getState(sessionId, state.activeLevel);
  state.loadState(data);
}

function commitTransfer(): void {
  if (!sessionId) return;
  if (!state.transferReady()) {
    showError("select source and target proxies first");
    return;
  }
  const body = {
    type: "transfer" as const,
    level: state.activeLevel,
    source_indices: [...state.sourceSelection].sort((a, b) => a - b),
    target_indices: [...state.targetSelection].sort((a, b) => a - b),
    k_neighbors: state.kNeighbors,
  };
  void queue.submit(async () => {
    const t0 = performance.now();
    try {
      const diff = await api.postEdit(sessionId!, body);
      state.applyDiff(diff);
      state.clearSelection();
      setStatus(
        `transfer recolored ${diff.changed_color_indices.length} vertices in ${(performance.now() - t0).toFixed(0)} ms`,
      );
    } catch (err) {
      showError(`transfer rejected: ${(err as Error).message}`);
    }
  });
}

function undo(): void {
  if (!sessionId) return;
  void queue.submit(async () => {
    try {
      await api.undo(sessionId!);
      state.dropLastScriptLine();
      await refreshState();
      setStatus("undo applied");
    } catch (err) {
      const e = err as ServiceError;
      showError(e.status === 409 ? "nothing to undo" : e.message);
    }
  });
}

async function exportScript(): Promise<void> {
  if (!sessionId) return;
  try {
    const text = await api.exportScript(sessionId);
    el<HTMLTextAreaElement>("script-view").value = text;
    const blob = new Blob([text], { type: "text/plain" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "edits.txt";
    a.click();
    URL.revokeObjectURL(a.href);
  } catch (err) {
    showError(`export failed: ${(err as Error).message}`);
  }
}

async function connect(): Promise<void> {
  const mesh = el<HTMLInputElement>("mesh-path").value;
  const hierarchy = el<HTMLInputElement>("hierarchy-path").value;
  const model = el<HTMLInputElement>("model-path").value;
  try {
    const info = await api.createSession(mesh, hierarchy, model);
    sessionId = info.session_id;
    state.setLevel(Math.min(3, info.level_sizes.length));
    await refreshState();
  } catch (err) {
    showError(`connect failed: ${(err as Error).message}`);
  }
}

new Viewer(el<HTMLCanvasElement>("viewport"), state, {
  onProxyPicked(index) {
    if (state.mode === "drag") {
      state.selectedProxy = index;
      state.markerRevision++;
      setStatus(`proxy ${index} selected at level ${state.activeLevel}`);
    } else {
      const region = el<HTMLSelectElement>("region").value as "source" | "target";
      state.toggleRegion(index, region);
      setStatus(`source ${state.sourceSelection.size} | target ${state.targetSelection.size}`);
    }
  },
  onDragCommit(index, displacement) {
    commitDrag(index, displacement);
  },
});

el<HTMLButtonElement>("connect").onclick = () => void connect();
el<HTMLButtonElement>("undo").onclick = () => undo();
el<HTMLButtonElement>("export").onclick = () => void exportScript();
el<HTMLButtonElement>("apply-transfer").onclick = () => commitTransfer();
el<HTMLSelectElement>("mode").onchange = (ev) => {
  state.mode = (ev.target as HTMLSelectElement).value as "drag" | "transfer";
  state.clearSelection();
};
el<HTMLInputElement>("tau").oninput = (ev) => {
  state.tau = Number((ev.target as HTMLInputElement).value);
  el<HTMLSpanElement>("tau-value").textContent = state.tau.toFixed(2);
};
el<HTMLInputElement>("k-neighbors").oninput = (ev) => {
  state.kNeighbors = Number((ev.target as HTMLInputElement).value);
};

if (sessionId) {
  void refreshState();
}
