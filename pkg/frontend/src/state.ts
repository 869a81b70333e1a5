/** Client-side scene state: service data plus selection and edit parameters.
 *
 * Pure bookkeeping, no rendering; diffs from the service are applied
 * in place and a revision counter tells the viewer what to refresh.
 */

import { EditDiff, SceneStateData, Vec3 } from "./types.js";

export type EditorMode = "drag" | "transfer";

export class SceneState {
  vertices: Vec3[] = [];
  faces: [number, number, number][] = [];
  colors: Vec3[] = [];
  proxyPositions: Vec3[] = [];
  proxyParents: number[] = [];
  levelSizes: number[] = [];
  activeLevel = 3;
  dirty = false;

  mode: EditorMode = "drag";
  selectedProxy: number | null = null;
  sourceSelection: Set<number> = new Set();
  targetSelection: Set<number> = new Set();
  tau = 1.0;
  kNeighbors = 4;
  scriptLines: string[] = [];

  /** separate counters so a level switch swaps markers without a mesh rebuild */
  meshRevision = 0;
  markerRevision = 0;

  get revision(): number {
    return this.meshRevision + this.markerRevision;
  }

  loadState(data: SceneStateData): void {
    this.vertices = data.vertices;
    this.faces = data.faces;
    this.colors = data.colors;
    this.levelSizes = data.level_sizes;
    this.dirty = data.dirty;
    this.meshRevision++;
    this.loadProxies(data);
  }

  /** Swap the proxy overlay to another level's data; mesh arrays untouched. */
  loadProxies(data: SceneStateData): void {
    this.proxyPositions = data.proxies.positions;
    this.proxyParents = data.proxies.parents;
    this.levelSizes = data.level_sizes;
    this.activeLevel = data.level;
    this.dirty = data.dirty;
    this.markerRevision++;
  }

  get levels(): number {
    return this.levelSizes.length;
  }

  setLevel(level: number): void {
    // level sizes are unknown until the first state load
    if (this.levels > 0 && (level < 1 || level > this.levels)) {
      throw new Error(`level ${level} out of range [1, ${this.levels}]`);
    }
    if (level !== this.activeLevel) {
      this.activeLevel = level;
      this.clearSelection();
    }
  }

  clearSelection(): void {
    this.selectedProxy = null;
    this.sourceSelection.clear();
    this.targetSelection.clear();
    this.markerRevision++;
  }

  /** Apply an edit diff from the service; every changed value comes from the
   * response, never from local computation. */
  applyDiff(diff: EditDiff): void {
    diff.changed_indices.forEach((vi, k) => {
      this.vertices[vi] = diff.new_positions[k];
    });
    diff.changed_color_indices.forEach((vi, k) => {
      this.colors[vi] = diff.new_colors[k];
    });
    if (diff.type === "drag" && this.activeLevel === 1) {
      // level-1 proxies are the mesh vertices
      diff.changed_indices.forEach((vi, k) => {
        this.proxyPositions[vi] = diff.new_positions[k];
      });
      this.markerRevision++;
    }
    this.dirty = diff.dirty;
    this.scriptLines.push(diff.script_line);
    this.meshRevision++;
  }

  dropLastScriptLine(): void {
    this.scriptLines.pop();
    this.meshRevision++;
  }

  /** Toggle proxy membership for transfer-region selection.
   * Returns the set the proxy ended up in, or null when removed. */
  toggleRegion(index: number, region: "source" | "target"): "source" | "target" | null {
    const mine = region === "source" ? this.sourceSelection : this.targetSelection;
    const other = region === "source" ? this.targetSelection : this.sourceSelection;
    other.delete(index);
    if (mine.has(index)) {
      mine.delete(index);
      this.markerRevision++;
      return null;
    }
    mine.add(index);
    this.markerRevision++;
    return region;
  }

  transferReady(): boolean {
    return this.sourceSelection.size > 0 && this.targetSelection.size > 0;
  }
}

/** Marker visual parameters per level (coarser levels draw larger). */
export function markerStyle(level: number): { size: number; color: string } {
  const palette = ["#f2c14e", "#4ecdc4", "#a0633c", "#c44ef2", "#6cf24e"];
  return {
    size: 0.012 * Math.pow(1.9, level - 1),
    color: palette[(level - 1) % palette.length],
  };
}
