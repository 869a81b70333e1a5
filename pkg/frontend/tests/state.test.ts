import { describe, expect, it } from "vitest";

import { markerStyle, SceneState } from "../src/state.js";
import { EditDiff, SceneStateData } from "../src/types.js";

function sampleState(): SceneStateData {
  return {
    level: 2,
    level_sizes: [4, 2, 1],
    dirty: false,
    vertices: [
      [0, 0, 0],
      [1, 0, 0],
      [0, 1, 0],
      [0, 0, 1],
    ],
    faces: [
      [0, 1, 2],
      [0, 2, 3],
    ],
    colors: [
      [1, 0, 0],
      [0, 1, 0],
      [0, 0, 1],
      [1, 1, 0],
    ],
    proxies: {
      positions: [
        [0.5, 0, 0],
        [0, 0.5, 0.5],
      ],
      normals: [
        [0, 0, 1],
        [0, 0, 1],
      ],
      parents: [0, 0],
      residuals: [0, 0],
    },
  };
}

describe("SceneState", () => {
  it("loads service state and bumps revision", () => {
    const s = new SceneState();
    const r0 = s.revision;
    s.loadState(sampleState());
    expect(s.vertices.length).toBe(4);
    expect(s.proxyPositions.length).toBe(2);
    expect(s.activeLevel).toBe(2);
    expect(s.revision).toBeGreaterThan(r0);
  });

  it("applies drag diffs verbatim from the service", () => {
    const s = new SceneState();
    s.loadState(sampleState());
    const diff: EditDiff = {
      type: "drag",
      changed_indices: [1, 3],
      new_positions: [
        [1.5, 0, 0],
        [0, 0, 1.5],
      ],
      changed_color_indices: [],
      new_colors: [],
      dirty: true,
      script_line: "drag 2 0 0.5 0.0 0.0 1.0 subtree",
    };
    s.applyDiff(diff);
    expect(s.vertices[1]).toEqual([1.5, 0, 0]);
    expect(s.vertices[3]).toEqual([0, 0, 1.5]);
    expect(s.vertices[0]).toEqual([0, 0, 0]);
    expect(s.dirty).toBe(true);
    expect(s.scriptLines).toEqual(["drag 2 0 0.5 0.0 0.0 1.0 subtree"]);
  });

  it("applies color diffs for transfers", () => {
    const s = new SceneState();
    s.loadState(sampleState());
    s.applyDiff({
      type: "transfer",
      changed_indices: [],
      new_positions: [],
      changed_color_indices: [2],
      new_colors: [[0.2, 0.2, 0.2]],
      dirty: false,
      script_line: "transfer 2 0 -> 1 4",
    });
    expect(s.colors[2]).toEqual([0.2, 0.2, 0.2]);
    expect(s.colors[0]).toEqual([1, 0, 0]);
  });

  it("rejects out-of-range levels and clears selection on switch", () => {
    const s = new SceneState();
    s.loadState(sampleState());
    expect(() => s.setLevel(0)).toThrow(/out of range/);
    expect(() => s.setLevel(4)).toThrow(/out of range/);
    s.selectedProxy = 1;
    s.setLevel(1);
    expect(s.selectedProxy).toBeNull();
  });

  it("region toggling keeps source and target disjoint", () => {
    const s = new SceneState();
    s.loadState(sampleState());
    expect(s.toggleRegion(0, "source")).toBe("source");
    expect(s.toggleRegion(0, "target")).toBe("target");
    expect(s.sourceSelection.has(0)).toBe(false);
    expect(s.targetSelection.has(0)).toBe(true);
    expect(s.toggleRegion(0, "target")).toBeNull();
    expect(s.transferReady()).toBe(false);
    s.toggleRegion(0, "source");
    s.toggleRegion(1, "target");
    expect(s.transferReady()).toBe(true);
  });

  it("marker sizes grow with level", () => {
    expect(markerStyle(2).size).toBeGreaterThan(markerStyle(1).size);
    expect(markerStyle(3).size).toBeGreaterThan(markerStyle(2).size);
  });

  it("level switch swaps markers without touching the mesh", () => {
    const s = new SceneState();
    s.loadState(sampleState());
    const meshRev = s.meshRevision;
    const verts = s.vertices;
    const other = sampleState();
    other.level = 3;
    other.proxies = { positions: [[0, 0, 0]], normals: [[0, 0, 1]], parents: [-1], residuals: [0] };
    s.loadProxies(other);
    expect(s.activeLevel).toBe(3);
    expect(s.proxyPositions.length).toBe(1);
    expect(s.meshRevision).toBe(meshRev);
    expect(s.vertices).toBe(verts);
  });
});
