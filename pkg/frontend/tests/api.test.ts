import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ServiceError } from "../src/types.js";

function mockFetch(routes: Record<string, { status: number; body: unknown }>) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const impl = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    const route = routes[url.replace(/^http:\/\/test/, "")];
    if (!route) throw new Error(`unmocked ${url}`);
    return new Response(JSON.stringify(route.body), {
      status: route.status,
      headers: { "content-type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("ApiClient", () => {
  it("creates sessions with the documented body", async () => {
    const { impl, calls } = mockFetch({
      "/sessions": {
        status: 201,
        body: { session_id: "abc", level_sizes: [4, 2], bounding_box: { min: [0, 0, 0], max: [1, 1, 1] }, n_faces: 2 },
      },
    });
    const api = new ApiClient("http://test", impl);
    const info = await api.createSession("m.obj", "h.hpx", "t.hpm");
    expect(info.session_id).toBe("abc");
    expect(JSON.parse(calls[0].init!.body as string)).toEqual({
      mesh_path: "m.obj",
      hierarchy_path: "h.hpx",
      model_path: "t.hpm",
    });
  });

  it("raises ServiceError with the server message", async () => {
    const { impl } = mockFetch({
      "/sessions/x/undo": { status: 409, body: { error: "undo stack is empty" } },
    });
    const api = new ApiClient("http://test", impl);
    await expect(api.undo("x")).rejects.toThrowError(ServiceError);
    await expect(api.undo("x")).rejects.toThrow(/undo stack is empty/);
  });

  it("requests state with the level query", async () => {
    const { impl, calls } = mockFetch({
      "/sessions/abc/state?level=3": {
        status: 200,
        body: {
          level: 3,
          level_sizes: [4, 2, 1],
          dirty: false,
          vertices: [],
          faces: [],
          colors: [],
          proxies: { positions: [], normals: [], parents: [], residuals: [] },
        },
      },
    });
    const api = new ApiClient("http://test", impl);
    const state = await api.getState("abc", 3);
    expect(state.level).toBe(3);
    expect(calls[0].url).toContain("level=3");
  });

  it("builds render URLs from parameters", () => {
    const api = new ApiClient("http://test");
    expect(api.renderUrl("abc", { pz: 2.5, width: 64 })).toBe(
      "http://test/sessions/abc/render?pz=2.5&width=64",
    );
  });
});
