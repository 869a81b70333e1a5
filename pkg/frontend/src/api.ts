/** Typed client for the editing service. The UI never computes geometry or
 * colors itself: everything rendered comes from these responses. */

import {
  EditBody,
  EditDiff,
  SceneStateData,
  ServiceError,
  SessionInfo,
  UndoResult,
} from "./types.js";

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ServiceError(response.status, body?.error ?? response.statusText);
    }
    return body as T;
  }

  createSession(meshPath: string, hierarchyPath: string, modelPath: string): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        mesh_path: meshPath,
        hierarchy_path: hierarchyPath,
        model_path: modelPath,
      }),
    });
  }

  getState(sessionId: string, level: number): Promise<SceneStateData> {
    return this.request<SceneStateData>(`/sessions/${sessionId}/state?level=${level}`);
  }

  postEdit(sessionId: string, edit: EditBody): Promise<EditDiff> {
    return this.request<EditDiff>(`/sessions/${sessionId}/edits`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(edit),
    });
  }

  undo(sessionId: string): Promise<UndoResult> {
    return this.request<UndoResult>(`/sessions/${sessionId}/undo`, { method: "POST" });
  }

  async exportScript(sessionId: string): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/export/script`);
    if (!response.ok) {
      throw new ServiceError(response.status, response.statusText);
    }
    return response.text();
  }

  renderUrl(sessionId: string, params: Record<string, number>): string {
    const query = Object.entries(params)
      .map(([k, v]) => `${k}=${v}`)
      .join("&");
    return `${this.baseUrl}/sessions/${sessionId}/render?${query}`;
  }
}
