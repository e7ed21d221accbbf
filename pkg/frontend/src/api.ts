// Thin HTTP client for the session API.

import {
  DemoLabel,
  FusionMode,
  LearnResponse,
  RolloutSummary,
  SessionInfo,
  SystemName,
} from "./protocol.js";

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body !== undefined ? { "content-type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        const payload = await resp.json();
        detail = payload.detail ?? detail;
      } catch {
        // keep the bare status
      }
      throw new Error(`${method} ${path}: ${detail}`);
    }
    return (await resp.json()) as T;
  }

  createSession(system: SystemName): Promise<SessionInfo> {
    return this.request("POST", "/sessions", { system });
  }

  sessionInfo(id: string): Promise<SessionInfo> {
    return this.request("GET", `/sessions/${id}`);
  }

  learn(
    sessionId: string,
    demoIds: string[],
    mode: FusionMode,
    beta: number,
    gamma: number,
    order = 10,
  ): Promise<LearnResponse> {
    return this.request("POST", `/sessions/${sessionId}/learn`, {
      demo_ids: demoIds,
      mode,
      beta,
      gamma,
      order,
    });
  }

  rollout(
    sessionId: string,
    taskId: string,
    duration: number,
    mpc: Record<string, unknown> = {},
    realtime = true,
  ): Promise<RolloutSummary> {
    return this.request("POST", `/sessions/${sessionId}/rollout`, {
      task_id: taskId,
      duration,
      mpc,
      realtime,
    });
  }

  cancelRollout(sessionId: string): Promise<{ cancelling: boolean }> {
    return this.request("POST", `/sessions/${sessionId}/rollout/cancel`);
  }

  async exportDemos(sessionId: string): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/demos?session=${sessionId}`);
    if (!resp.ok) {
      throw new Error(`export failed: ${resp.status}`);
    }
    return await resp.text();
  }

  async deleteDemo(sessionId: string, demoId: string): Promise<void> {
    const resp = await this.fetchFn(
      `${this.baseUrl}/demos?session=${sessionId}&demo=${encodeURIComponent(demoId)}`,
      { method: "DELETE" },
    );
    if (!resp.ok) {
      throw new Error(`delete failed: ${resp.status}`);
    }
  }

  async importDemos(sessionId: string, text: string): Promise<string[]> {
    const resp = await this.fetchFn(`${this.baseUrl}/demos?session=${sessionId}`, {
      method: "PUT",
      body: text,
    });
    if (!resp.ok) {
      throw new Error(`import failed: ${resp.status}`);
    }
    const payload = (await resp.json()) as { imported: string[] };
    return payload.imported;
  }
}

export function liveChannelUrl(baseUrl: string, sessionId: string): string {
  return `${baseUrl.replace(/^http/, "ws")}/sessions/${sessionId}/live`;
}
