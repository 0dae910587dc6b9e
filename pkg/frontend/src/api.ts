/** Typed fetch client for the session service; the UI's only data source. */

import type {
  BranchEntry,
  BreadcrumbToken,
  DatasetSummary,
  DrillResultWire,
  InsightsResponse,
  InteractionEventWire,
  NavigationState,
  ServerState,
  SessionConfig,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

export class DrilldownApi {
  private sessionId: string | null = null;

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  get session(): string {
    if (this.sessionId === null) throw new Error("no session created yet");
    return this.sessionId;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    form?: FormData,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (form) {
      init.body = form;
    } else if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "Content-Type": "application/json" };
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const text = await response.text();
    const payload = text ? JSON.parse(text) : {};
    if (!response.ok) {
      const err = (payload as { error?: { code?: string; message?: string } }).error;
      throw new ApiError(
        err?.code ?? "HTTP_ERROR",
        err?.message ?? `HTTP ${response.status}`,
        response.status,
      );
    }
    return payload as T;
  }

  async createSession(): Promise<string> {
    const { session_id } = await this.request<{ session_id: string }>(
      "POST",
      "/sessions",
    );
    this.sessionId = session_id;
    return session_id;
  }

  attach(sessionId: string): void {
    this.sessionId = sessionId;
  }

  async uploadCsv(fileName: string, csvText: string): Promise<DatasetSummary> {
    const form = new FormData();
    form.append("file", new Blob([csvText], { type: "text/csv" }), fileName);
    const body = await this.request<{ dataset: DatasetSummary }>(
      "POST",
      `/sessions/${this.session}/datasets`,
      undefined,
      form,
    );
    return body.dataset;
  }

  drillText(instruction: string): Promise<DrillResultWire> {
    return this.request("POST", `/sessions/${this.session}/drill`, { instruction });
  }

  drillTag(label: string): Promise<DrillResultWire> {
    return this.request("POST", `/sessions/${this.session}/drill`, {
      dimension_tag: label,
    });
  }

  insights(): Promise<InsightsResponse> {
    return this.request("POST", `/sessions/${this.session}/insights`);
  }

  async breadcrumb(): Promise<BreadcrumbToken[]> {
    const body = await this.request<{ breadcrumb: BreadcrumbToken[] }>(
      "GET",
      `/sessions/${this.session}/breadcrumb`,
    );
    return body.breadcrumb;
  }

  async branches(): Promise<BranchEntry[]> {
    const body = await this.request<{ branches: BranchEntry[] }>(
      "GET",
      `/sessions/${this.session}/branches`,
    );
    return body.branches;
  }

  jump(nodeId: string): Promise<NavigationState> {
    return this.request("POST", `/sessions/${this.session}/jump`, { node_id: nodeId });
  }

  switchBranch(leafId: string): Promise<NavigationState> {
    return this.request("POST", `/sessions/${this.session}/switch`, {
      leaf_id: leafId,
    });
  }

  reset(): Promise<NavigationState> {
    return this.request("POST", `/sessions/${this.session}/reset`);
  }

  sendInteraction(
    event: InteractionEventWire,
  ): Promise<{ recorded: boolean; dropped: boolean }> {
    return this.request("POST", `/sessions/${this.session}/interactions`, event);
  }

  async putConfig(update: {
    model_id?: string;
    reasoning_level?: string;
    tracking_enabled?: boolean;
  }): Promise<SessionConfig> {
    const body = await this.request<{ config: SessionConfig }>(
      "PUT",
      `/sessions/${this.session}/config`,
      update,
    );
    return body.config;
  }

  state(): Promise<ServerState> {
    return this.request("GET", `/sessions/${this.session}/state`);
  }

  exportSession(): Promise<Record<string, unknown>> {
    return this.request("GET", `/sessions/${this.session}/export`);
  }

  reportRenderError(
    nodeId: string,
    errorTrace: string,
  ): Promise<{ status: string } & NavigationState> {
    return this.request("POST", `/sessions/${this.session}/render-error`, {
      node_id: nodeId,
      error_trace: errorTrace,
    });
  }
}
