/** Client session store.
 *
 * UI state is a pure projection of service responses: every mutation round
 * trips through the API and then refreshes from GET /state, so reloading and
 * refetching reproduces the identical rendered state. Mutations run through a
 * single promise queue mirroring the server's one-permit drill lock, and all
 * mutating controls are disabled while a request is in flight or the
 * interface is locked.
 */

import { DrilldownApi } from "./api";
import type { ChartRenderer, RenderHandle } from "./chart";
import { nullRenderer } from "./chart";
import { brushEvent, clickEvent, hoverEvent } from "./gestures";
import type { BrushExtents } from "./gestures";
import type {
  BranchEntry,
  BreadcrumbToken,
  ChartSpecDoc,
  DimensionTag,
  DrillResultWire,
  InsightsResponse,
  RankedInsightWire,
  SessionConfig,
} from "./types";

export interface UiSessionState {
  sessionId: string | null;
  hasDataset: boolean;
  spec: ChartSpecDoc | null;
  activeId: string | null;
  breadcrumb: BreadcrumbToken[];
  branches: BranchEntry[];
  dimensionTags: DimensionTag[];
  insightSections: Record<string, RankedInsightWire[]>;
  insightErrors: Record<string, string>;
  config: SessionConfig | null;
  locked: boolean;
  busy: boolean;
  notice: string | null;
}

const INITIAL: UiSessionState = {
  sessionId: null,
  hasDataset: false,
  spec: null,
  activeId: null,
  breadcrumb: [],
  branches: [],
  dimensionTags: [],
  insightSections: {},
  insightErrors: {},
  config: null,
  locked: false,
  busy: false,
  notice: null,
};

type Listener = (state: UiSessionState) => void;

export class SessionStore {
  state: UiSessionState = { ...INITIAL };
  private listeners: Listener[] = [];
  private queue: Promise<unknown> = Promise.resolve();
  private container: HTMLElement | null = null;
  private handle: RenderHandle | null = null;

  constructor(
    readonly api: DrilldownApi,
    private readonly renderer: ChartRenderer = nullRenderer,
    private readonly now: () => number = Date.now,
  ) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(patch: Partial<UiSessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  attachChartContainer(el: HTMLElement): void {
    this.container = el;
  }

  /** Serialize mutations; reject re-entrant calls while locked. */
  private enqueue<T>(work: () => Promise<T>): Promise<T> {
    if (this.state.locked) {
      return Promise.reject(new Error("interface is locked"));
    }
    const next = this.queue.then(async () => {
      this.emit({ busy: true, notice: null });
      try {
        return await work();
      } finally {
        this.emit({ busy: false });
      }
    });
    this.queue = next.catch(() => undefined);
    return next;
  }

  async start(): Promise<void> {
    await this.api.createSession();
    await this.refresh();
  }

  async refresh(): Promise<void> {
    const server = await this.api.state();
    this.emit({
      sessionId: server.session_id,
      hasDataset: server.has_dataset,
      spec: server.spec ?? null,
      activeId: server.active_id ?? null,
      breadcrumb: server.breadcrumb ?? [],
      branches: server.branches ?? [],
      dimensionTags: server.dimension_tags,
      config: server.config,
    });
    if (server.spec) await this.renderSpec(server.spec, server.active_id ?? null);
  }

  uploadCsv(fileName: string, csvText: string): Promise<void> {
    return this.enqueue(async () => {
      await this.api.uploadCsv(fileName, csvText);
      await this.refresh();
    });
  }

  drillText(instruction: string): Promise<DrillResultWire> {
    return this.drill(() => this.api.drillText(instruction));
  }

  drillTag(label: string): Promise<DrillResultWire> {
    return this.drill(() => this.api.drillTag(label));
  }

  private drill(run: () => Promise<DrillResultWire>): Promise<DrillResultWire> {
    return this.enqueue(async () => {
      const result = await run();
      if (result.status !== "ok") {
        this.emit({
          notice: `drill ${result.status} after ${result.attempts} attempt(s)`,
        });
        await this.refresh();
        return result;
      }
      await this.refresh();
      return result;
    });
  }

  generateInsights(): Promise<InsightsResponse> {
    return this.enqueue(async () => {
      const response = await this.api.insights();
      // high-level tags replace the basic ones server-side; refresh projects that
      this.emit({
        insightSections: response.sections,
        insightErrors: response.errors,
      });
      await this.refresh();
      return response;
    });
  }

  jump(nodeId: string): Promise<void> {
    return this.enqueue(async () => {
      await this.api.jump(nodeId);
      await this.refresh();
    });
  }

  switchBranch(leafId: string): Promise<void> {
    return this.enqueue(async () => {
      await this.api.switchBranch(leafId);
      await this.refresh();
    });
  }

  reset(): Promise<void> {
    return this.enqueue(async () => {
      await this.api.reset();
      this.emit({ insightSections: {}, insightErrors: {} });
      await this.refresh();
    });
  }

  /** Render the active spec; a renderer exception reports back for rollback. */
  private async renderSpec(spec: ChartSpecDoc, nodeId: string | null): Promise<void> {
    if (!this.container) return;
    this.handle?.finalize();
    this.handle = null;
    try {
      this.handle = await this.renderer(this.container, spec, [], {
        onBrush: (extents) => void this.captureBrush(extents, 0),
        onClick: (values) => void this.captureClick(values, 600),
      });
    } catch (error) {
      if (nodeId && this.state.breadcrumb.length > 1) {
        const trace = error instanceof Error ? `${error.name}: ${error.message}` : String(error);
        const reverted = await this.api.reportRenderError(nodeId, trace);
        this.emit({
          notice: `render failed; ${reverted.status}: prior chart restored`,
          spec: reverted.spec,
          activeId: reverted.active_id,
          breadcrumb: reverted.breadcrumb,
        });
        // the prior snapshot must render; give it one attempt with no retry loop
        this.handle = await this.renderer(this.container, reverted.spec, [], {});
      } else {
        this.emit({ notice: "render failed on the root view" });
      }
    }
  }

  // -- interaction capture -------------------------------------------------

  async captureBrush(extents: BrushExtents, durationMs: number): Promise<boolean> {
    const event = brushEvent(extents, this.now(), durationMs);
    const ack = await this.api.sendInteraction(event);
    return ack.recorded;
  }

  async captureClick(values: Record<string, unknown>, durationMs: number): Promise<boolean> {
    const ack = await this.api.sendInteraction(clickEvent(values, this.now(), durationMs));
    return ack.recorded;
  }

  async captureHover(values: Record<string, unknown>, durationMs: number): Promise<boolean> {
    const ack = await this.api.sendInteraction(hoverEvent(values, this.now(), durationMs));
    return ack.recorded; // sub-500 ms hovers come back dropped; the UI shows nothing
  }

  // -- toolbar -------------------------------------------------------------

  setModel(modelId: string): Promise<void> {
    return this.enqueue(async () => {
      const config = await this.api.putConfig({ model_id: modelId });
      this.emit({ config });
    });
  }

  setReasoningLevel(level: "low" | "medium" | "high"): Promise<void> {
    return this.enqueue(async () => {
      const config = await this.api.putConfig({ reasoning_level: level });
      this.emit({ config });
    });
  }

  setTracking(enabled: boolean): Promise<void> {
    return this.enqueue(async () => {
      const config = await this.api.putConfig({ tracking_enabled: enabled });
      this.emit({ config });
    });
  }

  /** Lock/unlock is purely client-side: it freezes all mutating controls. */
  setLocked(locked: boolean): void {
    this.emit({ locked });
  }

  async exportPng(): Promise<string | null> {
    if (this.handle?.toImageURL) return this.handle.toImageURL();
    return null;
  }
}
