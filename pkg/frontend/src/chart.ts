/** Chart rendering seam.
 *
 * The UI owns event translation and layout only; actual drawing is delegated
 * to an off-the-shelf Vega-Lite renderer. The renderer is injectable so tests
 * can swap in fakes (including throwing ones for the rollback path).
 */

import type { ChartSpecDoc } from "./types";
import type { BrushExtents } from "./gestures";

export interface RenderHandle {
  finalize(): void;
  /** PNG data URL of the current chart, when the backend supports it. */
  toImageURL?(): Promise<string>;
}

export interface ChartListeners {
  onBrush?(extents: BrushExtents): void;
  onClick?(values: Record<string, unknown>): void;
}

export type ChartRenderer = (
  container: HTMLElement,
  spec: ChartSpecDoc,
  data: Record<string, unknown>[],
  listeners: ChartListeners,
) => Promise<RenderHandle>;

/**
 * Default renderer backed by vega-embed (scroll-zoom enabled, actions off).
 * Loaded lazily so test environments never need the dependency.
 */
export const vegaEmbedRenderer: ChartRenderer = async (
  container,
  spec,
  data,
  listeners,
) => {
  const { default: embed } = await import("vega-embed");
  const named = (spec.data as { name?: string } | undefined)?.name ?? "table";
  const result = await embed(
    container,
    { ...spec, data: { name: named } } as never,
    { actions: false, datasets: { [named]: data } } as never,
  );
  const view = result.view as unknown as {
    addSignalListener(name: string, cb: (n: string, v: unknown) => void): void;
    finalize(): void;
    toImageURL(kind: string): Promise<string>;
  };
  const params = (spec.params ?? []) as Array<{ name?: string; select?: unknown }>;
  for (const param of params) {
    if (!param.name || !param.select) continue;
    const kind =
      typeof param.select === "string"
        ? param.select
        : (param.select as { type?: string }).type;
    view.addSignalListener(param.name, (_name, value) => {
      if (!value || typeof value !== "object") return;
      if (kind === "interval" && listeners.onBrush) {
        const extents: BrushExtents = {};
        for (const [field, pair] of Object.entries(value as Record<string, unknown>)) {
          if (Array.isArray(pair) && pair.length === 2) {
            extents[field] = [pair[0] as never, pair[1] as never];
          }
        }
        if (Object.keys(extents).length > 0) listeners.onBrush(extents);
      } else if (kind === "point" && listeners.onClick) {
        listeners.onClick(value as Record<string, unknown>);
      }
    });
  }
  return {
    finalize: () => view.finalize(),
    toImageURL: () => view.toImageURL("png"),
  };
};

/** Renderer that draws nothing; used headless and in unit tests. */
export const nullRenderer: ChartRenderer = async () => ({ finalize: () => {} });
