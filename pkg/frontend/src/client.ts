/**
 * Coordinator HTTP client: NDJSON event stream plus the command endpoints.
 *
 * The stream delivers a full snapshot first, then incremental events, so a
 * reconnect only needs to re-dial; the reducer handles the refresh.
 */

import { NodeRow, StreamEvent } from "./types.js";

export type StreamStatus = "connecting" | "open" | "closed";

export interface StreamHandle {
  stop(): void;
}

export interface StreamCallbacks {
  onEvent(ev: StreamEvent): void;
  onStatus?(status: StreamStatus): void;
}

const RECONNECT_DELAY_MS = 2000;

/**
 * Follow GET /events, reconnecting on any failure until stop() is called.
 * Lines that fail to parse are dropped; the stream stays up.
 */
export function connectStream(base: string, callbacks: StreamCallbacks): StreamHandle {
  let stopped = false;
  let controller: AbortController | null = null;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const setStatus = (s: StreamStatus) => callbacks.onStatus?.(s);

  async function readOnce(): Promise<void> {
    controller = new AbortController();
    setStatus("connecting");
    const resp = await fetch(`${base}/events`, { signal: controller.signal });
    if (!resp.ok || !resp.body) throw new Error(`stream http ${resp.status}`);
    setStatus("open");

    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let nl = buffer.indexOf("\n");
      while (nl >= 0) {
        const line = buffer.slice(0, nl).trim();
        buffer = buffer.slice(nl + 1);
        nl = buffer.indexOf("\n");
        if (!line) continue; // keepalive
        try {
          const ev = JSON.parse(line) as StreamEvent;
          if (ev && typeof ev.kind === "string") callbacks.onEvent(ev);
        } catch {
          // garbled line, skip it
        }
      }
    }
  }

  async function loop(): Promise<void> {
    while (!stopped) {
      try {
        await readOnce();
      } catch {
        // fall through to the retry delay
      }
      if (stopped) break;
      setStatus("closed");
      await new Promise<void>((resolve) => {
        timer = setTimeout(resolve, RECONNECT_DELAY_MS);
      });
    }
  }

  void loop();

  return {
    stop() {
      stopped = true;
      if (timer !== null) clearTimeout(timer);
      controller?.abort();
      setStatus("closed");
    },
  };
}

export interface ApiResult<T> {
  ok: boolean;
  status: number;
  body: T | null;
  error: string | null;
}

async function post<T>(base: string, path: string, payload: unknown): Promise<ApiResult<T>> {
  try {
    const resp = await fetch(`${base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    const body = (await resp.json().catch(() => null)) as T | null;
    if (!resp.ok) {
      const detail = (body as unknown as { error?: unknown } | null)?.error;
      const err = detail !== undefined ? String(detail) : `http ${resp.status}`;
      return { ok: false, status: resp.status, body, error: err };
    }
    return { ok: true, status: resp.status, body, error: null };
  } catch (exc) {
    return { ok: false, status: 0, body: null, error: `coordinator unreachable: ${exc}` };
  }
}

export interface CaptureRequest {
  light_level: number;
  pattern?: { kind: string; seed: number; density: number; width: number; height: number };
}

export function startCapture(
  base: string,
  req: CaptureRequest,
): Promise<ApiResult<{ session_id: string }>> {
  return post(base, "/sessions", req);
}

export function setLights(base: string, level: number): Promise<ApiResult<unknown>> {
  return post(base, "/lights", { level });
}

export function projectPattern(
  base: string,
  pattern: CaptureRequest["pattern"],
): Promise<ApiResult<unknown>> {
  return post(base, "/pattern", pattern);
}

export async function fetchNodes(base: string): Promise<ApiResult<NodeRow[]>> {
  try {
    const resp = await fetch(`${base}/nodes`);
    const body = (await resp.json().catch(() => null)) as NodeRow[] | null;
    if (!resp.ok) return { ok: false, status: resp.status, body, error: `http ${resp.status}` };
    return { ok: true, status: resp.status, body, error: null };
  } catch (exc) {
    return { ok: false, status: 0, body: null, error: `coordinator unreachable: ${exc}` };
  }
}
