/**
 * Browser entry point: wires the stream client to the reducer and renders
 * the grid, session progress, controls, and event feed into the page.
 */

import { connectStream, setLights, startCapture, StreamStatus } from "./client.js";
import {
  connectedCount,
  initialView,
  lostCount,
  phaseFraction,
  reduceEvent,
} from "./reducer.js";
import { Cell, ConsoleView } from "./types.js";

const DEFAULT_BASE = "http://127.0.0.1:7462";

function coordinatorBase(): string {
  const param = new URLSearchParams(window.location.search).get("coordinator");
  return (param ?? DEFAULT_BASE).replace(/\/+$/, "");
}

interface Draft {
  lightLevel: number;
  patternKind: string;
  patternSeed: number;
  withPattern: boolean;
}

const draft: Draft = { lightLevel: 100, patternKind: "dots", patternSeed: 0, withPattern: true };

let view: ConsoleView = initialView();
let streamStatus: StreamStatus = "connecting";
let banner: string | null = null;
let busy = false;

const base = coordinatorBase();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function cellTitle(cell: Cell, now: number | null): string {
  const age =
    cell.lastSeen !== null && now !== null ? `${Math.max(0, now - cell.lastSeen).toFixed(1)}s ago` : "never";
  return `${cell.nodeId}  beam ${cell.beam} slot ${cell.slot}\n${cell.state}, last seen ${age}\n${cell.framesDelivered} frames`;
}

function renderGrid(root: HTMLElement): void {
  root.replaceChildren();
  const latest = view.feed.length > 0 ? view.feed[0]?.t ?? null : null;
  const byPos = new Map<string, Cell>();
  for (const cell of Object.values(view.cells)) {
    byPos.set(`${cell.beam}:${cell.slot}`, cell);
  }
  for (let beam = 0; beam < view.beams; beam += 1) {
    const row = el("div", "beam-row");
    row.appendChild(el("span", "beam-label", `beam ${String(beam).padStart(2, "0")}`));
    for (let slot = 0; slot < view.slotsPerBeam; slot += 1) {
      const cell = byPos.get(`${beam}:${slot}`);
      const box = el("div", `cell ${cell ? cell.state : "empty"}`);
      if (cell) {
        box.textContent = cell.nodeId;
        box.title = cellTitle(cell, latest);
      }
      row.appendChild(box);
    }
    root.appendChild(row);
  }
}

function renderSession(root: HTMLElement): void {
  root.replaceChildren();
  const s = view.session;
  if (!s) {
    root.appendChild(el("p", "muted", "no session yet"));
    return;
  }
  root.appendChild(el("h3", undefined, `session ${s.id}  [${s.state}]`));
  for (const [label, progress] of [
    ["texture", s.texture],
    ["pattern", s.pattern],
  ] as const) {
    const frac = phaseFraction(progress);
    const line = el("div", "progress-line");
    line.appendChild(el("span", "progress-label", label));
    const track = el("div", "progress-track");
    const fill = el("div", "progress-fill");
    fill.style.width = `${(frac * 100).toFixed(1)}%`;
    track.appendChild(fill);
    line.appendChild(track);
    line.appendChild(
      el("span", "progress-count", `${progress.delivered}/${progress.expected}`),
    );
    root.appendChild(line);
  }
  if (s.outcome) {
    const dur = s.duration !== null ? ` in ${s.duration.toFixed(2)}s` : "";
    root.appendChild(el("p", `outcome ${s.outcome}`, `${s.outcome}${dur}`));
  }
  if (s.missing.length > 0) {
    root.appendChild(
      el("p", "missing", `missing: ${s.missing.map(([n, p]) => `${n}/${p}`).join(", ")}`),
    );
  }
}

function sessionActive(): boolean {
  return view.session !== null && view.session.outcome === null;
}

function renderControls(root: HTMLElement): void {
  root.replaceChildren();

  const lightRow = el("div", "control-row");
  lightRow.appendChild(el("span", "control-label", "lights"));
  for (const level of [0, 50, 100]) {
    const btn = el("button", view.lightLevel === level ? "active" : undefined, `${level}%`);
    btn.addEventListener("click", () => {
      draft.lightLevel = level;
      void setLights(base, level).then((res) => {
        banner = res.ok ? null : res.error;
        render();
      });
    });
    lightRow.appendChild(btn);
  }
  root.appendChild(lightRow);

  const patternRow = el("div", "control-row");
  patternRow.appendChild(el("span", "control-label", "pattern"));
  const withPattern = el("input") as HTMLInputElement;
  withPattern.type = "checkbox";
  withPattern.checked = draft.withPattern;
  withPattern.addEventListener("change", () => {
    draft.withPattern = withPattern.checked;
  });
  patternRow.appendChild(withPattern);
  const kind = el("select") as HTMLSelectElement;
  for (const k of ["dots", "black"]) {
    const opt = el("option", undefined, k) as HTMLOptionElement;
    opt.value = k;
    if (k === draft.patternKind) opt.selected = true;
    kind.appendChild(opt);
  }
  kind.addEventListener("change", () => {
    draft.patternKind = kind.value;
  });
  patternRow.appendChild(kind);
  const seed = el("input") as HTMLInputElement;
  seed.type = "number";
  seed.value = String(draft.patternSeed);
  seed.addEventListener("change", () => {
    draft.patternSeed = Number(seed.value) || 0;
  });
  patternRow.appendChild(seed);
  root.appendChild(patternRow);

  const captureRow = el("div", "control-row");
  const capture = el("button", "capture", "start capture") as HTMLButtonElement;
  capture.disabled = busy || sessionActive();
  capture.title = sessionActive() ? "a session is already running" : "";
  capture.addEventListener("click", () => {
    busy = true;
    render();
    const req = {
      light_level: draft.lightLevel,
      ...(draft.withPattern
        ? {
            pattern: {
              kind: draft.patternKind,
              seed: draft.patternSeed,
              density: 0.5,
              width: 1920,
              height: 1080,
            },
          }
        : {}),
    };
    void startCapture(base, req).then((res) => {
      busy = false;
      banner = res.ok ? null : res.error;
      render();
    });
  });
  captureRow.appendChild(capture);
  root.appendChild(captureRow);
}

function renderFeed(root: HTMLElement): void {
  root.replaceChildren();
  for (const entry of view.feed) {
    const line = el("div", entry.unknown ? "feed-line unknown" : "feed-line");
    const t = entry.t !== null ? entry.t.toFixed(3) : "-";
    line.appendChild(el("span", "feed-t", t));
    line.appendChild(el("span", "feed-kind", entry.kind));
    line.appendChild(el("span", "feed-text", entry.text));
    root.appendChild(line);
  }
}

function render(): void {
  const statusEl = document.getElementById("status");
  if (statusEl) {
    const connected = connectedCount(view);
    const lost = lostCount(view);
    statusEl.textContent = `${base}  stream:${streamStatus}  nodes ${connected} up / ${lost} lost`;
    statusEl.className = streamStatus === "open" ? "status open" : "status down";
  }
  const bannerEl = document.getElementById("banner");
  if (bannerEl) {
    bannerEl.textContent = banner ?? "";
    bannerEl.style.display = banner ? "block" : "none";
  }
  const grid = document.getElementById("grid");
  if (grid) renderGrid(grid);
  const session = document.getElementById("session");
  if (session) renderSession(session);
  const controls = document.getElementById("controls");
  if (controls) renderControls(controls);
  const feed = document.getElementById("feed");
  if (feed) renderFeed(feed);
}

function main(): void {
  connectStream(base, {
    onEvent(ev) {
      view = reduceEvent(view, ev);
      render();
    },
    onStatus(status) {
      streamStatus = status;
      if (status === "open") banner = null;
      render();
    },
  });
  render();
}

main();
