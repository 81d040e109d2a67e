/**
 * Pure event reducer for the console view.
 *
 * Every coordinator event folds into the previous view without mutating it.
 * Only the pieces an event touches are replaced; untouched cells keep their
 * object identity so a renderer can diff cheaply.
 */

import {
  Cell,
  ConsoleView,
  DEFAULT_BEAMS,
  DEFAULT_SLOTS,
  FEED_LIMIT,
  FeedEntry,
  NodeRow,
  PhaseProgress,
  SessionSnapshot,
  SessionView,
  StreamEvent,
} from "./types.js";

export function initialView(): ConsoleView {
  return {
    beams: DEFAULT_BEAMS,
    slotsPerBeam: DEFAULT_SLOTS,
    cells: {},
    session: null,
    lightLevel: null,
    feed: [],
  };
}

function num(v: unknown, fallback = 0): number {
  return typeof v === "number" && Number.isFinite(v) ? v : fallback;
}

function str(v: unknown, fallback = ""): string {
  return typeof v === "string" ? v : fallback;
}

function eventTime(ev: StreamEvent): number | null {
  return typeof ev.t === "number" ? ev.t : null;
}

/** Grid dimensions never shrink below the reference rig shape. */
function gridDims(cells: Record<string, Cell>): { beams: number; slots: number } {
  let beams = DEFAULT_BEAMS;
  let slots = DEFAULT_SLOTS;
  for (const cell of Object.values(cells)) {
    if (cell.beam + 1 > beams) beams = cell.beam + 1;
    if (cell.slot + 1 > slots) slots = cell.slot + 1;
  }
  return { beams, slots };
}

function sessionFromSnapshot(snap: SessionSnapshot): SessionView {
  const expected = snap.expected_nodes;
  // The snapshot only carries aggregate delivered counts. Texture frames
  // always land before pattern frames, so attribute the first `expected`
  // deliveries to texture and the remainder to pattern.
  const texture: PhaseProgress = {
    delivered: Math.min(snap.delivered, expected),
    expected,
  };
  const pattern: PhaseProgress = {
    delivered: Math.max(0, snap.delivered - expected),
    expected,
  };
  return {
    id: snap.session_id,
    state: snap.state,
    expectedNodes: expected,
    texture,
    pattern,
    missing: snap.missing ?? [],
    outcome: snap.outcome ?? null,
    duration: snap.duration ?? null,
  };
}

function cellFromRow(row: NodeRow): Cell {
  return {
    nodeId: row.node_id,
    beam: row.beam,
    slot: row.slot,
    state: row.state === "lost" ? "lost" : "connected",
    lastSeen: row.last_heartbeat ?? null,
    framesDelivered: 0,
  };
}

type Formatter = (ev: StreamEvent) => string;

const FORMATTERS: Record<string, Formatter> = {
  snapshot: () => "stream connected, state refreshed",
  coordinator_started: () => "coordinator up",
  node_registered: (ev) =>
    `${str(ev.node)} registered (beam ${num(ev.beam)}, slot ${num(ev.slot)})`,
  registration_rejected: (ev) => `registration rejected: ${str(ev.node, "?")}`,
  node_disconnected: (ev) => `${str(ev.node)} disconnected`,
  node_lost: (ev) => `${str(ev.node)} lost`,
  session_started: (ev) =>
    `session ${str(ev.session)} started on ${num(ev.nodes)} nodes`,
  session_state: (ev) => `session ${str(ev.session)}: ${str(ev.state)}`,
  command_sent: (ev) => `${str(ev.command)} -> ${str(ev.node)}`,
  ack_received: (ev) =>
    `${str(ev.node)} ack ${str(ev.step)}${ev.ok === false ? " FAILED" : ""}`,
  frame_stored: (ev) =>
    `${str(ev.node)} ${str(ev.phase)} frame stored (${num(ev.bytes)} bytes)`,
  frame_rejected: (ev) => `frame rejected from ${str(ev.node, "?")}`,
  frame_duplicate: (ev) => `duplicate frame from ${str(ev.node, "?")}`,
  session_finalized: (ev) =>
    `session ${str(ev.session)} ${str(ev.outcome)}: ${num(ev.delivered)}/${num(ev.total)} frames`,
  session_deadline: (ev) => `session ${str(ev.session)} hit its deadline`,
  lights_set: (ev) => `lights -> ${num(ev.level)}% on ${num(ev.nodes)} nodes`,
  pattern_projected: (ev) =>
    `pattern ${str(ev.pattern)} (seed ${num(ev.seed)}) on ${num(ev.nodes)} nodes`,
  fleet_started: (ev) => `fleet job ${str(ev.job)}: ${str(ev.command)}`,
  fleet_dispatch: (ev) => `fleet -> ${str(ev.node)}`,
  fleet_node_done: (ev) => `fleet ${str(ev.node)}: ${str(ev.status)}`,
  fleet_finished: (ev) => `fleet job ${str(ev.job)} finished`,
  illegal_event: () => "coordinator ignored an illegal event",
  stray_ack: () => "stray ack",
  stray_fleet_result: () => "stray fleet result",
  agent_error: (ev) => `agent error on ${str(ev.node, "?")}`,
  spoofed_node: (ev) => `spoofed node id rejected: ${str(ev.node, "?")}`,
  unexpected_message: () => "unexpected message dropped",
};

function pushFeed(feed: FeedEntry[], entry: FeedEntry): FeedEntry[] {
  const next = [entry, ...feed];
  return next.length > FEED_LIMIT ? next.slice(0, FEED_LIMIT) : next;
}

function withCell(view: ConsoleView, cell: Cell): ConsoleView {
  const cells = { ...view.cells, [cell.nodeId]: cell };
  const dims = gridDims(cells);
  return { ...view, cells, beams: dims.beams, slotsPerBeam: dims.slots };
}

function bumpPhase(progress: PhaseProgress): PhaseProgress {
  // Never report more than expected even if the stream replays a frame.
  return {
    delivered: Math.min(progress.delivered + 1, progress.expected),
    expected: progress.expected,
  };
}

export function reduceEvent(view: ConsoleView, ev: StreamEvent): ConsoleView {
  const formatter = FORMATTERS[ev.kind];
  const t = eventTime(ev);
  if (!formatter) {
    // Unknown kind: log it, change nothing else.
    const entry: FeedEntry = {
      t,
      kind: ev.kind,
      text: `unknown event: ${ev.kind}`,
      unknown: true,
    };
    return { ...view, feed: pushFeed(view.feed, entry) };
  }

  const entry: FeedEntry = { t, kind: ev.kind, text: formatter(ev), unknown: false };
  let next: ConsoleView = { ...view, feed: pushFeed(view.feed, entry) };

  switch (ev.kind) {
    case "snapshot": {
      // Full refresh: rebuild the grid and session from the embedded state.
      const rows = Array.isArray(ev.nodes) ? (ev.nodes as NodeRow[]) : [];
      const cells: Record<string, Cell> = {};
      for (const row of rows) {
        if (row && typeof row.node_id === "string") {
          cells[row.node_id] = cellFromRow(row);
        }
      }
      const dims = gridDims(cells);
      const snapSession = ev.session as SessionSnapshot | null | undefined;
      next = {
        ...next,
        cells,
        beams: dims.beams,
        slotsPerBeam: dims.slots,
        session: snapSession ? sessionFromSnapshot(snapSession) : null,
      };
      break;
    }

    case "node_registered": {
      const nodeId = str(ev.node);
      if (!nodeId) break;
      const prev = next.cells[nodeId];
      next = withCell(next, {
        nodeId,
        beam: num(ev.beam, prev?.beam ?? 0),
        slot: num(ev.slot, prev?.slot ?? 0),
        state: "connected",
        lastSeen: t,
        framesDelivered: prev?.framesDelivered ?? 0,
      });
      break;
    }

    case "node_disconnected":
    case "node_lost": {
      const nodeId = str(ev.node);
      const prev = next.cells[nodeId];
      if (!prev) break;
      next = withCell(next, { ...prev, state: "lost", lastSeen: t });
      break;
    }

    case "session_started": {
      const expected = num(ev.nodes);
      next = {
        ...next,
        session: {
          id: str(ev.session),
          state: "idle",
          expectedNodes: expected,
          texture: { delivered: 0, expected },
          pattern: { delivered: 0, expected },
          missing: [],
          outcome: null,
          duration: null,
        },
      };
      break;
    }

    case "session_state": {
      if (next.session && next.session.id === str(ev.session)) {
        next = { ...next, session: { ...next.session, state: str(ev.state) } };
      }
      break;
    }

    case "frame_stored": {
      const nodeId = str(ev.node);
      const prev = next.cells[nodeId];
      if (prev) {
        next = withCell(next, {
          ...prev,
          lastSeen: t,
          framesDelivered: prev.framesDelivered + 1,
        });
      }
      if (next.session && next.session.id === str(ev.session)) {
        const phase = str(ev.phase);
        const session = { ...next.session };
        if (phase === "texture") session.texture = bumpPhase(session.texture);
        else if (phase === "pattern") session.pattern = bumpPhase(session.pattern);
        next = { ...next, session };
      }
      break;
    }

    case "session_finalized": {
      if (next.session && next.session.id === str(ev.session)) {
        next = {
          ...next,
          session: {
            ...next.session,
            state: str(ev.outcome) === "complete" ? "complete" : "partial_failure",
            outcome: str(ev.outcome) || null,
            missing: Array.isArray(ev.missing)
              ? (ev.missing as [string, string][])
              : next.session.missing,
            duration: typeof ev.duration === "number" ? ev.duration : null,
          },
        };
      }
      break;
    }

    case "lights_set": {
      next = { ...next, lightLevel: num(ev.level, view.lightLevel ?? 0) };
      break;
    }

    default:
      // Known kind with no view impact beyond the feed.
      break;
  }

  return next;
}

/** Fold a whole event log; handy for replay tests and reconnect catch-up. */
export function replay(events: Iterable<StreamEvent>, start?: ConsoleView): ConsoleView {
  let view = start ?? initialView();
  for (const ev of events) view = reduceEvent(view, ev);
  return view;
}

/** 0..1 completion fraction for a phase, 0 when nothing is expected. */
export function phaseFraction(progress: PhaseProgress): number {
  if (progress.expected <= 0) return 0;
  return Math.min(1, progress.delivered / progress.expected);
}

export function connectedCount(view: ConsoleView): number {
  return Object.values(view.cells).filter((c) => c.state === "connected").length;
}

export function lostCount(view: ConsoleView): number {
  return Object.values(view.cells).filter((c) => c.state === "lost").length;
}
