/** Shapes shared by the stream client, the reducer, and the renderer. */

/** One row of GET /nodes, also embedded in stream snapshots. */
export interface NodeRow {
  node_id: string;
  beam: number;
  slot: number;
  state: string;
  last_heartbeat: number;
  disconnects: number;
}

/** GET /sessions/{id} body, also embedded in stream snapshots. */
export interface SessionSnapshot {
  session_id: string;
  state: string;
  terminal: boolean;
  expected_nodes: number;
  delivered: number;
  total: number;
  lost_nodes: string[];
  missing: [string, string][];
  started_at: number;
  outcome?: string;
  finished_at?: number;
  duration?: number;
}

/** Any line off the event stream. Unknown kinds still satisfy this. */
export interface StreamEvent {
  kind: string;
  t?: number;
  [field: string]: unknown;
}

export type CellState = "connected" | "lost";

export interface Cell {
  nodeId: string;
  beam: number;
  slot: number;
  state: CellState;
  /** stream time of the last event touching this node */
  lastSeen: number | null;
  framesDelivered: number;
}

export interface PhaseProgress {
  delivered: number;
  expected: number;
}

export interface SessionView {
  id: string;
  state: string;
  expectedNodes: number;
  texture: PhaseProgress;
  pattern: PhaseProgress;
  missing: [string, string][];
  outcome: string | null;
  duration: number | null;
}

export interface FeedEntry {
  t: number | null;
  kind: string;
  text: string;
  unknown: boolean;
}

export interface ConsoleView {
  /** grid rows; floors at the reference rig shape even before data */
  beams: number;
  slotsPerBeam: number;
  cells: Record<string, Cell>;
  session: SessionView | null;
  lightLevel: number | null;
  feed: FeedEntry[];
}

export const FEED_LIMIT = 200;
export const DEFAULT_BEAMS = 24;
export const DEFAULT_SLOTS = 4;
