// Wire protocol of the chatnav bridge: every frame is one JSON object.
// Server -> client: {topic, seq, stamp, payload}; client -> server frames
// only carry {topic, payload} and may only publish on chat/in.

export interface Pose {
  x: number;
  y: number;
  theta: number;
}

export interface Detection {
  label: string;
  score: number;
  x: number;
  y: number;
  stamp: number;
}

export type NavState = "pending" | "active" | "succeeded" | "aborted" | "timed_out";

export interface NavStatus {
  state: NavState;
  goal_label?: string | null;
  final_pose_error?: number | null;
}

export interface NavPath {
  goal_label?: string | null;
  waypoints: [number, number][];
}

export interface ChatPayload {
  text: string;
  reply_to?: number | null;
}

export interface ServerFrame {
  topic: string;
  seq?: number;
  stamp?: number;
  payload: unknown;
}

export interface MapMeta {
  width: number;
  height: number;
  resolution: number;
  origin: [number, number];
  cells: string[];
  objects?: { label: string; x: number; y: number; radius: number }[];
}

export function parseFrame(data: string): ServerFrame | null {
  let doc: unknown;
  try {
    doc = JSON.parse(data);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const frame = doc as Record<string, unknown>;
  if (typeof frame.topic !== "string" || !("payload" in frame)) return null;
  return frame as unknown as ServerFrame;
}

export function chatFrame(text: string): string {
  return JSON.stringify({ topic: "chat/in", payload: { text } });
}

export function isPose(p: unknown): p is Pose {
  const v = p as Pose;
  return (
    typeof v === "object" && v !== null &&
    typeof v.x === "number" && typeof v.y === "number" &&
    typeof v.theta === "number"
  );
}

export function isChat(p: unknown): p is ChatPayload {
  return typeof p === "object" && p !== null &&
    typeof (p as ChatPayload).text === "string";
}

export function isDetections(p: unknown): p is Detection[] {
  return Array.isArray(p) && p.every((d) =>
    typeof d === "object" && d !== null && typeof d.label === "string" &&
    typeof d.x === "number" && typeof d.y === "number");
}

export function isNavStatus(p: unknown): p is NavStatus {
  const states = ["pending", "active", "succeeded", "aborted", "timed_out"];
  return typeof p === "object" && p !== null &&
    states.includes((p as NavStatus).state);
}

export function isNavPath(p: unknown): p is NavPath {
  const v = p as NavPath;
  return typeof v === "object" && v !== null && Array.isArray(v.waypoints) &&
    v.waypoints.every((w) => Array.isArray(w) && w.length === 2);
}
