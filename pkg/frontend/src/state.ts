// Client-side session state: the append-only transcript plus the latest
// robot telemetry. All updates flow through applyServerFrame / noteUserSent
// so the render layer stays a pure function of this object.

import {
  Detection, NavPath, NavStatus, Pose, ServerFrame,
  isChat, isDetections, isNavPath, isNavStatus, isPose,
} from "./protocol.js";

export type ConnectionState = "disconnected" | "connecting" | "connected";

export interface TranscriptEntry {
  who: "user" | "robot";
  text: string;
  stamp: number;
}

export interface UiState {
  connection: ConnectionState;
  transcript: TranscriptEntry[];
  pose: Pose | null;
  detections: Detection[];
  navStatus: NavStatus | null;
  navPath: NavPath | null;
  lastError: string | null;
  framesSeen: number;
}

export function initialState(): UiState {
  return {
    connection: "disconnected",
    transcript: [],
    pose: null,
    detections: [],
    navStatus: null,
    navPath: null,
    lastError: null,
    framesSeen: 0,
  };
}

export function noteUserSent(state: UiState, text: string, now: number): void {
  state.transcript.push({ who: "user", text, stamp: now });
}

export function setConnection(state: UiState, connection: ConnectionState): void {
  state.connection = connection;
}

/** Fold one server frame into the state. Unknown topics are counted but
 * otherwise ignored so protocol growth never breaks the client. */
export function applyServerFrame(state: UiState, frame: ServerFrame): void {
  state.framesSeen += 1;
  switch (frame.topic) {
    case "chat/out":
      if (isChat(frame.payload)) {
        state.transcript.push({
          who: "robot",
          text: frame.payload.text,
          stamp: frame.stamp ?? 0,
        });
      }
      break;
    case "pose":
      if (isPose(frame.payload)) state.pose = frame.payload;
      break;
    case "detections":
      if (isDetections(frame.payload)) state.detections = frame.payload;
      break;
    case "nav/status":
      // The path (and its goal marker) stays on screen after a terminal
      // status; the marker restyles by outcome instead of vanishing.
      if (isNavStatus(frame.payload)) state.navStatus = frame.payload;
      break;
    case "nav/path":
      if (isNavPath(frame.payload)) state.navPath = frame.payload;
      break;
    case "error":
      state.lastError = String(
        (frame.payload as { message?: string })?.message ?? "unknown error");
      break;
    default:
      break;
  }
}

export function robotBubbles(state: UiState): TranscriptEntry[] {
  return state.transcript.filter((e) => e.who === "robot");
}
