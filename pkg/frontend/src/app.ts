// Browser entry point: wires the bridge connection, chat pane, stop button,
// and map canvas together. All state logic lives in state.ts; this file is
// DOM glue only.

import { BridgeConnection } from "./connection.js";
import { renderMap } from "./map.js";
import { MapMeta } from "./protocol.js";
import {
  UiState, applyServerFrame, initialState, noteUserSent, setConnection,
} from "./state.js";

const REDRAW_MS = 100;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderTranscript(state: UiState, list: HTMLElement): void {
  while (list.childElementCount > state.transcript.length) {
    list.removeChild(list.lastChild!);
  }
  for (let i = list.childElementCount; i < state.transcript.length; i++) {
    const entry = state.transcript[i]!;
    const bubble = document.createElement("div");
    bubble.className = `bubble ${entry.who}`;
    bubble.textContent = entry.text;
    list.appendChild(bubble);
  }
  list.scrollTop = list.scrollHeight;
}

async function main(): Promise<void> {
  const state = initialState();
  const transcript = el<HTMLDivElement>("transcript");
  const input = el<HTMLInputElement>("command");
  const sendBtn = el<HTMLButtonElement>("send");
  const stopBtn = el<HTMLButtonElement>("stop");
  const status = el<HTMLSpanElement>("status");
  const canvas = el<HTMLCanvasElement>("map");
  const ctx = canvas.getContext("2d")!;

  const host = location.host || "127.0.0.1:8765";
  const meta: MapMeta = await (await fetch(`http://${host}/map`)).json();

  let dirty = true;
  const markDirty = () => { dirty = true; };
  setInterval(() => {
    if (!dirty) return;
    dirty = false;
    renderTranscript(state, transcript);
    renderMap(ctx, meta, state, canvas.width, canvas.height);
    const connected = state.connection === "connected";
    status.textContent = state.connection;
    status.className = state.connection;
    input.disabled = !connected;
    sendBtn.disabled = !connected;
    stopBtn.disabled = !connected;
  }, REDRAW_MS);

  const connection = new BridgeConnection(`ws://${host}`, {
    onFrame: (frame) => {
      applyServerFrame(state, frame);
      markDirty();
    },
    onStatus: (s) => {
      setConnection(state, s);
      markDirty();
    },
  });

  const send = (text: string) => {
    const trimmed = text.trim();
    if (!trimmed) return;
    if (connection.sendChat(trimmed)) {
      noteUserSent(state, trimmed, Date.now() / 1000);
      markDirty();
    }
  };

  sendBtn.addEventListener("click", () => {
    send(input.value);
    input.value = "";
  });
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") {
      send(input.value);
      input.value = "";
    }
  });
  // The stop button goes through the exact same path as typing "stop", so
  // the safety behavior cannot drift from the chat one.
  stopBtn.addEventListener("click", () => send("stop"));

  connection.connect();
}

main().catch((err) => {
  document.body.textContent = `failed to start: ${err}`;
});
