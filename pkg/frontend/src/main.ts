/**
 * Page bootstrap: query parameters, WebSocket, input wiring.
 *
 * URL parameters: ?session=<token> (required by the server),
 * &mask=on to start masking noise, &transient=on to also play the
 * vibration transient through the speakers (off by default).
 */

import { AudioOutput } from "./audio.js";
import { MaterialName, encode } from "./protocol.js";
import { UiSession } from "./session.js";
import { monotonicNowUs } from "./timing.js";
import { bindPage, paint, setConnection } from "./view.js";

function wsUrl(token: string): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws?token=${encodeURIComponent(token)}`;
}

function loadKeyMap(): Record<string, MaterialName> {
  try {
    const raw = localStorage.getItem("tapstroop-keys");
    if (raw) {
      return JSON.parse(raw);
    }
  } catch {
    /* fresh defaults */
  }
  return { r: "rubber", a: "aluminum" };
}

function main(): void {
  const params = new URLSearchParams(location.search);
  const token = params.get("session") ?? "";
  const els = bindPage(document);
  const audio = new AudioOutput();
  const keyMap = loadKeyMap();

  const socket = new WebSocket(wsUrl(token));
  const session = new UiSession(
    {
      nowUs: monotonicNowUs,
      send: (msg) => socket.send(encode(msg)),
      render: (view) => paint(els, view),
      random: Math.random,
      playTransient: (spec) => audio.playTransient(spec),
      log: (line) => console.debug(line),
    },
    {
      keyMap,
      playTransientAudio: params.get("transient") === "on",
    },
  );

  socket.addEventListener("open", () => {
    setConnection(els, "connected");
    if (params.get("mask") === "on") {
      audio.startMasking();
    }
    session.connected();
  });
  socket.addEventListener("message", (ev) => session.onText(String(ev.data)));
  socket.addEventListener("close", () => {
    setConnection(els, "disconnected");
    audio.stopMasking();
  });

  document.addEventListener("keydown", (ev) => {
    if (ev.repeat) {
      return;
    }
    if (ev.code === "Space") {
      ev.preventDefault();
      session.tapInput();
      return;
    }
    session.keyInput(ev.key);
  });
  els.cube.addEventListener("pointerdown", () => session.tapInput());

  // settings panel: remap the two response keys
  const keyRubber = document.getElementById("key-rubber") as HTMLInputElement | null;
  const keyAluminum = document.getElementById("key-aluminum") as HTMLInputElement | null;
  const applyKeys = () => {
    const map: Record<string, MaterialName> = {};
    map[(keyRubber?.value || "r").toLowerCase()] = "rubber";
    map[(keyAluminum?.value || "a").toLowerCase()] = "aluminum";
    session.setKeyMap(map);
    try {
      localStorage.setItem("tapstroop-keys", JSON.stringify(map));
    } catch {
      /* private mode */
    }
  };
  keyRubber?.addEventListener("change", applyKeys);
  keyAluminum?.addEventListener("change", applyKeys);
}

main();
