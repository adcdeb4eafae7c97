// DOM wiring: clip picker, ask box, session rendering, trace inspector.
// One in-flight ask at a time per session; concurrent sessions live in
// separate tabs, which the service supports.

import { ApiClient, ApiError, NetworkError } from "./api.js";
import type { ChatTurn, SessionView, TraceRecord } from "./types.js";
import {
  renderSessionView,
  renderTraceInspector,
  renderTraceNotFound,
} from "./views.js";

const api = new ApiClient(
  (window as { WATERWAY_QA_BASE?: string }).WATERWAY_QA_BASE ?? "http://127.0.0.1:8808",
);

let view: SessionView | null = null;
let asking = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function repaint(): void {
  const mount = el<HTMLDivElement>("session");
  mount.innerHTML = view ? renderSessionView(view) : `<p class="hint">open a clip to start</p>`;
  for (const button of mount.querySelectorAll<HTMLButtonElement>("button.retry")) {
    button.addEventListener("click", () => {
      const failed = view?.turns.filter((t) => t.error).at(-1);
      if (failed) void submitQuestion(failed.question);
    });
  }
}

async function refreshSampledFrames(records: TraceRecord[]): Promise<void> {
  if (!view) return;
  const sample = records.find((r) => r.stage === "sample");
  if (sample && Array.isArray(sample["indices"])) {
    const frames = view.session.frames;
    view.sampledFrames = (sample["indices"] as number[])
      .map((index) => frames[index - 1])
      .filter((ref): ref is string => ref !== undefined);
  }
}

async function refreshTrace(): Promise<void> {
  const mount = el<HTMLDivElement>("trace");
  if (!view) {
    mount.innerHTML = "";
    return;
  }
  try {
    const trace = await api.fetchTrace(view.session.session_id);
    await refreshSampledFrames(trace.records);
    mount.innerHTML = renderTraceInspector(trace.records);
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      mount.innerHTML = renderTraceNotFound(view.session.session_id);
    } else {
      mount.innerHTML = `<div class="trace error">${String(error)}</div>`;
    }
  }
}

async function submitQuestion(question: string): Promise<void> {
  if (!view || asking || !question.trim()) return;
  asking = true;
  const turn: ChatTurn = { question };
  view.turns.push(turn);
  repaint();
  try {
    turn.envelope = await api.ask(view.session.session_id, question);
  } catch (error) {
    if (error instanceof ApiError) {
      turn.error = { message: error.message, role: error.role, branch: error.branch,
                     retryable: false };
    } else if (error instanceof NetworkError) {
      turn.error = { message: error.message, role: null, branch: null, retryable: true };
    } else {
      turn.error = { message: String(error), role: null, branch: null, retryable: false };
    }
  } finally {
    asking = false;
  }
  repaint();
  await refreshTrace();
}

async function openClip(clipId: string): Promise<void> {
  const session = await api.createSession(clipId);
  view = { session, sampledFrames: [], turns: [] };
  repaint();
  await refreshTrace();
}

async function boot(): Promise<void> {
  const picker = el<HTMLSelectElement>("clip-picker");
  const form = el<HTMLFormElement>("ask-form");
  const input = el<HTMLInputElement>("question");
  try {
    const clips = await api.listClips();
    picker.innerHTML =
      `<option value="">pick a clip…</option>` +
      clips
        .map(
          (clip) =>
            `<option value="${clip.clip_id}">${clip.clip_id} (${clip.frame_count} frames)</option>`,
        )
        .join("");
  } catch (error) {
    el<HTMLDivElement>("session").innerHTML =
      `<p class="hint error">service offline: ${String(error)}</p>`;
  }
  picker.addEventListener("change", () => {
    if (picker.value) void openClip(picker.value);
  });
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void submitQuestion(input.value);
    input.value = "";
  });
}

if (typeof document !== "undefined") {
  void boot();
}
