// Pure renderers: SessionView state in, HTML strings out. Every displayed
// number is String(field) of a value from an API response — no client-side
// re-derivation of scores, routes, or timings.

import type {
  AskEnvelope,
  ChatTurn,
  ErrorTurn,
  RetrievedRule,
  SessionView,
  TraceRecord,
} from "./types.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function routeBadge(route: string, usedFallback: boolean): string {
  const fallback = usedFallback ? ` <span class="fallback" title="router fell back">fallback</span>` : "";
  return `<span class="badge badge-${route.toLowerCase()}">${escapeHtml(route)}</span>${fallback}`;
}

export function renderRulesPanel(rules: RetrievedRule[]): string {
  if (rules.length === 0) {
    return `<div class="rules-panel empty">no rules retrieved</div>`;
  }
  const items = rules
    .map((rule) => {
      const label = rule.section_label ?? rule.source_doc;
      return (
        `<li class="rule" data-chunk="${escapeHtml(rule.chunk_id)}">` +
        `<span class="rule-label">${escapeHtml(label)}</span>` +
        `<span class="rule-score">${String(rule.score)}</span>` +
        `<p class="rule-text">${escapeHtml(rule.text)}</p>` +
        `</li>`
      );
    })
    .join("");
  return `<ol class="rules-panel">${items}</ol>`;
}

export function renderScoreTimeline(envelope: AskEnvelope): string {
  if (envelope.verified === null) {
    return `<div class="timeline none">verification not applied on this path</div>`;
  }
  const threshold = envelope.threshold;
  const markers = envelope.score_history
    .map((grade, i) => {
      const passed = threshold !== null && grade.score >= threshold;
      return (
        `<li class="marker ${passed ? "pass" : "fail"}" data-attempt="${i + 1}">` +
        `${String(grade.score)}${threshold !== null ? ` / τ=${String(threshold)}` : ""}` +
        `</li>`
      );
    })
    .join("");
  const verdict = envelope.verified ? "verified" : "unverified";
  return (
    `<div class="timeline ${verdict}">` +
    `<span class="verdict">${verdict}</span>` +
    `<span class="retries">retries: ${String(envelope.retries)}</span>` +
    `<ol class="markers">${markers}</ol>` +
    `</div>`
  );
}

export function renderAnswerTurn(turn: ChatTurn): string {
  const question = `<div class="question">${escapeHtml(turn.question)}</div>`;
  if (turn.error) {
    return `<section class="turn error">${question}${renderErrorTurn(turn.error)}</section>`;
  }
  const envelope = turn.envelope;
  if (!envelope) {
    return `<section class="turn pending">${question}<div class="spinner">asking…</div></section>`;
  }
  return (
    `<section class="turn answered">` +
    question +
    `<div class="answer-head">${routeBadge(envelope.route, envelope.used_fallback)}` +
    `<span class="latency">${String(envelope.latency_ms)} ms</span></div>` +
    `<div class="answer">${escapeHtml(envelope.answer)}</div>` +
    renderScoreTimeline(envelope) +
    renderRulesPanel(envelope.retrieved) +
    `</section>`
  );
}

export function renderErrorTurn(error: ErrorTurn): string {
  const origin = [error.role, error.branch].filter(Boolean).join(" / ");
  return (
    `<div class="error-turn">` +
    `<span class="error-message">${escapeHtml(error.message)}</span>` +
    (origin ? `<span class="error-origin">failed: ${escapeHtml(origin)}</span>` : "") +
    (error.retryable ? `<button class="retry" type="button">retry</button>` : "") +
    `</div>`
  );
}

export function renderThumbnails(view: SessionView): string {
  const frames = view.sampledFrames.length ? view.sampledFrames : view.session.frames;
  const imgs = frames
    .map((ref) => `<img class="thumb" src="${escapeHtml(ref)}" alt="${escapeHtml(ref)}">`)
    .join("");
  return `<div class="thumbnails" data-clip="${escapeHtml(view.session.clip_id)}">${imgs}</div>`;
}

export function renderSessionView(view: SessionView): string {
  const turns = view.turns.map(renderAnswerTurn).join("");
  return (
    `<div class="session" data-session="${escapeHtml(view.session.session_id)}">` +
    renderThumbnails(view) +
    `<div class="turns">${turns}</div>` +
    `</div>`
  );
}

// --- trace inspector ---------------------------------------------------------

function traceDetail(record: TraceRecord): string {
  switch (record.stage) {
    case "route":
      return `path=${escapeHtml(String(record["path"]))} label=${escapeHtml(String(record["raw_label"]))}`;
    case "sample":
      return `indices=[${(record["indices"] as number[]).map(String).join(", ")}]`;
    case "caption":
      return record["degraded"]
        ? "degraded (captioner unavailable)"
        : escapeHtml(String(record["text"] ?? ""));
    case "retrieve": {
      const hits = (record["hits"] as { chunk_id: string; score: number }[]) ?? [];
      const lines = hits
        .map((hit) => `<li>${escapeHtml(hit.chunk_id)} → ${String(hit.score)}</li>`)
        .join("");
      return `<details><summary>${String(hits.length)} hits</summary><ul>${lines}</ul></details>`;
    }
    case "grade": {
      const rationale = record["rationale"] ?? record["rationale_sha"] ?? "";
      return (
        `score=${String(record["score"])} ` +
        `<details><summary>rationale</summary>${escapeHtml(String(rationale))}</details>`
      );
    }
    case "reason":
      return escapeHtml(String(record["final_text"] ?? ""));
    case "summary":
      return record["skipped"] ? "skipped (passthrough)" : escapeHtml(String(record["text"] ?? ""));
    case "error":
      return `<span class="error-message">${escapeHtml(String(record["error"]))}</span>`;
    default:
      return "";
  }
}

export function renderTraceInspector(records: TraceRecord[]): string {
  if (records.length === 0) {
    return `<div class="trace empty">no trace recorded yet</div>`;
  }
  const rows = records
    .map(
      (record) =>
        `<li class="stage stage-${escapeHtml(record.stage)}">` +
        `<span class="stage-name">${escapeHtml(record.stage)}</span>` +
        `<span class="stage-ts">${String(record.ts)}</span>` +
        `<div class="stage-detail">${traceDetail(record)}</div>` +
        `</li>`,
    )
    .join("");
  return `<ol class="trace">${rows}</ol>`;
}

export function renderTraceNotFound(sessionId: string): string {
  return `<div class="trace missing">session not found: ${escapeHtml(sessionId)}</div>`;
}
