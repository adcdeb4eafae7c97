// API response shapes, mirrored 1:1 from the service JSON. The console is a
// pure projection of these: every number it shows comes from a field below.

export type RouteName = "FastVision" | "FastRag" | "ComplexReasoning";

export interface RetrievedRule {
  chunk_id: string;
  section_label: string | null;
  source_doc: string;
  text: string;
  score: number;
}

export interface GradeEntry {
  score: number;
  parse_ok: boolean;
}

export interface AskEnvelope {
  answer: string;
  route: RouteName;
  used_fallback: boolean;
  verified: boolean | null;
  retries: number;
  score_history: GradeEntry[];
  threshold: number | null;
  latency_ms: number;
  retrieved: RetrievedRule[];
  session_id: string;
  trace_degraded?: boolean;
}

export interface SessionInfo {
  session_id: string;
  clip_id: string;
  frame_count: number;
  frames: string[];
}

export interface ClipInfo {
  clip_id: string;
  frame_count: number;
  duration_s: number | null;
}

export interface TraceRecord {
  session_id: string;
  stage: string;
  ts: number;
  [key: string]: unknown;
}

export interface TraceResponse {
  session_id: string;
  records: TraceRecord[];
}

export interface HealthResponse {
  status: string;
  kb_chunks: number;
  sessions: number;
}

export interface ErrorTurn {
  message: string;
  role: string | null;
  branch: string | null;
  retryable: boolean;
}

export interface ChatTurn {
  question: string;
  envelope?: AskEnvelope;
  error?: ErrorTurn;
}

export interface SessionView {
  session: SessionInfo;
  sampledFrames: string[]; // frames at the trace's sampled indices
  turns: ChatTurn[];
}
