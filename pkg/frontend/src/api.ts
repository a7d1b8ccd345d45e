// Typed client for the review session API. This is the only server contract
// the UI knows about.

export interface SlotView {
  index: number;
  role: string;
  name: string | null;
  predicted: string | null;
}

export interface Segments {
  preamble: string;
  usees: string;
  main_code: string;
  users: string;
}

export interface CurrentView {
  done: boolean;
  element_id: string | null;
  index: number;
  element_count: number;
  segments?: Segments;
  slots?: SlotView[];
}

export type Decision = { action: "accept" } | { action: "override"; type: string };

export interface DecisionResponse {
  done: boolean;
  next_element_id: string | null;
}

export interface AssignmentEntry {
  module: string;
  path: string;
  slot: number;
  type: string;
  provenance: string;
}

export interface AssignmentDoc {
  schema_version: number;
  entries: AssignmentEntry[];
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function raise(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // keep the status text
  }
  throw new ApiError(resp.status, detail);
}

export class SessionApi {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async createSession(): Promise<{ session_id: string; element_count: number }> {
    const resp = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({}),
    });
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async current(sessionId: string): Promise<CurrentView> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/current`));
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async decide(
    sessionId: string,
    elementId: string,
    decisions: Record<string, Decision>,
  ): Promise<DecisionResponse> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/decision`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ element_id: elementId, decisions }),
    });
    if (!resp.ok) await raise(resp);
    return resp.json();
  }

  async assignmentText(sessionId: string): Promise<string> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/assignment`));
    if (!resp.ok) await raise(resp);
    return resp.text();
  }

  async assignment(sessionId: string): Promise<AssignmentDoc> {
    return JSON.parse(await this.assignmentText(sessionId));
  }

  async undo(sessionId: string): Promise<{ cursor: number; element_id: string }> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/undo`), {
      method: "POST",
    });
    if (!resp.ok) await raise(resp);
    return resp.json();
  }
}
