import {
  CommitResult,
  CommitResultSchema,
  Task,
  TasksResponseSchema,
  VerdictAction,
  VerdictPayload,
  Waveform,
  WaveformSchema,
} from "./types";

export type FetchLike = (
  url: string,
  init?: RequestInit
) => Promise<Response>;

/** The requested file does not exist on the service (HTTP 404). */
export class NotFoundError extends Error {}

/** The service rejected the request as structurally invalid (HTTP 422). */
export class RejectedVerdictError extends Error {}

/** Transport failure or an unexpected status code. */
export class ServiceError extends Error {}

async function detailOf(resp: Response): Promise<string> {
  try {
    const doc = await resp.json();
    return typeof doc.detail === "string" ? doc.detail : resp.statusText;
  } catch {
    return resp.statusText;
  }
}

/**
 * Thin typed client over the review service HTTP contract. Responses
 * are schema-validated so a drifting server fails loudly here instead
 * of deep in the UI.
 */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init)
  ) {}

  private async get(path: string, init?: RequestInit): Promise<Response> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`);
    }
    if (resp.status === 404) {
      throw new NotFoundError(await detailOf(resp));
    }
    return resp;
  }

  async tasks(): Promise<Task[]> {
    const resp = await this.get("/tasks");
    if (!resp.ok) {
      throw new ServiceError(`tasks failed: ${resp.status}`);
    }
    return TasksResponseSchema.parse(await resp.json()).tasks;
  }

  async waveform(filename: string): Promise<Waveform> {
    const resp = await this.get(`/waveform/${filename}`);
    if (!resp.ok) {
      throw new ServiceError(`waveform failed: ${resp.status}`);
    }
    return WaveformSchema.parse(await resp.json());
  }

  /** Fetch audio bytes, optionally a byte range (start inclusive). */
  async audio(
    filename: string,
    range?: { start: number; end?: number }
  ): Promise<ArrayBuffer> {
    const init: RequestInit = {};
    if (range) {
      const end = range.end === undefined ? "" : String(range.end);
      init.headers = { Range: `bytes=${range.start}-${end}` };
    }
    const resp = await this.get(`/audio/${filename}`, init);
    if (resp.status !== 200 && resp.status !== 206) {
      throw new ServiceError(`audio failed: ${resp.status}`);
    }
    return resp.arrayBuffer();
  }

  async submitVerdict(filename: string, action: VerdictAction): Promise<void> {
    const payload: VerdictPayload = { filename, status: action.status };
    if (action.status === "trimmed") {
      payload.trim_start_s = action.trim_start_s;
      payload.trim_end_s = action.trim_end_s;
    } else if (action.status === "discarded") {
      payload.reason = action.reason;
    }
    const resp = await this.get("/verdict", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (resp.status === 422) {
      throw new RejectedVerdictError(await detailOf(resp));
    }
    if (!resp.ok) {
      throw new ServiceError(`verdict failed: ${resp.status}`);
    }
  }

  async commit(): Promise<CommitResult> {
    const resp = await this.get("/commit", { method: "POST" });
    if (!resp.ok) {
      throw new ServiceError(`commit failed: ${resp.status}`);
    }
    return CommitResultSchema.parse(await resp.json());
  }
}
