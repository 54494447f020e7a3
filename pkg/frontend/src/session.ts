import { ApiClient, RejectedVerdictError } from "./api";
import { DiscardReason, Task, VerdictAction, Waveform } from "./types";
import { suggestedReason, validateVerdict } from "./validate";

/** Everything the review screen needs for one pending recording. */
export interface TaskView {
  task: Task;
  waveform: Waveform;
  playheadS: number;
  trimStartS: number;
  trimEndS: number;
  suggestedReason: DiscardReason | null;
}

export type SessionState =
  | { kind: "reviewing"; view: TaskView }
  | { kind: "done" }
  | { kind: "error"; message: string };

/**
 * One reviewer working through the pending queue. The session is
 * optimistic: a verdict advances to the next task immediately, and a
 * server rejection (422) restores the task with the error attached.
 * The server journal stays the source of truth throughout, so a page
 * reload simply re-fetches whatever is still pending.
 */
export class ReviewSession {
  private queue: Task[] = [];
  private state: SessionState = { kind: "done" };
  private lastError: string | null = null;

  constructor(private api: ApiClient) {}

  current(): SessionState {
    return this.state;
  }

  error(): string | null {
    return this.lastError;
  }

  /** Fetch pending tasks and present the first one. */
  async loadNext(): Promise<SessionState> {
    try {
      this.queue = await this.api.tasks();
    } catch (err) {
      this.state = { kind: "error", message: String(err) };
      return this.state;
    }
    return this.present();
  }

  private async present(): Promise<SessionState> {
    const task = this.queue[0];
    if (!task) {
      this.state = { kind: "done" };
      return this.state;
    }
    try {
      const waveform = await this.api.waveform(task.filename);
      this.state = {
        kind: "reviewing",
        view: {
          task,
          waveform,
          playheadS: 0,
          trimStartS: 0,
          trimEndS: task.duration_s,
          suggestedReason: suggestedReason(task),
        },
      };
    } catch (err) {
      this.state = { kind: "error", message: String(err) };
    }
    return this.state;
  }

  /** Move a trim handle; handles stay ordered and inside the clip. */
  setTrim(startS: number, endS: number): void {
    if (this.state.kind !== "reviewing") {
      return;
    }
    const view = this.state.view;
    const duration = view.task.duration_s;
    view.trimStartS = Math.min(Math.max(startS, 0), duration);
    view.trimEndS = Math.min(Math.max(endS, view.trimStartS), duration);
  }

  /**
   * Validate locally, POST the verdict and advance. Structural problems
   * never reach the wire; a server 422 restores the task instead of
   * dropping it.
   */
  async submit(action: VerdictAction): Promise<SessionState> {
    if (this.state.kind !== "reviewing") {
      return this.state;
    }
    const view = this.state.view;
    const problems = validateVerdict(view.task, action);
    if (problems.length > 0) {
      this.lastError = problems.join("; ");
      return this.state;
    }
    const task = this.queue.shift() as Task;
    this.lastError = null;
    try {
      await this.api.submitVerdict(task.filename, action);
    } catch (err) {
      this.queue.unshift(task); // rejected: put it back in front
      this.lastError = String(
        err instanceof RejectedVerdictError ? err.message : err
      );
    }
    return this.present();
  }

  /**
   * Keyboard-first review: a=accept, t=trim to the current handles,
   * d=discard with the suggested (or given) reason. Returns the state
   * after the verdict, or null for an unbound key.
   */
  async handleKey(
    key: string,
    reason?: DiscardReason
  ): Promise<SessionState | null> {
    if (this.state.kind !== "reviewing") {
      return null;
    }
    const view = this.state.view;
    switch (key) {
      case "a":
        return this.submit({ status: "accepted" });
      case "t":
        return this.submit({
          status: "trimmed",
          trim_start_s: view.trimStartS,
          trim_end_s: view.trimEndS,
        });
      case "d": {
        const chosen = reason ?? view.suggestedReason;
        if (!chosen) {
          this.lastError = "discard requires a valid reason";
          return this.state;
        }
        return this.submit({ status: "discarded", reason: chosen });
      }
      default:
        return null;
    }
  }
}
