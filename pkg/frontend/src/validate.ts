import { DISCARD_REASONS, DiscardReason, Task, VerdictAction } from "./types";

/**
 * Client-side verdict validation. Mirrors the server's 422 rules so a
 * structurally invalid verdict is blocked before it ever leaves the
 * browser: trim handles must be ordered and inside the clip, discards
 * need a recognised reason.
 */
export function validateVerdict(task: Task, action: VerdictAction): string[] {
  const problems: string[] = [];
  if (action.status === "trimmed") {
    const { trim_start_s, trim_end_s } = action;
    if (!Number.isFinite(trim_start_s) || !Number.isFinite(trim_end_s)) {
      problems.push("trim handles must both be set");
    } else {
      if (trim_start_s < 0) {
        problems.push("trim start before clip start");
      }
      if (trim_end_s > task.duration_s) {
        problems.push("trim end past clip end");
      }
      if (trim_start_s >= trim_end_s) {
        problems.push("trim start must precede trim end");
      }
    }
  } else if (action.status === "discarded") {
    if (!DISCARD_REASONS.includes(action.reason)) {
      problems.push("discard requires a valid reason");
    }
  }
  return problems;
}

/**
 * Discard-reason preselection: clips recorded above the dataset's
 * altitude ceiling default to the matching reason so the reviewer only
 * confirms it.
 */
export function suggestedReason(task: Task): DiscardReason | null {
  if (task.altitude_ft !== null && task.altitude_ft > 10000) {
    return "over_10000ft";
  }
  return null;
}
