import { z } from "zod";

export const TaskSchema = z.object({
  filename: z.string(),
  class: z.union([z.literal(0), z.literal(1)]),
  hex_id: z.string(),
  altitude_ft: z.number().int().nullable(),
  date: z.string(),
  time: z.string(),
  location_id: z.number().int(),
  mic_id: z.number().int(),
  duration_s: z.number(),
  status: z.string(),
  trim_start_s: z.number().nullable(),
  trim_end_s: z.number().nullable(),
  reason: z.string().nullable(),
  audio_url: z.string(),
});

export type Task = z.infer<typeof TaskSchema>;

export const TasksResponseSchema = z.object({
  tasks: z.array(TaskSchema),
});

export const WaveformSchema = z.object({
  bins_per_second: z.number().int().positive(),
  bins: z.array(z.number()),
});

export type Waveform = z.infer<typeof WaveformSchema>;

export const CommitResultSchema = z.object({
  committed: z.number().int(),
  discarded: z.number().int(),
  index: z.string(),
});

export type CommitResult = z.infer<typeof CommitResultSchema>;

export const DISCARD_REASONS = [
  "bad_quality",
  "over_10000ft",
  "speech_privacy",
  "mislabeled",
] as const;

export type DiscardReason = (typeof DISCARD_REASONS)[number];

export type VerdictAction =
  | { status: "accepted" }
  | { status: "trimmed"; trim_start_s: number; trim_end_s: number }
  | { status: "discarded"; reason: DiscardReason };

/** The wire shape POSTed to /verdict. */
export interface VerdictPayload {
  filename: string;
  status: string;
  trim_start_s?: number;
  trim_end_s?: number;
  reason?: string;
}
