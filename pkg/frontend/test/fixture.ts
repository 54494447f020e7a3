import { FetchLike } from "../src/api";
import { DISCARD_REASONS, VerdictPayload } from "../src/types";

const SAMPLE_RATE = 22050;
const BINS_PER_SECOND = 100;

interface Recording {
  filename: string;
  klass: 0 | 1;
  hex_id: string;
  altitude_ft: number | null;
  date: string;
  time: string;
  location_id: number;
  mic_id: number;
  duration_s: number;
}

export interface IndexRow {
  filename: string;
  duration_s: number;
}

function pad(n: number): string {
  return String(n).padStart(2, "0");
}

function makeRecording(i: number): Recording {
  const aircraft = i >= 5;
  const minute = 10 * i;
  const hh = pad(12 + Math.floor(minute / 60));
  const mm = pad(minute % 60);
  const hex = aircraft ? `7C7CD${i - 5}` : "000000";
  return {
    filename: `${hex}_2023-05-09_${hh}-${mm}-00_2_1.wav`,
    klass: aircraft ? 1 : 0,
    hex_id: hex,
    // one clip above the altitude ceiling to exercise the suggestion
    altitude_ft: aircraft ? (i === 9 ? 11000 : 3000) : null,
    date: "2023-05-09",
    time: `${hh}:${mm}:00`,
    location_id: 2,
    mic_id: 1,
    duration_s: aircraft ? 60 : 10,
  };
}

function wavBytes(durationS: number): Uint8Array {
  // header-shaped placeholder: 44 bytes + 2 bytes per sample
  const bytes = new Uint8Array(44 + 2 * Math.round(durationS * SAMPLE_RATE));
  bytes.set([0x52, 0x49, 0x46, 0x46], 0); // RIFF
  bytes.set([0x57, 0x41, 0x56, 0x45], 8); // WAVE
  for (let i = 44; i < bytes.length; i++) {
    bytes[i] = i % 251;
  }
  return bytes;
}

/**
 * In-memory stand-in for the review service: ten recordings, the same
 * journal/commit semantics and the same 404/422 rules, exposed as a
 * fetch-compatible function for the client under test.
 */
export class FixtureService {
  recordings = new Map<string, Recording>();
  audio = new Map<string, Uint8Array>();
  journal: VerdictPayload[] = [];
  index: IndexRow[] = [];
  commits = 0;

  constructor(taskCount = 10) {
    for (let i = 0; i < taskCount; i++) {
      const rec = makeRecording(i);
      this.recordings.set(rec.filename, rec);
      this.audio.set(rec.filename, wavBytes(rec.duration_s));
    }
  }

  private latestVerdicts(): Map<string, VerdictPayload> {
    const latest = new Map<string, VerdictPayload>();
    for (const v of this.journal) {
      latest.set(v.filename, v);
    }
    return latest;
  }

  fetch: FetchLike = async (url, init) => {
    const path = new URL(url, "http://fixture").pathname;
    const headers = new Headers(init?.headers);

    if (path === "/tasks") {
      const reviewed = this.latestVerdicts();
      const tasks = [...this.recordings.keys()]
        .sort()
        .filter((name) => !reviewed.has(name))
        .map((name) => {
          const rec = this.recordings.get(name) as Recording;
          return {
            filename: rec.filename,
            class: rec.klass,
            hex_id: rec.hex_id,
            altitude_ft: rec.altitude_ft,
            date: rec.date,
            time: rec.time,
            location_id: rec.location_id,
            mic_id: rec.mic_id,
            duration_s: rec.duration_s,
            status: "pending",
            trim_start_s: null,
            trim_end_s: null,
            reason: null,
            audio_url: `/audio/${rec.filename}`,
          };
        });
      return Response.json({ tasks });
    }

    if (path.startsWith("/audio/")) {
      const name = path.slice("/audio/".length);
      const data = this.audio.get(name);
      if (!data) {
        return Response.json({ detail: "unknown file" }, { status: 404 });
      }
      const range = headers.get("range");
      if (range && range.startsWith("bytes=")) {
        const [startStr, endStr] = range.slice(6).split("-");
        const start = startStr ? parseInt(startStr, 10) : 0;
        const end = endStr ? Math.min(parseInt(endStr, 10), data.length - 1)
                           : data.length - 1;
        if (start > end) {
          return Response.json({ detail: "bad range" }, { status: 416 });
        }
        return new Response(data.slice(start, end + 1), {
          status: 206,
          headers: {
            "Content-Range": `bytes ${start}-${end}/${data.length}`,
          },
        });
      }
      return new Response(data.slice(), { status: 200 });
    }

    if (path.startsWith("/waveform/")) {
      const name = path.slice("/waveform/".length);
      const rec = this.recordings.get(name);
      if (!rec) {
        return Response.json({ detail: "unknown file" }, { status: 404 });
      }
      const nBins = Math.ceil(rec.duration_s * BINS_PER_SECOND);
      const bins = Array.from({ length: nBins }, (_, i) =>
        Math.round(Math.abs(Math.sin(i / 7)) * 1e4) / 1e4
      );
      return Response.json({ bins_per_second: BINS_PER_SECOND, bins });
    }

    if (path === "/verdict" && init?.method === "POST") {
      const v = JSON.parse(String(init.body)) as VerdictPayload;
      const rec = this.recordings.get(v.filename);
      if (!rec) {
        return Response.json({ detail: "unknown file" }, { status: 404 });
      }
      if (!["accepted", "trimmed", "discarded"].includes(v.status)) {
        return Response.json({ detail: "bad status" }, { status: 422 });
      }
      if (v.status === "trimmed") {
        const { trim_start_s, trim_end_s } = v;
        const bad =
          trim_start_s === undefined ||
          trim_end_s === undefined ||
          !(trim_start_s >= 0 &&
            trim_start_s < trim_end_s &&
            trim_end_s <= rec.duration_s);
        if (bad) {
          return Response.json(
            { detail: "invalid trim range" },
            { status: 422 }
          );
        }
      }
      if (
        v.status === "discarded" &&
        !DISCARD_REASONS.includes(v.reason as never)
      ) {
        return Response.json(
          { detail: "discard needs a valid reason" },
          { status: 422 }
        );
      }
      this.journal.push(v);
      return Response.json({ ok: true });
    }

    if (path === "/commit" && init?.method === "POST") {
      this.commits += 1;
      const latest = this.latestVerdicts();
      let committed = 0;
      let discarded = 0;
      this.index = [];
      for (const name of [...this.recordings.keys()].sort()) {
        const verdict = latest.get(name);
        if (!verdict) {
          continue;
        }
        if (verdict.status === "discarded") {
          discarded += 1;
          continue;
        }
        const rec = this.recordings.get(name) as Recording;
        const duration =
          verdict.status === "trimmed"
            ? (verdict.trim_end_s as number) - (verdict.trim_start_s as number)
            : rec.duration_s;
        this.index.push({ filename: name, duration_s: duration });
        committed += 1;
      }
      return Response.json({ committed, discarded, index: "curated/index.csv" });
    }

    return Response.json({ detail: "no route" }, { status: 404 });
  };
}
