// Console session state: serialized slider commits and demonstration capture.
//
// The displayed biases are only ever taken from server responses, so the UI
// can never show a tuple the server did not confirm.  At most one adjust
// request is in flight; commits issued while one is pending collapse to the
// latest pending slider values.

import { ApiError, Biases, BiasBenchClient, Observation } from "./api.js";

export interface PendingThresholds {
  diff_off: number;
  diff_on: number;
}

export interface ConsoleState {
  sessionId: string | null;
  sceneId: string | null;
  biases: Biases | null;
  frameUrl: string | null;
  eventRate: number | null;
  windowEvents: number | null;
  cachedMetrics: Record<string, number | boolean>;
  demoCount: number;
  pending: PendingThresholds | null;
  lastCommittedDelta: { delta_off: number; delta_on: number } | null;
  error: string | null;
  busy: boolean;
}

export function snapToAxis(value: number, axis: number[]): number {
  // nearest axis value; midpoint ties go to the smaller one
  let best = axis[0] ?? 0;
  let bestDist = Math.abs(value - best);
  for (const v of axis.slice(1)) {
    const d = Math.abs(value - v);
    if (d < bestDist) {
      best = v;
      bestDist = d;
    }
  }
  return best;
}

export class ConsoleSession {
  state: ConsoleState = {
    sessionId: null,
    sceneId: null,
    biases: null,
    frameUrl: null,
    eventRate: null,
    windowEvents: null,
    cachedMetrics: {},
    demoCount: 0,
    pending: null,
    lastCommittedDelta: null,
    error: null,
    busy: false,
  };
  grid: Record<string, number[]> = {};
  private inflight: Promise<void> | null = null;
  private queued: PendingThresholds | null = null;
  private listeners: Array<(s: ConsoleState) => void> = [];

  constructor(private client: BiasBenchClient) {}

  onChange(fn: (s: ConsoleState) => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  private applyObservation(obs: Observation): void {
    this.state.sessionId = obs.session_id;
    this.state.biases = obs.biases;
    this.state.frameUrl = this.client.frameUrl(obs.frame_url);
    this.state.eventRate = obs.event_rate;
    this.state.windowEvents = obs.window_events;
    this.state.cachedMetrics = obs.cached_metrics;
    this.state.error = null;
    this.emit();
  }

  async start(sceneId: string, start: Partial<Biases>, seed = 0): Promise<void> {
    const scenes = await this.client.scenes();
    const info = scenes[sceneId];
    if (!info) throw new ApiError(404, `scene ${sceneId} not served`);
    this.grid = info.grid;
    const obs = await this.client.createSession(sceneId, start, seed);
    this.state.sceneId = sceneId;
    this.state.demoCount = obs.demo_count;
    this.applyObservation(obs);
  }

  /** Client-side snap of raw slider positions to the advertised grid. */
  snapPending(raw: PendingThresholds): PendingThresholds {
    return {
      diff_off: snapToAxis(raw.diff_off, this.grid["diff_off"] ?? [raw.diff_off]),
      diff_on: snapToAxis(raw.diff_on, this.grid["diff_on"] ?? [raw.diff_on]),
    };
  }

  /**
   * Commit slider values: sends deltas relative to the confirmed biases.
   * Commits during an in-flight request collapse to the newest values.
   */
  commit(pending: PendingThresholds): Promise<void> {
    this.state.pending = pending;
    this.emit();
    if (this.inflight) {
      this.queued = pending;
      return this.inflight;
    }
    this.inflight = this.runCommit(pending).finally(() => {
      this.inflight = null;
      const next = this.queued;
      this.queued = null;
      if (next) void this.commit(next);
    });
    return this.inflight;
  }

  private async runCommit(pending: PendingThresholds): Promise<void> {
    const current = this.state.biases;
    const sid = this.state.sessionId;
    if (!current || !sid) throw new Error("no active session");
    const deltaOff = pending.diff_off - current.diff_off;
    const deltaOn = pending.diff_on - current.diff_on;
    this.state.busy = true;
    this.emit();
    try {
      const obs = await this.client.adjust(sid, deltaOff, deltaOn);
      this.state.lastCommittedDelta = { delta_off: deltaOff, delta_on: deltaOn };
      this.applyObservation(obs);
    } catch (err) {
      // surface the failure; confirmed state stays untouched
      this.state.error = err instanceof Error ? err.message : String(err);
    } finally {
      this.state.busy = false;
      this.state.pending = null;
      this.emit();
    }
  }

  /** Resolves once no commit is in flight or queued. */
  idle(): Promise<void> {
    const current = this.inflight;
    if (!current) return Promise.resolve();
    return current.then(() => this.idle());
  }

  /** Refresh the frame without changing biases (zero-delta adjust). */
  refresh(): Promise<void> {
    const b = this.state.biases;
    if (!b) return Promise.resolve();
    return this.commit({ diff_off: b.diff_off, diff_on: b.diff_on });
  }

  /**
   * Record a demonstration at the current state: either "this is optimal"
   * (zero action) or "the change I just committed was the right move".
   */
  async recordDemo(mode: "mark_optimal" | "record_delta"): Promise<void> {
    const sid = this.state.sessionId;
    if (!sid) throw new Error("no active session");
    let payload: { action?: number[]; mark_optimal?: boolean };
    if (mode === "mark_optimal") {
      payload = { mark_optimal: true };
    } else {
      const d = this.state.lastCommittedDelta;
      if (!d) {
        this.state.error = "no committed change to record";
        this.emit();
        return;
      }
      payload = { action: [d.delta_off, d.delta_on, 0, 0, 0] };
    }
    try {
      const res = await this.client.recordDemo(sid, payload);
      this.state.demoCount = res.demo_count;
      this.state.error = null;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
    }
    this.emit();
  }
}
