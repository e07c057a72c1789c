// Session state for one console tab. Derivable purely from server responses
// plus user inputs; invariants (temperature > 0, budget >= 1) are enforced
// on every update so sliders can never submit an invalid request.

import type { AccuracyReport, RecommendationResponse } from './api.js';

// What-if exploration always uses this seed so sliding is stable; the final
// download re-requests with the user's own seed.
export const PREVIEW_SEED = 777;

export interface SessionState {
  selectedDatasets: string[];
  report: AccuracyReport | null;
  budget: number;
  temperature: number;
  latest: RecommendationResponse | null;
}

export function initialState(): SessionState {
  return {
    selectedDatasets: [],
    report: null,
    budget: 100,
    temperature: 0.1,
    latest: null,
  };
}

export function setBudget(state: SessionState, budget: number): SessionState {
  return { ...state, budget: Math.max(1, Math.round(budget)) };
}

export function setTemperature(state: SessionState, temperature: number): SessionState {
  const t = Number.isFinite(temperature) && temperature > 0 ? temperature : state.temperature;
  return { ...state, temperature: t };
}

export function setReport(state: SessionState, report: AccuracyReport): SessionState {
  return { ...state, report, latest: null };
}

export function setLatest(
  state: SessionState,
  latest: RecommendationResponse,
): SessionState {
  return { ...state, latest };
}

// Latest-wins gate for slider-driven requests: older in-flight requests are
// aborted, and a response is delivered only if no newer request was issued
// in the meantime.
export class LatestWins {
  private controller: AbortController | null = null;
  private ticket = 0;

  async issue<T>(run: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.controller?.abort();
    this.controller = new AbortController();
    const mine = ++this.ticket;
    try {
      const result = await run(this.controller.signal);
      return mine === this.ticket ? result : null;
    } catch (err) {
      if (err instanceof DOMException && err.name === 'AbortError') return null;
      if (mine !== this.ticket) return null;
      throw err;
    }
  }
}
