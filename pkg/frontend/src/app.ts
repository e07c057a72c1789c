// Console wiring: registry panel with auto-refresh while builds run, report
// upload, live what-if sliders (latest-wins), and the final download.

import { ApiClient, ApiError, parseReportFile } from './api.js';
import { downloadUrlList } from './download.js';
import { errorBanner, registryTable, whatifPanel } from './render.js';
import {
  LatestWins,
  PREVIEW_SEED,
  initialState,
  setBudget,
  setLatest,
  setReport,
  setTemperature,
  type SessionState,
} from './state.js';

const REGISTRY_POLL_MS = 2000;

export function startApp(root: Document = document, api = new ApiClient('')): void {
  let state: SessionState = initialState();
  const gate = new LatestWins();

  const registryEl = root.getElementById('registry')!;
  const whatifEl = root.getElementById('whatif')!;
  const bannerEl = root.getElementById('banner')!;
  const reportInput = root.getElementById('report-file') as HTMLInputElement;
  const budgetInput = root.getElementById('budget') as HTMLInputElement;
  const budgetLabel = root.getElementById('budget-label')!;
  const tempInput = root.getElementById('temperature') as HTMLInputElement;
  const tempLabel = root.getElementById('temperature-label')!;
  const seedInput = root.getElementById('seed') as HTMLInputElement;
  const downloadBtn = root.getElementById('download') as HTMLButtonElement;

  function showError(code: string, message: string): void {
    bannerEl.innerHTML = errorBanner(code, message);
  }

  function clearError(): void {
    bannerEl.innerHTML = '';
  }

  async function refreshRegistry(): Promise<void> {
    try {
      const datasets = await api.listDatasets();
      registryEl.innerHTML = registryTable(datasets);
      const building = datasets.some((d) => d.status === 'building' || d.status === 'registered');
      if (building) {
        setTimeout(refreshRegistry, REGISTRY_POLL_MS);
      }
    } catch (err) {
      showError('registry', err instanceof Error ? err.message : String(err));
    }
  }

  async function refreshWhatif(): Promise<void> {
    if (!state.report) return;
    const report = state.report;
    const { budget, temperature } = state;
    const rec = await gate
      .issue((signal) => api.recommend(report, budget, temperature, PREVIEW_SEED, signal))
      .catch((err) => {
        if (err instanceof ApiError) {
          showError(err.code, err.message);
        } else {
          showError('network', err instanceof Error ? err.message : String(err));
        }
        return null;
      });
    if (rec === null) return; // aborted, superseded, or failed
    clearError();
    state = setLatest(state, rec);
    whatifEl.innerHTML = whatifPanel(rec);
    downloadBtn.disabled = false;
  }

  reportInput.addEventListener('change', async () => {
    const file = reportInput.files?.[0];
    if (!file) return;
    try {
      state = setReport(state, parseReportFile(await file.text()));
      clearError();
      void refreshWhatif();
    } catch (err) {
      showError('invalid-report', err instanceof Error ? err.message : String(err));
    }
  });

  budgetInput.addEventListener('input', () => {
    state = setBudget(state, Number(budgetInput.value));
    budgetLabel.textContent = String(state.budget);
    void refreshWhatif();
  });

  tempInput.addEventListener('input', () => {
    state = setTemperature(state, Number(tempInput.value));
    tempLabel.textContent = String(state.temperature);
    void refreshWhatif();
  });

  downloadBtn.addEventListener('click', async () => {
    if (!state.report) return;
    const seed = Number(seedInput.value) || 0;
    try {
      // the preview seed is reserved for exploration; the download re-requests
      // with the user's seed so the saved list is theirs to reproduce
      const rec = await api.recommend(state.report, state.budget, state.temperature, seed);
      downloadUrlList(rec);
    } catch (err) {
      if (err instanceof ApiError) showError(err.code, err.message);
      else showError('network', err instanceof Error ? err.message : String(err));
    }
  });

  budgetLabel.textContent = String(state.budget);
  tempLabel.textContent = String(state.temperature);
  downloadBtn.disabled = true;
  void refreshRegistry();
}

declare global {
  interface Window {
    __datascoutStarted?: boolean;
  }
}

if (typeof window !== 'undefined' && typeof document !== 'undefined' && !window.__datascoutStarted) {
  window.__datascoutStarted = true;
  window.addEventListener('DOMContentLoaded', () => startApp());
}
