// Pure HTML-string renderers. Every number that appears in the output is a
// field taken verbatim from a server response (formatted with String(), the
// same shortest representation JSON uses), so the rendered text can be
// compared byte-for-byte against the normalized response.

import type { DatasetView, RecommendationResponse, WeightRow } from './api.js';

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function num(value: number): string {
  return String(value);
}

export function registryTable(datasets: DatasetView[]): string {
  if (datasets.length === 0) {
    return '<p class="empty">no datasets registered yet</p>';
  }
  const rows = datasets
    .map((d) => {
      const sizes = d.sizes ? d.sizes.map(num).join(', ') : '—';
      return (
        `<tr data-id="${escapeHtml(d.dataset_id)}">` +
        `<td>${escapeHtml(d.dataset_id)}</td>` +
        `<td class="status status-${escapeHtml(d.status)}">${escapeHtml(d.status)}</td>` +
        `<td>${num(d.num_items)}</td>` +
        `<td>${d.K === null ? '—' : num(d.K)}</td>` +
        `<td>${sizes}</td>` +
        `</tr>`
      );
    })
    .join('');
  return (
    '<table class="registry"><thead><tr>' +
    '<th>dataset</th><th>status</th><th>items</th><th>K</th><th>subset sizes</th>' +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function weightBars(weights: WeightRow[]): string {
  const maxW = Math.max(...weights.map((r) => r.w), 1e-12);
  const rows = weights
    .map((r) => {
      const pct = (100 * r.w) / maxW;
      return (
        `<div class="bar-row" data-expert="${num(r.expert)}">` +
        `<span class="bar-label">expert ${num(r.expert)}</span>` +
        `<span class="bar"><span class="bar-fill" style="width:${pct.toFixed(2)}%"></span></span>` +
        `<span class="bar-value">${num(r.w)}</span>` +
        `<span class="bar-size">|S|=${num(r.size)}</span>` +
        `</div>`
      );
    })
    .join('');
  return `<div class="weight-bars">${rows}</div>`;
}

export function whatifSummary(rec: RecommendationResponse): string {
  return (
    '<dl class="summary">' +
    `<dt>items in list</dt><dd id="item-count">${num(rec.items.length)}</dd>` +
    `<dt>budget</dt><dd id="summary-budget">${num(rec.budget)}</dd>` +
    `<dt>seed</dt><dd id="summary-seed">${num(rec.seed)}</dd>` +
    `<dt>padded</dt><dd id="summary-padded">${rec.flags.padded}</dd>` +
    '</dl>'
  );
}

export function whatifPanel(rec: RecommendationResponse): string {
  return whatifSummary(rec) + weightBars(rec.weights);
}

export function errorBanner(code: string, message: string): string {
  return `<div class="banner error" role="alert"><strong>${escapeHtml(code)}</strong>: ${escapeHtml(message)}</div>`;
}

// Plain-text export, one URL per line with a trailing newline — identical
// to the command-line client's urls.txt.
export function urlListText(rec: RecommendationResponse): string {
  return rec.items.map((it) => it.url + '\n').join('');
}
