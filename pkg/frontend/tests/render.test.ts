import { readFileSync } from 'node:fs';
import { describe, expect, it } from 'vitest';

import type { DatasetView } from '../src/api.js';
import { errorBanner, registryTable, weightBars } from '../src/render.js';

describe('registry table', () => {
  it('reflects the live listing fixture exactly', () => {
    const raw = readFileSync(new URL('./fixtures/datasets.json', import.meta.url), 'utf-8');
    const datasets = (JSON.parse(raw) as { datasets: DatasetView[] }).datasets;
    const html = registryTable(datasets);
    for (const d of datasets) {
      expect(html).toContain(`<td>${d.dataset_id}</td>`);
      expect(html).toContain(`>${d.status}</td>`);
      expect(html).toContain(`<td>${d.num_items}</td>`);
      if (d.K !== null) expect(html).toContain(`<td>${d.K}</td>`);
      if (d.sizes) expect(html).toContain(d.sizes.join(', '));
    }
  });

  it('handles the empty registry', () => {
    expect(registryTable([])).toContain('no datasets registered');
  });
});

describe('weight bars', () => {
  it('scales bars relative to the largest weight', () => {
    const html = weightBars([
      { expert: 0, w: 0.75, size: 10 },
      { expert: 1, w: 0.25, size: 30 },
    ]);
    expect(html).toContain('width:100.00%');
    expect(html).toContain('width:33.33%');
    expect(html).toContain('<span class="bar-value">0.75</span>');
    expect(html).toContain('|S|=30');
  });
});

describe('error banner', () => {
  it('escapes markup in server messages', () => {
    const html = errorBanner('bad', '<script>alert(1)</script>');
    expect(html).not.toContain('<script>');
    expect(html).toContain('&lt;script&gt;');
    expect(html).toContain('role="alert"');
  });
});
