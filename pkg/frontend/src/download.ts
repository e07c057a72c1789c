// Browser file download for the recommended URL list.

import type { RecommendationResponse } from './api.js';
import { urlListText } from './render.js';

export function downloadUrlList(rec: RecommendationResponse, filename = 'urls.txt'): void {
  const blob = new Blob([urlListText(rec)], { type: 'text/plain' });
  const href = URL.createObjectURL(blob);
  const a = document.createElement('a');
  a.href = href;
  a.download = filename;
  document.body.appendChild(a);
  a.click();
  a.remove();
  URL.revokeObjectURL(href);
}
