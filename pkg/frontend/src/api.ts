// Typed client for the server's /v1 JSON API. The console never computes
// weights or probabilities itself; everything it shows comes from these
// responses.

export interface DatasetView {
  dataset_id: string;
  name: string;
  status: string;
  num_items: number;
  feature_dim: number;
  checksum: string;
  K: number | null;
  sizes: number[] | null;
  scheme: string | null;
  expert_kind: string | null;
  error: string | null;
}

export interface AccuracyReport {
  dataset_ref: string;
  mode: string;
  z: number[];
  target_size: number;
  client_nonce: string;
}

export interface WeightRow {
  expert: number;
  dataset_id?: string;
  w: number;
  size: number;
}

export interface RecommendationResponse {
  dataset_ref: string;
  budget: number;
  seed: number;
  flags: { padded: boolean };
  items: { id: string; url: string }[];
  weights: WeightRow[];
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  try {
    const body = (await resp.json()) as { code?: string; message?: string };
    return new ApiError(body.code ?? 'error', body.message ?? resp.statusText, resp.status);
  } catch {
    return new ApiError('error', resp.statusText, resp.status);
  }
}

export class ApiClient {
  constructor(
    readonly base: string = '',
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async listDatasets(signal?: AbortSignal): Promise<DatasetView[]> {
    const resp = await this.fetchFn(`${this.base}/v1/datasets`, { signal });
    if (!resp.ok) throw await parseError(resp);
    const body = (await resp.json()) as { datasets: DatasetView[] };
    return body.datasets;
  }

  async recommend(
    report: AccuracyReport,
    budget: number,
    temperature: number,
    seed: number,
    signal?: AbortSignal,
  ): Promise<RecommendationResponse> {
    const resp = await this.fetchFn(`${this.base}/v1/recommendations`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ report, budget, temperature, seed }),
      signal,
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as RecommendationResponse;
  }
}

// Parse an uploaded report file, accepting only the wire schema: the five
// known fields and nothing else (in particular nothing item-level).
export function parseReportFile(text: string): AccuracyReport {
  const obj = JSON.parse(text) as Record<string, unknown>;
  const keys = Object.keys(obj).sort();
  const expected = ['client_nonce', 'dataset_ref', 'mode', 'target_size', 'z'];
  if (JSON.stringify(keys) !== JSON.stringify(expected)) {
    throw new Error(`report must have exactly the fields ${expected.join(', ')}`);
  }
  const z = obj.z as unknown[];
  if (!Array.isArray(z) || z.some((v) => typeof v !== 'number')) {
    throw new Error('report z must be an array of numbers');
  }
  return {
    dataset_ref: String(obj.dataset_ref),
    mode: String(obj.mode),
    z: z as number[],
    target_size: Number(obj.target_size),
    client_nonce: String(obj.client_nonce),
  };
}
