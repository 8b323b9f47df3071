// Thin typed client over the review-service endpoints.

import type {
  FailureMode,
  QueuePage,
  SampleDetail,
  Stats,
  Status,
  Verdict,
} from './types.js';

export type FetchFn = typeof fetch;

export interface ApiClient {
  fetchQueue(status?: Status | null, cursor?: string | null): Promise<QueuePage>;
  fetchSample(id: string): Promise<SampleDetail>;
  postDecision(
    id: string,
    verdict: Verdict,
    reviewer: string,
    failureMode: FailureMode | null,
  ): Promise<SampleDetail['decision']>;
  fetchStats(): Promise<Stats>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export function createClient(baseUrl = '', fetchFn: FetchFn = fetch): ApiClient {
  const get = <T>(path: string) =>
    fetchFn(`${baseUrl}${path}`).then((r) => asJson<T>(r));

  return {
    fetchQueue(status = null, cursor = null) {
      const params = new URLSearchParams();
      if (status) params.set('status', status);
      if (cursor) params.set('cursor', cursor);
      const query = params.toString();
      return get<QueuePage>(`/api/samples${query ? `?${query}` : ''}`);
    },

    fetchSample(id: string) {
      return get<SampleDetail>(`/api/samples/${encodeURIComponent(id)}`);
    },

    async postDecision(id, verdict, reviewer, failureMode) {
      const body: Record<string, unknown> = { verdict, reviewer };
      if (failureMode) body.failure_mode = failureMode;
      const response = await fetchFn(
        `${baseUrl}/api/samples/${encodeURIComponent(id)}/decision`,
        {
          method: 'POST',
          headers: { 'Content-Type': 'application/json' },
          body: JSON.stringify(body),
        },
      );
      const data = await asJson<{ decision: SampleDetail['decision'] }>(response);
      return data.decision;
    },

    fetchStats() {
      return get<Stats>('/api/stats');
    },
  };
}
