// HTTP client for the review service. One class per service instance;
// every mutation returns the server's copy of the affected record so the
// caller can reconcile optimistic state against it.

import type {
  Candidate,
  Granule,
  MonitoringSite,
  NotificationItem,
  QueueFilters,
  QueuePage,
  ReviewAction,
  Ring,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

/** 409: the candidate was reviewed elsewhere; refresh before retrying. */
export class ConflictError extends ApiError {
  constructor(detail: string) {
    super(409, detail);
    this.name = 'ConflictError';
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  private readonly fetchImpl: FetchLike;

  constructor(
    public readonly baseUrl: string,
    private readonly token?: string,
    fetchImpl?: FetchLike,
  ) {
    // bind lazily so a late-polyfilled global fetch still works
    this.fetchImpl = fetchImpl ?? ((url, init) => globalThis.fetch(url, init));
  }

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h['Content-Type'] = 'application/json';
    if (this.token) h['Authorization'] = `Bearer ${this.token}`;
    return h;
  }

  private async request<T>(
    method: 'GET' | 'POST',
    path: string,
    body?: unknown,
  ): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(body !== undefined),
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const doc = (await response.json()) as { detail?: unknown };
        if (doc.detail !== undefined) detail = JSON.stringify(doc.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      if (response.status === 409) throw new ConflictError(detail);
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async granules(): Promise<Granule[]> {
    const doc = await this.request<{ granules: Granule[] }>('GET', '/granules');
    return doc.granules;
  }

  async queue(filters: QueueFilters = {}): Promise<QueuePage> {
    const params = new URLSearchParams();
    if (filters.sensor) params.set('sensor', filters.sensor);
    if (filters.date_from) params.set('date_from', filters.date_from);
    if (filters.date_to) params.set('date_to', filters.date_to);
    if (filters.bbox) params.set('bbox', filters.bbox.join(','));
    if (filters.min_score !== undefined)
      params.set('min_score', String(filters.min_score));
    if (filters.page !== undefined) params.set('page', String(filters.page));
    if (filters.page_size !== undefined)
      params.set('page_size', String(filters.page_size));
    const qs = params.toString();
    return this.request<QueuePage>('GET', qs ? `/queue?${qs}` : '/queue');
  }

  async candidate(id: string): Promise<Candidate> {
    const doc = await this.request<{ candidate: Candidate }>(
      'GET',
      `/candidates/${encodeURIComponent(id)}`,
    );
    return doc.candidate;
  }

  async review(
    id: string,
    action: ReviewAction,
    options: { actor?: string; polygon?: Ring[] } = {},
  ): Promise<Candidate> {
    const doc = await this.request<{ candidate: Candidate }>(
      'POST',
      `/candidates/${encodeURIComponent(id)}/review`,
      {
        action,
        actor: options.actor ?? 'analyst',
        polygon: options.polygon ?? null,
      },
    );
    return doc.candidate;
  }

  async bulkDelete(granuleId: string, actor = 'analyst'): Promise<string[]> {
    const doc = await this.request<{ rejected: string[] }>(
      'POST',
      `/granules/${encodeURIComponent(granuleId)}/bulk-delete`,
      { actor },
    );
    return doc.rejected;
  }

  async createMonitoringSite(
    candidateId: string,
    square: [number, number, number, number],
    actor = 'analyst',
  ): Promise<MonitoringSite> {
    const doc = await this.request<{ site: MonitoringSite }>(
      'POST',
      '/monitoring-sites',
      { candidate_id: candidateId, square, actor },
    );
    return doc.site;
  }

  async monitoringSites(): Promise<MonitoringSite[]> {
    const doc = await this.request<{ sites: MonitoringSite[] }>(
      'GET',
      '/monitoring-sites',
    );
    return doc.sites;
  }

  async exportNotifications(): Promise<NotificationItem[]> {
    const doc = await this.request<{ notifications: NotificationItem[] }>(
      'GET',
      '/export/notifications',
    );
    return doc.notifications;
  }
}
