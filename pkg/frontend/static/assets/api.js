// Thin typed client over the review-service endpoints.
export class ApiError extends Error {
    constructor(status, detail) {
        super(`HTTP ${status}: ${detail}`);
        this.status = status;
        this.detail = detail;
    }
}
async function asJson(response) {
    if (!response.ok) {
        let detail = response.statusText;
        try {
            const body = (await response.json());
            if (body.detail)
                detail = body.detail;
        }
        catch {
            // keep the status text
        }
        throw new ApiError(response.status, detail);
    }
    return (await response.json());
}
export function createClient(baseUrl = '', fetchFn = fetch) {
    const get = (path) => fetchFn(`${baseUrl}${path}`).then((r) => asJson(r));
    return {
        fetchQueue(status = null, cursor = null) {
            const params = new URLSearchParams();
            if (status)
                params.set('status', status);
            if (cursor)
                params.set('cursor', cursor);
            const query = params.toString();
            return get(`/api/samples${query ? `?${query}` : ''}`);
        },
        fetchSample(id) {
            return get(`/api/samples/${encodeURIComponent(id)}`);
        },
        async postDecision(id, verdict, reviewer, failureMode) {
            const body = { verdict, reviewer };
            if (failureMode)
                body.failure_mode = failureMode;
            const response = await fetchFn(`${baseUrl}/api/samples/${encodeURIComponent(id)}/decision`, {
                method: 'POST',
                headers: { 'Content-Type': 'application/json' },
                body: JSON.stringify(body),
            });
            const data = await asJson(response);
            return data.decision;
        },
        fetchStats() {
            return get('/api/stats');
        },
    };
}
