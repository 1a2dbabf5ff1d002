/** Typed client for the scoring service HTTP API. */

export interface PendingItem {
  melody_id: string;
  abc_text: string;
  score_count: number;
}

export interface SubmitResponse {
  melody_id: string;
  score_count: number;
  mean_score: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ScoringApi {
  constructor(private readonly baseUrl: string = "") {}

  async fetchPending(limit: number): Promise<PendingItem[]> {
    const res = await fetch(`${this.baseUrl}/api/pending?limit=${limit}`);
    if (!res.ok) {
      throw new ApiError(res.status, `pending request failed (${res.status})`);
    }
    return (await res.json()) as PendingItem[];
  }

  async submitScore(melodyId: string, score: number): Promise<SubmitResponse> {
    const res = await fetch(`${this.baseUrl}/api/scores`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ melody_id: melodyId, score }),
    });
    if (!res.ok) {
      throw new ApiError(res.status, `score submission failed (${res.status})`);
    }
    return (await res.json()) as SubmitResponse;
  }
}
