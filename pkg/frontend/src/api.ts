/**
 * Typed client for the verification service. All stroke data leaves the
 * page through these three POSTs and nowhere else.
 */

export interface CreateUserResponse {
  user_id: string;
  password: string[];
  enroll_count: number;
}

export interface EnrollResponse {
  label: string;
  remaining: number;
  enrollment_complete: boolean;
}

export interface CharacterScore {
  label: string;
  score: number;
}

export interface VerifyResponse {
  user_id: string;
  per_character_scores: CharacterScore[];
  fused_score: number;
  threshold: number;
  decision: "accept" | "reject";
}

export interface CalibrationInfo {
  threshold: number;
  eer: number;
  far: number;
  frr: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function post<T>(url: string, body: unknown): Promise<T> {
  const resp = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!resp.ok) {
    const payload = await resp.json().catch(() => ({}));
    throw new ApiError(resp.status, payload.detail ?? resp.statusText);
  }
  return resp.json() as Promise<T>;
}

export class ServiceClient {
  constructor(private readonly base: string = "") {}

  createUser(userId: string, password: string[]): Promise<CreateUserResponse> {
    return post(`${this.base}/api/users`, { user_id: userId, password });
  }

  enroll(
    userId: string,
    label: string,
    strokes: number[][][],
  ): Promise<EnrollResponse> {
    return post(`${this.base}/api/users/${encodeURIComponent(userId)}/enroll`, {
      label,
      strokes,
    });
  }

  verify(
    userId: string,
    attempts: { label: string; strokes: number[][][] }[],
    threshold?: number,
  ): Promise<VerifyResponse> {
    const body: Record<string, unknown> = { user_id: userId, attempts };
    if (threshold !== undefined) body.threshold = threshold;
    return post(`${this.base}/api/verify`, body);
  }

  async calibration(): Promise<CalibrationInfo | null> {
    const resp = await fetch(`${this.base}/api/calibration`);
    if (resp.status === 404) return null;
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return resp.json() as Promise<CalibrationInfo>;
  }
}

/**
 * Re-evaluate a verify result against a different threshold without
 * another round trip; the server fuses by summing character scores, so
 * the slider only needs the returned scores.
 */
export function localDecision(
  scores: CharacterScore[],
  threshold: number,
): { fused: number; decision: "accept" | "reject" } {
  const fused = scores.reduce((acc, s) => acc + s.score, 0);
  return { fused, decision: fused >= threshold ? "accept" : "reject" };
}
