/**
 * Typed client for the forecast service's /v1 JSON API.
 *
 * The UI computes nothing itself: every number it shows comes out of a
 * PredictResponse returned by this client.
 */

export interface AccountFields {
  friends_count?: number;
  followers_count?: number;
  listed_count?: number;
  favourites_count?: number;
  statuses_count?: number;
  geo_enabled?: boolean;
  verified?: boolean;
  contributors_enabled?: boolean;
  is_translator?: boolean;
  is_translation_enabled?: boolean;
  has_extended_profile?: boolean;
  default_profile?: boolean;
  default_profile_image?: boolean;
  following?: boolean;
  follow_request_sent?: boolean;
  notifications?: boolean;
  time_zone?: string;
}

export interface PredictRequest {
  draft_text: string;
  hashtags?: number;
  mentions?: number;
  urls?: number;
  account?: AccountFields;
}

export interface AttributionRow {
  feature: string;
  value: number;
  attribution: number;
}

export interface PredictResponse {
  predicted_abusive_replies: number;
  verdict_of_draft: string;
  top_attributions: AttributionRow[];
  attribution_base: number | null;
  model_id: string;
  stage: string;
}

export interface ModelInfo {
  model_id: string;
  kind: string;
  mask: string;
  stage: string;
}

export type ApiErrorKind = 'validation' | 'offline' | 'server';

export class ApiError extends Error {
  constructor(readonly kind: ApiErrorKind, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

async function errorMessage(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && body.error && typeof body.error.message === 'string') {
      return body.error.message;
    }
  } catch {
    // fall through to the generic message
  }
  return `service returned ${res.status}`;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  async predict(req: PredictRequest, signal?: AbortSignal): Promise<PredictResponse> {
    let res: Response;
    try {
      res = await this.fetchFn(`${this.baseUrl}/v1/predict`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(req),
        signal,
      });
    } catch (err) {
      if (err instanceof DOMException && err.name === 'AbortError') {
        throw err; // stale request cancelled on purpose; not a failure
      }
      throw new ApiError('offline', 'forecast service unreachable');
    }
    if (!res.ok) {
      const message = await errorMessage(res);
      throw new ApiError(res.status === 400 ? 'validation' : 'server', message);
    }
    return (await res.json()) as PredictResponse;
  }

  async modelInfo(): Promise<ModelInfo> {
    let res: Response;
    try {
      res = await this.fetchFn(`${this.baseUrl}/v1/model`, { method: 'GET' });
    } catch {
      throw new ApiError('offline', 'forecast service unreachable');
    }
    if (!res.ok) {
      throw new ApiError('server', await errorMessage(res));
    }
    return (await res.json()) as ModelInfo;
  }
}
