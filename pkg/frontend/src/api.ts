/** Typed client for the /v1 render service. */

export interface RenderResponseBody {
  scene: string;
  reconstructed_wireframe: string;
  latency_ms: number;
  model_version: string;
}

export interface HealthBody {
  status: string;
  version: string;
  model: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function detailOf(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body?.detail === "string") return body.detail;
    return JSON.stringify(body?.detail ?? body);
  } catch {
    return response.statusText;
  }
}

export class ServiceClient {
  constructor(
    private base: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  async health(): Promise<HealthBody> {
    const r = await this.fetchFn(`${this.base}/v1/health`);
    if (!r.ok) throw new ApiError(r.status, await detailOf(r));
    return r.json();
  }

  async render(
    wireframe: unknown,
    histogram: number[][] | null,
  ): Promise<RenderResponseBody> {
    const body: Record<string, unknown> = { wireframe };
    if (histogram) body.histogram = histogram;
    const r = await this.fetchFn(`${this.base}/v1/render`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!r.ok) throw new ApiError(r.status, await detailOf(r));
    return r.json();
  }

  async histogram(file: Blob, name = "reference.png"): Promise<number[][]> {
    const form = new FormData();
    form.append("image", file, name);
    const r = await this.fetchFn(`${this.base}/v1/histogram`, {
      method: "POST",
      body: form,
    });
    if (!r.ok) throw new ApiError(r.status, await detailOf(r));
    const body = await r.json();
    return body.histogram as number[][];
  }
}
