/** Thin typed client for the review endpoints. The fetch function is
 * injectable so tests can run without a server. */

import type {
  AnnotationSubmit,
  AssessmentSummary,
  ListFilter,
  SamplePage,
  SamplePayload,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function readError(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText;
  }
}

export class ReviewApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) throw new ApiError(response.status, await readError(response));
    return (await response.json()) as T;
  }

  listSamples(filter: ListFilter = {}): Promise<SamplePage> {
    const params = new URLSearchParams();
    if (filter.hop !== undefined) params.set("hop", String(filter.hop));
    if (filter.status) params.set("status", filter.status);
    if (filter.annotator) params.set("annotator", filter.annotator);
    if (filter.page) params.set("page", String(filter.page));
    if (filter.pageSize) params.set("page_size", String(filter.pageSize));
    const query = params.toString();
    return this.get<SamplePage>(`/samples${query ? `?${query}` : ""}`);
  }

  getSample(id: string): Promise<SamplePayload> {
    return this.get<SamplePayload>(`/samples/${encodeURIComponent(id)}`);
  }

  async submitAnnotation(annotation: AnnotationSubmit): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(annotation),
    });
    if (!response.ok) throw new ApiError(response.status, await readError(response));
  }

  getSummary(): Promise<AssessmentSummary> {
    return this.get<AssessmentSummary>("/summary");
  }
}
