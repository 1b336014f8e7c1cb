/** Thin fetch client for the review service wire API. */

import type {
  Action,
  DecisionRequest,
  ItemsPage,
  LabelSpaceDoc,
  ReviewItem,
  Stats,
  Status,
  WireBox,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

async function throwApiError(response: Response): Promise<never> {
  let detail = response.statusText || `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export interface ListOptions {
  status?: Status;
  offset?: number;
  limit?: number;
}

export class ReviewApi {
  readonly baseUrl: string;

  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.baseUrl + path);
    if (!response.ok) await throwApiError(response);
    return (await response.json()) as T;
  }

  async listItems(options: ListOptions = {}): Promise<ItemsPage> {
    const params = new URLSearchParams();
    if (options.status !== undefined) params.set("status", options.status);
    if (options.offset !== undefined) params.set("offset", String(options.offset));
    if (options.limit !== undefined) params.set("limit", String(options.limit));
    const query = params.toString();
    return this.getJson<ItemsPage>(`/api/items${query ? "?" + query : ""}`);
  }

  async getItem(itemId: string): Promise<ReviewItem> {
    return this.getJson<ReviewItem>(`/api/items/${encodeURIComponent(itemId)}`);
  }

  async decide(
    itemId: string,
    action: Action,
    extras: { actor?: string; category_id?: number; bbox?: WireBox } = {},
  ): Promise<ReviewItem> {
    const body: DecisionRequest = { action, ...extras };
    const response = await fetch(
      `${this.baseUrl}/api/items/${encodeURIComponent(itemId)}/decision`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (!response.ok) await throwApiError(response);
    return (await response.json()) as ReviewItem;
  }

  async labelspace(): Promise<LabelSpaceDoc> {
    return this.getJson<LabelSpaceDoc>("/api/labelspace");
  }

  async stats(): Promise<Stats> {
    return this.getJson<Stats>("/api/stats");
  }

  imageUrl(dataset: string, imageId: string): string {
    return `${this.baseUrl}/api/images/${encodeURIComponent(dataset)}/${encodeURIComponent(imageId)}`;
  }
}
