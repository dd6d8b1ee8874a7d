/** Thin client over the annotation service's /v1 endpoints. */
import type { AnnotationRecord, PoolPayload } from "./types.js";

export interface ApiConfig {
  baseUrl: string;
  annotatorId: string;
  token?: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

function headers(config: ApiConfig): Record<string, string> {
  const base: Record<string, string> = { "Content-Type": "application/json" };
  if (config.token) {
    base["X-Annotator-Token"] = config.token;
  }
  return base;
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, detail);
}

/** Lease the next pool; null means the queue is empty. */
export async function fetchNext(config: ApiConfig): Promise<PoolPayload | null> {
  const url = `${config.baseUrl}/v1/annotation/next?annotator_id=${encodeURIComponent(config.annotatorId)}`;
  const resp = await fetch(url, { headers: headers(config) });
  await raiseForStatus(resp);
  const body = (await resp.json()) as { pool: PoolPayload | null };
  return body.pool;
}

export async function submitAnnotation(
  config: ApiConfig,
  record: AnnotationRecord,
): Promise<void> {
  const resp = await fetch(`${config.baseUrl}/v1/annotation`, {
    method: "POST",
    headers: headers(config),
    body: JSON.stringify(record),
  });
  await raiseForStatus(resp);
}
