import type { DemoSession, Meta, RerankRequest, RerankResponse } from "./types.js";

export class ApiError extends Error {
    constructor(public status: number, message: string) {
        super(message);
        this.name = "ApiError";
    }
}

async function errorFrom(res: Response): Promise<ApiError> {
    let message = `HTTP ${res.status}`;
    try {
        const body = await res.json();
        if (body && typeof body.error === "string") message = body.error;
    } catch {
        // non-JSON error body; keep the status line
    }
    return new ApiError(res.status, message);
}

export async function fetchMeta(base: string): Promise<Meta> {
    const res = await fetch(`${base}/meta`);
    if (!res.ok) throw await errorFrom(res);
    return res.json();
}

export async function postRerank(
    base: string, body: RerankRequest): Promise<RerankResponse> {
    const res = await fetch(`${base}/rerank`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
    });
    if (!res.ok) throw await errorFrom(res);
    return res.json();
}

export async function fetchSessions(url: string): Promise<DemoSession[]> {
    const res = await fetch(url);
    if (!res.ok) throw await errorFrom(res);
    return res.json();
}
