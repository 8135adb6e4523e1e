import { vi } from "vitest";
import type { DemoSession, Meta, RerankResponse } from "../src/types.js";

export const META: Meta = {
    utilities: ["click", "cold_boost", "prio_order", "cat_div"],
    w_max: [1.0, 0.8, 0.5, 0.5],
    kinds: ["engagement", "strict", "ordering", "diversity"],
    n: 3,
    m: 6,
    d_item: 8,
    d_user: 8,
    bundle: "c0ffee00c0ffee00c0ffee00c0ffee00",
};

function item(id: number, overrides: Partial<DemoSession["candidates"][0]> = {}) {
    return {
        id,
        features: [0.1 * id, -0.2, 0.3, 0, 0, 0, 0, 1],
        seller: id % 3,
        category: id % 4,
        ctype: ["text", "video", "image"][id % 3],
        cold: id % 5 === 0,
        new: id % 4 === 0,
        ...overrides,
    };
}

export const SESSIONS: DemoSession[] = [0, 1].map((s) => ({
    user: { features: [s, 0.5, -0.5, 0, 0, 0, 0, 1] },
    candidates: [0, 1, 2, 3, 4, 5].map((i) => item(10 * s + i)),
}));

export function rerankResponse(
    overrides: Partial<RerankResponse> = {}): RerankResponse {
    return {
        items: [2, 0, 4],
        probs: [0.41, 0.33, 0.52],
        utilities: { click: 0.21, cold_boost: -0.5, prio_order: 0.63,
                     cat_div: 0.87 },
        bundle: META.bundle,
        latency_ms: 7.5,
        ...overrides,
    };
}

function jsonResponse(status: number, body: unknown): Response {
    return {
        ok: status >= 200 && status < 300,
        status,
        json: async () => body,
    } as unknown as Response;
}

export interface FetchLog {
    rerankBodies: Array<Record<string, unknown>>;
}

/** Install a fetch mock serving /meta, demo sessions, and /rerank.
 *  `rerank` may be a fixed response, a status/error pair, or a function
 *  of the parsed request body (call index as second argument). */
export function installFetch(options: {
    meta?: Meta | { status: number; error: string };
    sessions?: DemoSession[];
    rerank?: RerankResponse
        | { status: number; error: string }
        | ((body: Record<string, unknown>, call: number) => RerankResponse
            | { status: number; error: string }
            | Promise<RerankResponse>);
} = {}): FetchLog {
    const log: FetchLog = { rerankBodies: [] };
    const mock = vi.fn(async (url: unknown, init?: RequestInit) => {
        const u = String(url);
        if (u.endsWith("/meta")) {
            const m = options.meta ?? META;
            if ("status" in m && "error" in m) {
                return jsonResponse(m.status as number, { error: m.error });
            }
            return jsonResponse(200, m);
        }
        if (u.endsWith("demo_sessions.json")) {
            return jsonResponse(200, options.sessions ?? SESSIONS);
        }
        if (u.endsWith("/rerank")) {
            const body = JSON.parse(String(init?.body ?? "{}"));
            log.rerankBodies.push(body);
            let r = options.rerank ?? rerankResponse();
            if (typeof r === "function") {
                r = await r(body, log.rerankBodies.length);
            }
            if ("status" in r && "error" in r) {
                return jsonResponse(r.status as number, { error: r.error });
            }
            return jsonResponse(200, r);
        }
        throw new Error(`unexpected fetch ${u}`);
    });
    vi.stubGlobal("fetch", mock);
    return log;
}
