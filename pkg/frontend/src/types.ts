export interface Meta {
    utilities: string[];
    w_max: number[];
    kinds: string[];
    n: number;
    m: number;
    d_item: number;
    d_user: number;
    bundle: string;
}

export interface Item {
    id: number;
    features: number[];
    seller: number;
    category: number;
    ctype: string;
    cold: boolean;
    new: boolean;
}

export interface DemoSession {
    user: { features: number[] };
    candidates: Item[];
}

export interface RerankRequest {
    user: { features: number[] };
    candidates: Item[];
    weights: Record<string, number>;
    mode: "greedy" | "sample";
    seed?: number;
    constraints?: Record<string, number>;
}

export interface RerankResponse {
    items: number[];
    probs: number[];
    utilities: Record<string, number>;
    bundle: string;
    latency_ms: number;
}

/** One completed request, as plotted in the trade-off scatter. */
export interface HistoryPoint {
    w: number[];
    utilities: Record<string, number>;
}
