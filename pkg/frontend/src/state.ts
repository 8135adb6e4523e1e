import type { DemoSession, HistoryPoint, Meta, RerankRequest } from "./types.js";

export interface PanelState {
    meta: Meta;
    sessions: DemoSession[];
    sessionIndex: number;
    /** Slider values, in /meta utility order. */
    weights: number[];
    mode: "greedy" | "sample";
    seed: number;
    /** Completed (w, utilities) points; reset when the session changes. */
    history: HistoryPoint[];
}

export function initState(meta: Meta, sessions: DemoSession[]): PanelState {
    return {
        meta,
        sessions,
        sessionIndex: 0,
        // start every slider at half its cap, mirroring the offline
        // evaluation default
        weights: meta.w_max.map((cap) => cap / 2),
        mode: "greedy",
        seed: 0,
        history: [],
    };
}

/** Clamp into [0, cap]; sliders are the only writer of weights. */
export function setWeight(state: PanelState, i: number, value: number): void {
    const cap = state.meta.w_max[i];
    state.weights[i] = Math.min(Math.max(value, 0), cap);
}

export function selectSession(state: PanelState, index: number): void {
    if (index < 0 || index >= state.sessions.length) {
        throw new Error(`no session ${index}`);
    }
    state.sessionIndex = index;
    state.history = [];
}

/** Request body for the current state; weights map to slider values
 *  verbatim (identity, no rescaling). */
export function buildRequest(state: PanelState): RerankRequest {
    const session = state.sessions[state.sessionIndex];
    const weights: Record<string, number> = {};
    state.meta.utilities.forEach((name, i) => {
        weights[name] = state.weights[i];
    });
    const body: RerankRequest = {
        user: session.user,
        candidates: session.candidates,
        weights,
        mode: state.mode,
    };
    if (state.mode === "sample") body.seed = state.seed;
    return body;
}

export function recordResult(
    state: PanelState, w: number[],
    utilities: Record<string, number>): void {
    state.history.push({ w: [...w], utilities: { ...utilities } });
}
