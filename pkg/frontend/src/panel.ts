import { ApiError, fetchMeta, fetchSessions, postRerank } from "./api.js";
import { debounce } from "./debounce.js";
import { buildSliders, el, renderResult, renderStatus, renderUtilities,
         showError } from "./render.js";
import { drawScatter } from "./scatter.js";
import { buildRequest, initState, PanelState, recordResult, selectSession,
         setWeight } from "./state.js";
import type { Item } from "./types.js";

export interface PanelOptions {
    base: string;
    sessionsUrl?: string;
    debounceMs?: number;
}

export interface Panel {
    state: PanelState;
    root: HTMLElement;
    /** Resolves when the in-flight request (if any) settles. */
    idle(): Promise<void>;
}

function itemIndex(state: PanelState): Map<number, Item> {
    const byId = new Map<number, Item>();
    for (const it of state.sessions[state.sessionIndex].candidates) {
        byId.set(it.id, it);
    }
    return byId;
}

/** Build the panel inside root and wire it to the service. Returns a
 *  handle used by tests; the page itself only needs the side effects. */
export async function createPanel(root: HTMLElement,
                                  opts: PanelOptions): Promise<Panel> {
    root.textContent = "";
    const sessionsUrl = opts.sessionsUrl ?? "demo_sessions.json";
    const debounceMs = opts.debounceMs ?? 150;

    let meta;
    let sessions;
    try {
        meta = await fetchMeta(opts.base);
        sessions = await fetchSessions(sessionsUrl);
    } catch (e) {
        const banner = el("div", "banner error visible",
                          `service unavailable: ${(e as Error).message} `);
        const retry = el("button", "retry", "retry");
        retry.addEventListener("click", () => {
            void createPanel(root, opts);
        });
        banner.appendChild(retry);
        root.appendChild(banner);
        return { state: null as unknown as PanelState, root,
                 idle: async () => {} };
    }

    const state = initState(meta, sessions);

    const controls = el("div", "controls");
    const sessionSelect = el("select", "session-select") as HTMLSelectElement;
    sessions.forEach((_, i) => {
        const opt = el("option", undefined, `session ${i}`) as HTMLOptionElement;
        opt.value = String(i);
        sessionSelect.appendChild(opt);
    });
    const modeToggle = el("select", "mode-select") as HTMLSelectElement;
    for (const m of ["greedy", "sample"]) {
        const opt = el("option", undefined, m) as HTMLOptionElement;
        opt.value = m;
        modeToggle.appendChild(opt);
    }
    const seedInput = el("input", "seed-input") as HTMLInputElement;
    seedInput.type = "number";
    seedInput.value = "0";
    seedInput.disabled = true;
    controls.append(sessionSelect, modeToggle, seedInput);

    const sliderBox = el("div", "sliders");
    const errorBox = el("div", "banner error");
    const statusBox = el("div", "status");
    const resultList = el("ol", "results");
    const utilsBox = el("div", "utilities");

    const scatterBox = el("div", "scatter");
    const axisX = el("select", "axis-x") as HTMLSelectElement;
    const axisY = el("select", "axis-y") as HTMLSelectElement;
    for (const name of meta.utilities) {
        for (const sel of [axisX, axisY]) {
            const opt = el("option", undefined, name) as HTMLOptionElement;
            opt.value = name;
            sel.appendChild(opt);
        }
    }
    axisX.value = meta.utilities[0];
    axisY.value = meta.utilities[Math.min(1, meta.utilities.length - 1)];
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.classList.add("scatter-svg");
    scatterBox.append(axisX, axisY, svg);

    root.append(controls, sliderBox, errorBox, statusBox, resultList,
                utilsBox, scatterBox);

    const redrawScatter = () =>
        drawScatter(svg, state.history, axisX.value, axisY.value);
    redrawScatter();

    // Single in-flight request; a dispatch during flight marks the
    // state dirty and re-issues once the active one settles. Stale
    // responses (superseded while awaited) are dropped by sequence.
    let seq = 0;
    let inflight: Promise<void> | null = null;
    let dirty = false;

    async function issue(): Promise<void> {
        seq += 1;
        const mySeq = seq;
        const body = buildRequest(state);
        try {
            const res = await postRerank(opts.base, body);
            if (mySeq !== seq) return; // superseded
            showError(errorBox, null);
            renderResult(resultList, res, itemIndex(state));
            renderUtilities(utilsBox, res.utilities, state.meta.utilities);
            renderStatus(statusBox, res.latency_ms, res.bundle);
            recordResult(state, state.weights, res.utilities);
            redrawScatter();
        } catch (e) {
            if (mySeq !== seq) return;
            const msg = e instanceof ApiError
                ? `${e.status}: ${e.message}` : (e as Error).message;
            showError(errorBox, msg);
        }
    }

    function dispatch(): void {
        if (inflight) {
            dirty = true;
            return;
        }
        inflight = issue().finally(() => {
            inflight = null;
            if (dirty) {
                dirty = false;
                dispatch();
            }
        });
    }

    const debouncedDispatch = debounce(dispatch, debounceMs);

    buildSliders(sliderBox, meta, state.weights, (i, v) => {
        setWeight(state, i, v);
        debouncedDispatch();
    });

    sessionSelect.addEventListener("change", () => {
        selectSession(state, Number(sessionSelect.value));
        redrawScatter();
        dispatch();
    });
    modeToggle.addEventListener("change", () => {
        state.mode = modeToggle.value as "greedy" | "sample";
        seedInput.disabled = state.mode !== "sample";
        dispatch();
    });
    seedInput.addEventListener("change", () => {
        state.seed = Number(seedInput.value) || 0;
        if (state.mode === "sample") dispatch();
    });
    axisX.addEventListener("change", redrawScatter);
    axisY.addEventListener("change", redrawScatter);

    dispatch(); // initial ranking at the default weights

    return {
        state,
        root,
        async idle() {
            while (inflight) await inflight;
        },
    };
}
