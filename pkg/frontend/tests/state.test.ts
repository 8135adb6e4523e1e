import { describe, expect, it } from "vitest";
import { buildRequest, initState, recordResult, selectSession,
         setWeight } from "../src/state.js";
import { META, SESSIONS } from "./helpers.js";

describe("panel state", () => {
    it("starts every slider at half its cap", () => {
        const s = initState(META, SESSIONS);
        expect(s.weights).toEqual([0.5, 0.4, 0.25, 0.25]);
        expect(s.mode).toBe("greedy");
        expect(s.history).toEqual([]);
    });

    it("clamps weights into [0, cap]", () => {
        const s = initState(META, SESSIONS);
        setWeight(s, 0, 1.7);
        expect(s.weights[0]).toBe(1.0);
        setWeight(s, 1, -0.3);
        expect(s.weights[1]).toBe(0);
        setWeight(s, 2, 0.31);
        expect(s.weights[2]).toBe(0.31);
    });

    it("request weights are the slider values verbatim, keyed by name", () => {
        const s = initState(META, SESSIONS);
        setWeight(s, 0, 0.93);
        setWeight(s, 3, 0.07);
        const body = buildRequest(s);
        expect(body.weights).toEqual({
            click: 0.93, cold_boost: 0.4, prio_order: 0.25, cat_div: 0.07,
        });
        expect(body.user).toBe(SESSIONS[0].user);
        expect(body.candidates).toBe(SESSIONS[0].candidates);
        expect(body.mode).toBe("greedy");
        expect(body.seed).toBeUndefined();
    });

    it("sample mode carries the seed", () => {
        const s = initState(META, SESSIONS);
        s.mode = "sample";
        s.seed = 42;
        expect(buildRequest(s).seed).toBe(42);
    });

    it("switching sessions clears the history", () => {
        const s = initState(META, SESSIONS);
        recordResult(s, s.weights, { click: 0.2 });
        expect(s.history).toHaveLength(1);
        selectSession(s, 1);
        expect(s.sessionIndex).toBe(1);
        expect(s.history).toHaveLength(0);
        expect(() => selectSession(s, 9)).toThrow("no session 9");
    });

    it("history points are snapshots, not live references", () => {
        const s = initState(META, SESSIONS);
        const utils = { click: 0.2 };
        recordResult(s, s.weights, utils);
        setWeight(s, 0, 0.99);
        utils.click = 0.8;
        expect(s.history[0].w[0]).toBe(0.5);
        expect(s.history[0].utilities.click).toBe(0.2);
    });
});
