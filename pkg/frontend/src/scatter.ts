import type { HistoryPoint } from "./types.js";

const NS = "http://www.w3.org/2000/svg";
const W = 340;
const H = 240;
const PAD_L = 46;
const PAD_R = 12;
const PAD_T = 10;
const PAD_B = 34;

function svgEl<K extends keyof SVGElementTagNameMap>(
    tag: K, attrs: Record<string, string>): SVGElementTagNameMap[K] {
    const el = document.createElementNS(NS, tag);
    for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
    return el;
}

function span(values: number[]): [number, number] {
    let lo = Math.min(...values);
    let hi = Math.max(...values);
    if (lo === hi) {
        // degenerate axis: pad around the single value
        lo -= 0.5;
        hi += 0.5;
    }
    const margin = (hi - lo) * 0.08;
    return [lo - margin, hi + margin];
}

/** Redraw the accumulated trade-off scatter of utility xKey vs yKey.
 *  One circle per completed request; the newest is emphasized. */
export function drawScatter(svg: SVGSVGElement, history: HistoryPoint[],
                            xKey: string, yKey: string): void {
    svg.setAttribute("viewBox", `0 0 ${W} ${H}`);
    while (svg.firstChild) svg.removeChild(svg.firstChild);

    svg.appendChild(svgEl("line", {
        x1: `${PAD_L}`, y1: `${H - PAD_B}`, x2: `${W - PAD_R}`,
        y2: `${H - PAD_B}`, class: "axis",
    }));
    svg.appendChild(svgEl("line", {
        x1: `${PAD_L}`, y1: `${PAD_T}`, x2: `${PAD_L}`,
        y2: `${H - PAD_B}`, class: "axis",
    }));

    const xLabel = svgEl("text", {
        x: `${(PAD_L + W - PAD_R) / 2}`, y: `${H - 4}`,
        "text-anchor": "middle", class: "axis-name",
    });
    xLabel.textContent = xKey;
    svg.appendChild(xLabel);
    const yLabel = svgEl("text", {
        x: "12", y: `${(PAD_T + H - PAD_B) / 2}`, "text-anchor": "middle",
        transform: `rotate(-90 12 ${(PAD_T + H - PAD_B) / 2})`,
        class: "axis-name",
    });
    yLabel.textContent = yKey;
    svg.appendChild(yLabel);

    if (history.length === 0) return;

    const xs = history.map((p) => p.utilities[xKey]);
    const ys = history.map((p) => p.utilities[yKey]);
    const [x0, x1] = span(xs);
    const [y0, y1] = span(ys);
    const sx = (v: number) =>
        PAD_L + ((v - x0) / (x1 - x0)) * (W - PAD_L - PAD_R);
    const sy = (v: number) =>
        H - PAD_B - ((v - y0) / (y1 - y0)) * (H - PAD_T - PAD_B);

    for (const [pos, label] of [[x0, "lo"], [x1, "hi"]] as const) {
        const t = svgEl("text", {
            x: `${sx(pos)}`, y: `${H - PAD_B + 14}`,
            "text-anchor": label === "lo" ? "start" : "end", class: "tick",
        });
        t.textContent = pos.toFixed(3);
        svg.appendChild(t);
    }
    for (const pos of [y0, y1]) {
        const t = svgEl("text", {
            x: `${PAD_L - 4}`, y: `${sy(pos) + 3}`,
            "text-anchor": "end", class: "tick",
        });
        t.textContent = pos.toFixed(3);
        svg.appendChild(t);
    }

    history.forEach((p, i) => {
        const latest = i === history.length - 1;
        svg.appendChild(svgEl("circle", {
            cx: `${sx(p.utilities[xKey])}`,
            cy: `${sy(p.utilities[yKey])}`,
            r: latest ? "5" : "3.5",
            class: latest ? "pt latest" : "pt",
        }));
    });
}
