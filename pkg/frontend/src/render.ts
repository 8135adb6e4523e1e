import type { Item, Meta, RerankResponse } from "./types.js";

export interface SliderRefs {
    input: HTMLInputElement;
    readout: HTMLSpanElement;
}

export function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, className?: string, text?: string): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
}

/** One range input per utility, in /meta order, range [0, cap] step 0.01. */
export function buildSliders(
    container: HTMLElement, meta: Meta, weights: number[],
    onInput: (i: number, value: number) => void): SliderRefs[] {
    container.textContent = "";
    return meta.utilities.map((name, i) => {
        const row = el("div", "slider-row");
        const label = el("label", "slider-name", name);
        label.htmlFor = `w-${name}`;
        const input = el("input") as HTMLInputElement;
        input.type = "range";
        input.id = `w-${name}`;
        input.min = "0";
        input.max = String(meta.w_max[i]);
        input.step = "0.01";
        input.value = String(weights[i]);
        const readout = el("span", "slider-value", weights[i].toFixed(2));
        input.addEventListener("input", () => {
            const v = Number(input.value);
            readout.textContent = v.toFixed(2);
            onInput(i, v);
        });
        row.append(label, input, readout);
        container.appendChild(row);
        return { input, readout };
    });
}

function badge(text: string, kind: string): HTMLSpanElement {
    return el("span", `badge badge-${kind}`, text);
}

/** Ordered result list with group badges and per-step probabilities. */
export function renderResult(list: HTMLElement, res: RerankResponse,
                             byId: Map<number, Item>): void {
    list.textContent = "";
    res.items.forEach((id, pos) => {
        const item = byId.get(id);
        const row = el("li", "result-row");
        row.appendChild(el("span", "rank", String(pos + 1)));
        row.appendChild(el("span", "item-id", `#${id}`));
        if (item) {
            row.appendChild(badge(`seller ${item.seller}`, "seller"));
            row.appendChild(badge(`cat ${item.category}`, "category"));
            row.appendChild(badge(item.ctype, "ctype"));
            if (item.cold) row.appendChild(badge("cold", "cold"));
            if (item.new) row.appendChild(badge("new", "new"));
        }
        row.appendChild(el("span", "prob",
                           `p=${res.probs[pos].toFixed(3)}`));
        list.appendChild(row);
    });
}

/** Utility name/value read-outs; values come verbatim from the response. */
export function renderUtilities(table: HTMLElement,
                                utilities: Record<string, number>,
                                order: string[]): void {
    table.textContent = "";
    for (const name of order) {
        const row = el("div", "util-row");
        row.appendChild(el("span", "util-name", name));
        row.appendChild(el("span", "util-value", utilities[name].toFixed(4)));
        table.appendChild(row);
    }
}

export function renderStatus(box: HTMLElement, latencyMs: number,
                             bundle: string): void {
    box.textContent = "";
    box.appendChild(el("span", "latency", `${latencyMs.toFixed(1)} ms`));
    box.appendChild(el("span", "bundle", `bundle ${bundle.slice(0, 12)}`));
}

export function showError(box: HTMLElement, message: string | null): void {
    box.textContent = message ?? "";
    box.classList.toggle("visible", message !== null);
}
