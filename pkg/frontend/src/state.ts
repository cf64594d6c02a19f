/** View state: everything the explorer needs to reproduce a view, URL-serializable. */

export type ViewMode = "global" | "local";
export type Layout = "force" | "hierarchy";
export type ColorBy = "prediction" | "label";

export interface ViewState {
    mode: ViewMode;
    selected: number | null;
    edgeThreshold: number;
    topK: number;
    k: number;
    layout: Layout;
    colorBy: ColorBy;
    /** node id -> teleport weight; empty map means the uniform default */
    preferenceEdits: Map<number, number>;
}

export function defaultState(): ViewState {
    return {
        mode: "global",
        selected: null,
        edgeThreshold: 0.3,
        topK: 50,
        k: 1,
        layout: "force",
        colorBy: "prediction",
        preferenceEdits: new Map(),
    };
}

export function validateState(state: ViewState): string | null {
    if (state.edgeThreshold < 0 || state.edgeThreshold > 1) {
        return "edge threshold must lie in [0, 1]";
    }
    if (state.mode === "local" && state.k < 1) {
        return "hop level must be >= 1 in local mode";
    }
    if (state.topK < 1) {
        return "top-k must be >= 1";
    }
    return null;
}

/** Serialize to URL hash parameters; inverse of parseState. */
export function serializeState(state: ViewState): string {
    const params = new URLSearchParams();
    params.set("mode", state.mode);
    if (state.selected !== null) params.set("node", String(state.selected));
    params.set("threshold", String(state.edgeThreshold));
    params.set("top_k", String(state.topK));
    params.set("k", String(state.k));
    params.set("layout", state.layout);
    params.set("color", state.colorBy);
    if (state.preferenceEdits.size > 0) {
        const parts: string[] = [];
        for (const [node, weight] of state.preferenceEdits) {
            parts.push(`${node}:${weight}`);
        }
        params.set("pref", parts.join(","));
    }
    return params.toString();
}

export function parseState(serialized: string): ViewState {
    const params = new URLSearchParams(serialized);
    const state = defaultState();
    const mode = params.get("mode");
    if (mode === "global" || mode === "local") state.mode = mode;
    const node = params.get("node");
    if (node !== null && node !== "") state.selected = Number(node);
    const threshold = params.get("threshold");
    if (threshold !== null) state.edgeThreshold = Number(threshold);
    const topK = params.get("top_k");
    if (topK !== null) state.topK = Number(topK);
    const k = params.get("k");
    if (k !== null) state.k = Number(k);
    const layout = params.get("layout");
    if (layout === "force" || layout === "hierarchy") state.layout = layout;
    const color = params.get("color");
    if (color === "prediction" || color === "label") state.colorBy = color;
    const pref = params.get("pref");
    if (pref) {
        for (const part of pref.split(",")) {
            const [n, w] = part.split(":");
            state.preferenceEdits.set(Number(n), Number(w));
        }
    }
    return state;
}
