/** Explorer wiring: state <-> URL, API fetches, scene building, rendering. */
import { ApiClient, ApiError } from "./api.js";
import { normalizeEdits, onehotEdit } from "./preference.js";
import { renderError, clearError, renderScene } from "./render.js";
import { applyRanks, buildGlobalScene, buildLocalScene, type GlobalScene } from "./scene.js";
import { defaultState, parseState, serializeState, validateState, type ViewState } from "./state.js";
import type { GlobalView } from "./types.js";

function byId<T extends HTMLElement>(id: string): T {
    const el = document.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
}

class Explorer {
    private state: ViewState = defaultState();
    private api: ApiClient;
    private svg = byId<HTMLElement>("canvas") as unknown as SVGElement;
    private errorBox = byId<HTMLDivElement>("error");
    private panel = byId<HTMLDivElement>("panel");
    private lastGlobal: GlobalView | null = null;
    private lastScene: GlobalScene | null = null;

    constructor() {
        const base = (byId<HTMLInputElement>("api-base") as HTMLInputElement).value
            || "http://127.0.0.1:8765";
        this.api = new ApiClient(base);
        if (window.location.hash.length > 1) {
            this.state = parseState(window.location.hash.slice(1));
        }
        this.bindControls();
    }

    private syncUrl(): void {
        window.location.hash = serializeState(this.state);
    }

    private bindControls(): void {
        byId<HTMLInputElement>("threshold").addEventListener("change", (e) => {
            this.state.edgeThreshold = Number((e.target as HTMLInputElement).value);
            void this.refresh();
        });
        byId<HTMLInputElement>("top-k").addEventListener("change", (e) => {
            this.state.topK = Number((e.target as HTMLInputElement).value);
            void this.refresh();
        });
        byId<HTMLInputElement>("hops").addEventListener("change", (e) => {
            this.state.k = Number((e.target as HTMLInputElement).value);
            if (this.state.mode === "local") void this.refresh();
        });
        byId<HTMLSelectElement>("layout").addEventListener("change", (e) => {
            this.state.layout = (e.target as HTMLSelectElement).value as ViewState["layout"];
            if (this.state.mode === "local") void this.refresh();
        });
        byId<HTMLSelectElement>("color-by").addEventListener("change", (e) => {
            this.state.colorBy = (e.target as HTMLSelectElement).value as ViewState["colorBy"];
            void this.refresh();
        });
        byId<HTMLButtonElement>("btn-global").addEventListener("click", () => {
            this.state.mode = "global";
            void this.refresh();
        });
        byId<HTMLButtonElement>("btn-local").addEventListener("click", () => {
            if (this.state.selected !== null) {
                this.state.mode = "local";
                void this.refresh();
            }
        });
        byId<HTMLButtonElement>("btn-boost").addEventListener("click", () => {
            if (this.state.selected !== null) {
                this.state.preferenceEdits = onehotEdit(this.state.selected);
                void this.rerank();
            }
        });
        byId<HTMLButtonElement>("btn-undo").addEventListener("click", () => {
            this.state.preferenceEdits = new Map();
            void this.refresh();
        });
    }

    async refresh(): Promise<void> {
        const invalid = validateState(this.state);
        if (invalid) {
            renderError(this.errorBox, invalid);
            return;
        }
        this.syncUrl();
        try {
            if (this.state.mode === "global") {
                await this.renderGlobal();
            } else {
                await this.renderLocal();
            }
            clearError(this.errorBox);
        } catch (err) {
            if ((err as Error).name === "AbortError") return;
            const message = err instanceof ApiError ? err.message : String(err);
            this.svg.replaceChildren(); // never leave a stale render behind an error
            renderError(this.errorBox, `API failure: ${message}`);
        }
    }

    private async renderGlobal(): Promise<void> {
        const payload = await this.api.globalView(this.state.topK, this.state.edgeThreshold);
        this.lastGlobal = payload;
        const scene = buildGlobalScene(payload, this.state);
        this.lastScene = scene;
        renderScene(this.svg, scene, (node) => this.select(node));
        this.panel.textContent =
            `global view: ${payload.coords.length} nodes, ` +
            `${payload.edges.length} edges at threshold ${this.state.edgeThreshold}, ` +
            `top ${payload.top_nodes.length} highlighted`;
    }

    private async renderLocal(): Promise<void> {
        if (this.state.selected === null) return;
        const payload = await this.api.localView(
            this.state.selected, this.state.k, 20, this.state.layout,
        );
        const scene = buildLocalScene(payload, this.state);
        renderScene(this.svg, scene, (node) => this.select(node));
        this.panel.replaceChildren();
        const rows: [string, string][] = [
            ["Feature Sim", scene.panel.featureSim],
            ["Label Sim", scene.panel.labelSim],
            ["Prediction", scene.panel.prediction],
            ["Label", scene.panel.label],
        ];
        for (const [name, value] of rows) {
            const div = document.createElement("div");
            div.textContent = `${name}: ${value}`;
            this.panel.appendChild(div);
        }
    }

    private async rerank(): Promise<void> {
        if (!this.lastGlobal || !this.lastScene) await this.renderGlobal();
        try {
            const normalized = normalizeEdits(this.state.preferenceEdits);
            const response = await this.api.ppr(normalized);
            const scene = applyRanks(this.lastScene!, response.ranks, this.state.topK);
            this.lastScene = scene;
            renderScene(this.svg, scene, (node) => this.select(node));
            this.syncUrl();
            clearError(this.errorBox);
        } catch (err) {
            if ((err as Error).name === "AbortError") return;
            renderError(this.errorBox, `API failure: ${(err as Error).message}`);
        }
    }

    private select(node: number): void {
        this.state.selected = node;
        void this.refresh();
    }

    async start(): Promise<void> {
        try {
            const summary = await this.api.summary();
            byId<HTMLDivElement>("summary").textContent =
                `${summary.num_nodes} nodes / ${summary.num_edges} edges / ` +
                `${summary.num_classes} classes / ${summary.feature_dim} features`;
        } catch (err) {
            renderError(this.errorBox, `API failure: ${(err as Error).message}`);
            return;
        }
        await this.refresh();
    }
}

window.addEventListener("DOMContentLoaded", () => {
    void new Explorer().start();
});
