/** Typed API client. Requests per view are latest-wins: starting a new request
 * for the same view key aborts the in-flight one. */
import type {
    ComponentsReport,
    FeatureExplanation,
    GlobalView,
    GraphSummary,
    LocalView,
    PprResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
    constructor(readonly status: number, message: string) {
        super(message);
    }
}

export class ApiClient {
    private inflight = new Map<string, AbortController>();

    constructor(
        readonly baseUrl: string,
        private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
    ) {}

    private async request<T>(viewKey: string, path: string, body?: unknown): Promise<T> {
        const previous = this.inflight.get(viewKey);
        if (previous) previous.abort();
        const controller = new AbortController();
        this.inflight.set(viewKey, controller);
        const init: RequestInit = { signal: controller.signal };
        if (body !== undefined) {
            init.method = "POST";
            init.headers = { "Content-Type": "application/json" };
            init.body = JSON.stringify(body);
        }
        try {
            const response = await this.fetchImpl(this.baseUrl + path, init);
            const text = await response.text();
            if (!response.ok) {
                let message = `HTTP ${response.status}`;
                try {
                    const payload = JSON.parse(text) as { error?: string };
                    if (payload.error) message = payload.error;
                } catch {
                    /* not JSON */
                }
                throw new ApiError(response.status, message);
            }
            return JSON.parse(text) as T;
        } finally {
            if (this.inflight.get(viewKey) === controller) {
                this.inflight.delete(viewKey);
            }
        }
    }

    summary(): Promise<GraphSummary> {
        return this.request("summary", "/graph/summary");
    }

    globalView(topK: number, edgeThreshold: number): Promise<GlobalView> {
        return this.request(
            "global",
            `/graph/global?top_k=${topK}&edge_threshold=${edgeThreshold}`,
        );
    }

    localView(node: number, k: number, topM: number, layoutHint: string): Promise<LocalView> {
        return this.request(
            "local",
            `/node/${node}/local?k=${k}&top_m=${topM}&layout_hint=${encodeURIComponent(layoutHint)}`,
        );
    }

    ppr(preference: Record<string, number>): Promise<PprResponse> {
        return this.request("ppr", "/ppr", { preference });
    }

    explainFeatures(node: number): Promise<FeatureExplanation> {
        return this.request("feature", "/explain/feature", { node_id: node });
    }

    components(): Promise<ComponentsReport> {
        return this.request("components", "/components");
    }
}
