/** Pure view-model construction: API payload + view state -> drawable scene.
 * No explanation math happens here; every number traces to an API field. */
import { forceLayout, hierarchyLayout, type Point } from "./layout.js";
import type { GlobalView, LocalView } from "./types.js";
import type { ViewState } from "./state.js";

export interface SceneNode {
    id: number;
    x: number;
    y: number;
    radius: number;
    colorClass: number;
    highlighted: boolean;
    selected: boolean;
}

export interface SceneEdge {
    src: number;
    dst: number;
    weight: number;
    highlighted: boolean;
}

export interface GlobalScene {
    nodes: SceneNode[];
    edges: SceneEdge[];
}

const BASE_RADIUS = 3;
const TOP_RADIUS = 9;
const RANK_RADIUS_SPAN = 4;

function scaleCoords(coords: [number, number][], width: number, height: number): Point[] {
    let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
    for (const [x, y] of coords) {
        minX = Math.min(minX, x);
        maxX = Math.max(maxX, x);
        minY = Math.min(minY, y);
        maxY = Math.max(maxY, y);
    }
    const spanX = maxX - minX || 1;
    const spanY = maxY - minY || 1;
    const pad = 20;
    return coords.map(([x, y]) => ({
        x: pad + ((x - minX) / spanX) * (width - 2 * pad),
        y: pad + ((y - minY) / spanY) * (height - 2 * pad),
    }));
}

/** The scene draws exactly the nodes and edges the API returned for the
 * current threshold; the top-k nodes are enlarged, the selection and its
 * incident (filtered) edges are highlighted. */
export function buildGlobalScene(
    payload: GlobalView,
    state: ViewState,
    width = 900,
    height = 600,
): GlobalScene {
    const points = scaleCoords(payload.coords, width, height);
    const top = new Set(payload.top_nodes);
    const maxRank = payload.ranks.reduce((a, b) => Math.max(a, b), 0) || 1;
    const colors = state.colorBy === "prediction" ? payload.predictions : payload.labels;
    const nodes: SceneNode[] = points.map((p, id) => ({
        id,
        x: p.x,
        y: p.y,
        radius: top.has(id)
            ? TOP_RADIUS + RANK_RADIUS_SPAN * (payload.ranks[id] / maxRank)
            : BASE_RADIUS + RANK_RADIUS_SPAN * (payload.ranks[id] / maxRank),
        colorClass: colors[id],
        highlighted: top.has(id),
        selected: state.selected === id,
    }));
    const edges: SceneEdge[] = payload.edges.map(([src, dst, weight]) => ({
        src,
        dst,
        weight,
        highlighted: state.selected !== null && (src === state.selected || dst === state.selected),
    }));
    return { nodes, edges };
}

export interface SimilarityPanel {
    featureSim: string;
    labelSim: string;
    prediction: string;
    label: string;
}

export interface LocalScene {
    nodes: SceneNode[];
    edges: SceneEdge[];
    panel: SimilarityPanel;
    byHop: Map<number, number[]>;
}

/** Panel values are passed through verbatim from the API payload. */
export function similarityPanel(payload: LocalView): SimilarityPanel {
    return {
        featureSim: String(payload.feature_sim),
        labelSim: String(payload.label_sim),
        prediction: String(payload.prediction),
        label: String(payload.label),
    };
}

export function buildLocalScene(
    payload: LocalView,
    state: ViewState,
    width = 900,
    height = 600,
): LocalScene {
    const byHop = new Map<number, number[]>();
    for (const [hop, pairs] of Object.entries(payload.per_hop_neighbors)) {
        byHop.set(Number(hop), pairs.map((p) => p.node));
    }
    const nodeIds = [payload.root, ...[...byHop.values()].flat()];
    const edgePairs = payload.edge_weights.map(([s, d]) => [s, d] as [number, number]);
    const positions =
        state.layout === "hierarchy"
            ? hierarchyLayout(payload.root, byHop, width, height)
            : forceLayout(nodeIds, edgePairs, width, height, payload.root + 1);
    const scoreOf = new Map<number, number>();
    for (const pairs of Object.values(payload.per_hop_neighbors)) {
        for (const { node, score } of pairs) scoreOf.set(node, score);
    }
    const maxScore = Math.max(...scoreOf.values(), 1e-12);
    const nodes: SceneNode[] = nodeIds.map((id) => {
        const p = positions.get(id) ?? { x: width / 2, y: height / 2 };
        const score = scoreOf.get(id) ?? 0;
        return {
            id,
            x: p.x,
            y: p.y,
            radius: id === payload.root ? TOP_RADIUS : BASE_RADIUS + RANK_RADIUS_SPAN * (score / maxScore),
            colorClass: id === payload.root ? payload.prediction : -1,
            highlighted: id === payload.root,
            selected: id === payload.root,
        };
    });
    const edges: SceneEdge[] = payload.edge_weights.map(([src, dst, weight]) => ({
        src,
        dst,
        weight,
        highlighted: src === payload.root || dst === payload.root,
    }));
    return { nodes, edges, panel: similarityPanel(payload), byHop };
}

/** Re-size global nodes from a fresh rank vector (after a /ppr round trip). */
export function applyRanks(scene: GlobalScene, ranks: number[], topK: number): GlobalScene {
    const order = ranks
        .map((score, id) => ({ score, id }))
        .sort((a, b) => b.score - a.score || a.id - b.id)
        .slice(0, topK)
        .map((e) => e.id);
    const top = new Set(order);
    const maxRank = ranks.reduce((a, b) => Math.max(a, b), 0) || 1;
    return {
        edges: scene.edges,
        nodes: scene.nodes.map((node) => ({
            ...node,
            radius: top.has(node.id)
                ? TOP_RADIUS + RANK_RADIUS_SPAN * (ranks[node.id] / maxRank)
                : BASE_RADIUS + RANK_RADIUS_SPAN * (ranks[node.id] / maxRank),
            highlighted: top.has(node.id),
        })),
    };
}
