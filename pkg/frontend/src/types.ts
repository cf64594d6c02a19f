/** Payload shapes of the explanation API. Field names are the wire contract. */

export interface GraphSummary {
    num_nodes: number;
    num_edges: number;
    num_classes: number;
    feature_dim: number;
}

export type Edge = [number, number, number]; // src, dst, weight

export interface GlobalView {
    coords: [number, number][];
    labels: number[];
    predictions: number[];
    ranks: number[];
    top_nodes: number[];
    edges: Edge[];
}

export interface HopNeighbor {
    node: number;
    score: number;
}

export interface LocalView {
    root: number;
    k: number;
    per_hop_neighbors: Record<string, HopNeighbor[]>;
    edge_weights: Edge[];
    feature_sim: number;
    label_sim: number;
    prediction: number;
    label: number;
    layout_hint: string;
}

export interface PprResponse {
    ranks: number[];
    iterations: number;
    residual: number;
}

export interface FeatureRow {
    index: number;
    name: string;
    value: number;
    shap: number;
}

export interface FeatureExplanation {
    node_id: number;
    base_value: number;
    prediction: number;
    features: FeatureRow[];
}

export interface ComponentRow {
    component: string;
    mc: number;
    delta_acc: number;
    reference: string;
    count: number;
}

export interface ComponentsReport {
    rows: ComponentRow[];
}
