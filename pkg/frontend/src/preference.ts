/** Client-side preference-vector editing. The server owns the PageRank math;
 * the client only normalizes edits before posting them. */

export function normalizeEdits(edits: Map<number, number>): Record<string, number> {
    let total = 0;
    for (const [node, weight] of edits) {
        if (weight < 0) {
            throw new Error(`preference weight for node ${node} must be nonnegative`);
        }
        total += weight;
    }
    if (total <= 0) {
        throw new Error("preference edits must contain at least one positive weight");
    }
    const normalized: Record<string, number> = {};
    for (const [node, weight] of edits) {
        if (weight > 0) normalized[String(node)] = weight / total;
    }
    return normalized;
}

export function onehotEdit(node: number): Map<number, number> {
    return new Map([[node, 1.0]]);
}

/** Uniform edits over all nodes: equivalent to the server's default ranking. */
export function uniformEdits(numNodes: number): Map<number, number> {
    const edits = new Map<number, number>();
    for (let i = 0; i < numNodes; i++) edits.set(i, 1.0);
    return edits;
}
