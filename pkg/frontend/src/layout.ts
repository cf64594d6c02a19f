/** Deterministic layouts: a seeded force simulation and per-hop rings. */

export interface Point {
    x: number;
    y: number;
}

/** Small deterministic PRNG (mulberry32) so layouts are reproducible. */
export function seededRandom(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
        a = (a + 0x6d2b79f5) >>> 0;
        let t = a;
        t = Math.imul(t ^ (t >>> 15), t | 1);
        t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

export function forceLayout(
    nodes: number[],
    edges: [number, number][],
    width: number,
    height: number,
    seed = 1,
    iterations = 150,
): Map<number, Point> {
    const rand = seededRandom(seed);
    const index = new Map<number, number>();
    nodes.forEach((n, i) => index.set(n, i));
    const px = nodes.map(() => (rand() - 0.5) * width * 0.8);
    const py = nodes.map(() => (rand() - 0.5) * height * 0.8);
    const n = nodes.length;
    if (n === 0) return new Map();
    const area = width * height;
    const ideal = Math.sqrt(area / n) * 0.6;
    for (let it = 0; it < iterations; it++) {
        const temp = 0.1 * Math.max(width, height) * (1 - it / iterations);
        const dx = new Array(n).fill(0);
        const dy = new Array(n).fill(0);
        for (let i = 0; i < n; i++) {
            for (let j = i + 1; j < n; j++) {
                let ux = px[i] - px[j];
                let uy = py[i] - py[j];
                let dist = Math.hypot(ux, uy);
                if (dist < 1e-6) {
                    ux = 1e-3 * (i - j);
                    uy = 1e-3;
                    dist = Math.hypot(ux, uy);
                }
                const repulse = (ideal * ideal) / dist;
                dx[i] += (ux / dist) * repulse;
                dy[i] += (uy / dist) * repulse;
                dx[j] -= (ux / dist) * repulse;
                dy[j] -= (uy / dist) * repulse;
            }
        }
        for (const [s, d] of edges) {
            const i = index.get(s);
            const j = index.get(d);
            if (i === undefined || j === undefined || i === j) continue;
            const ux = px[i] - px[j];
            const uy = py[i] - py[j];
            const dist = Math.max(Math.hypot(ux, uy), 1e-6);
            const attract = (dist * dist) / ideal;
            dx[i] -= (ux / dist) * attract;
            dy[i] -= (uy / dist) * attract;
            dx[j] += (ux / dist) * attract;
            dy[j] += (uy / dist) * attract;
        }
        for (let i = 0; i < n; i++) {
            const disp = Math.max(Math.hypot(dx[i], dy[i]), 1e-9);
            px[i] += (dx[i] / disp) * Math.min(disp, temp);
            py[i] += (dy[i] / disp) * Math.min(disp, temp);
            px[i] = Math.min(width / 2 - 10, Math.max(-width / 2 + 10, px[i]));
            py[i] = Math.min(height / 2 - 10, Math.max(-height / 2 + 10, py[i]));
        }
    }
    const out = new Map<number, Point>();
    nodes.forEach((node, i) => out.set(node, { x: px[i] + width / 2, y: py[i] + height / 2 }));
    return out;
}

/** Root at the center, hop-h neighbors evenly spaced on ring h. */
export function hierarchyLayout(
    root: number,
    byHop: Map<number, number[]>,
    width: number,
    height: number,
): Map<number, Point> {
    const out = new Map<number, Point>();
    const cx = width / 2;
    const cy = height / 2;
    out.set(root, { x: cx, y: cy });
    const hops = [...byHop.keys()].sort((a, b) => a - b);
    const maxHop = hops.length > 0 ? hops[hops.length - 1] : 1;
    const maxRadius = Math.min(width, height) / 2 - 30;
    for (const hop of hops) {
        const members = byHop.get(hop) ?? [];
        const radius = (hop / maxHop) * maxRadius;
        members.forEach((node, i) => {
            const angle = (2 * Math.PI * i) / Math.max(members.length, 1) - Math.PI / 2;
            out.set(node, {
                x: cx + radius * Math.cos(angle),
                y: cy + radius * Math.sin(angle),
            });
        });
    }
    return out;
}
