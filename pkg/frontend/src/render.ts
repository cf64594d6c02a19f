/** Thin SVG rendering of scenes. All geometry comes from scene.ts. */
import type { GlobalScene, LocalScene, SceneEdge, SceneNode } from "./scene.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const PALETTE = [
    "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2",
    "#b279a2", "#eeca3b", "#9d755d", "#bab0ac",
];

function nodeColor(node: SceneNode): string {
    if (node.selected) return "#d62728";
    if (node.colorClass < 0) return "#888888";
    return PALETTE[node.colorClass % PALETTE.length];
}

function drawEdge(svg: SVGElement, edge: SceneEdge, positions: Map<number, SceneNode>): void {
    const a = positions.get(edge.src);
    const b = positions.get(edge.dst);
    if (!a || !b) return;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y));
    line.setAttribute("stroke", edge.highlighted ? "#d62728" : "#bbbbbb");
    line.setAttribute("stroke-width", edge.highlighted ? "2" : "1");
    line.setAttribute("stroke-opacity", String(0.35 + 0.6 * Math.min(edge.weight, 1)));
    line.classList.add("edge");
    svg.appendChild(line);
}

export function renderScene(
    svg: SVGElement,
    scene: GlobalScene | LocalScene,
    onSelect: (node: number) => void,
): void {
    svg.replaceChildren();
    const positions = new Map<number, SceneNode>();
    for (const node of scene.nodes) positions.set(node.id, node);
    for (const edge of scene.edges) drawEdge(svg, edge, positions);
    for (const node of scene.nodes) {
        const circle = document.createElementNS(SVG_NS, "circle");
        circle.setAttribute("cx", String(node.x));
        circle.setAttribute("cy", String(node.y));
        circle.setAttribute("r", String(node.radius));
        circle.setAttribute("fill", nodeColor(node));
        circle.setAttribute("stroke", node.highlighted ? "#333333" : "none");
        circle.setAttribute("stroke-width", node.highlighted ? "1.5" : "0");
        circle.classList.add("node");
        circle.dataset.node = String(node.id);
        circle.addEventListener("click", () => onSelect(node.id));
        const title = document.createElementNS(SVG_NS, "title");
        title.textContent = `node ${node.id}`;
        circle.appendChild(title);
        svg.appendChild(circle);
    }
}

export function renderError(container: HTMLElement, message: string): void {
    container.textContent = message;
    container.classList.add("error");
    container.hidden = false;
}

export function clearError(container: HTMLElement): void {
    container.textContent = "";
    container.classList.remove("error");
    container.hidden = true;
}
