"""Read-mostly HTTP API over a completed explanation workspace.

All responses are pure functions of (workspace contents, request); the only
mutable state is a thread-safe cache for on-demand PageRank and feature
attributions.
"""
from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from .components import component_report
from .graphdata import load_graph_bundle
from .models import predict_labels
from .pagerank import normalize_preference, personalized_pagerank
from .shapley import ShapConfig, explain_node_features, stratified_rows
from .store import ArtifactStore, StoreError, load_interaction, load_model, load_projection, load_ranks
from .structure import local_explanation

REQUIRED_ROLES = ("graph", "teacher", "structure_student", "interaction", "ranks", "projection")


class ExplainWorkspace:
    """Artifacts loaded once at startup; immutable afterwards."""

    def __init__(self, store: ArtifactStore):
        missing = store.missing_roles(REQUIRED_ROLES)
        if missing:
            raise StoreError(
                "workspace incomplete; missing artifacts: " + ", ".join(sorted(missing))
            )
        self.store = store
        self.graph = load_graph_bundle(store.role_path("graph"))
        self.teacher = load_model(store.role_path("teacher"))
        self.student = load_model(store.role_path("structure_student"))
        self.matrix = load_interaction(store.role_path("interaction"))
        self.ranks = load_ranks(store.role_path("ranks"))
        self.coords = load_projection(store.role_path("projection"))
        self.predictions = predict_labels(self.teacher, self.graph)
        feature_path = store.role_path("feature_student")
        self.feature_student = load_model(feature_path) if feature_path else None
        self._cache: dict = {}
        self._lock = threading.Lock()

    def cached(self, key, compute):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._lock:
            self._cache.setdefault(key, value)
        return value

    # ----- endpoint payloads -------------------------------------------------

    def summary(self) -> dict:
        g = self.graph
        return {
            "num_nodes": g.num_nodes,
            "num_edges": g.num_edges,
            "num_classes": g.num_classes,
            "feature_dim": g.feature_dim,
        }

    def global_view(self, top_k: int, edge_threshold: float) -> dict:
        m = self.matrix
        keep = (m.values >= edge_threshold) & (m.src != m.dst)
        edges = [
            [int(s), int(d), float(v)]
            for s, d, v in zip(m.src[keep], m.dst[keep], m.values[keep])
        ]
        return {
            "coords": [[float(x), float(y)] for x, y in self.coords],
            "labels": self.graph.labels.tolist(),
            "predictions": self.predictions.tolist(),
            "ranks": [float(v) for v in self.ranks.scores],
            "top_nodes": [int(v) for v in self.ranks.top(top_k)],
            "edges": edges,
        }

    def local_view(self, node: int, k: int, top_m: int, layout_hint: str) -> dict:
        explanation = self.cached(
            ("local", node, k, top_m),
            lambda: local_explanation(self.student, self.graph, self.matrix, node, k=k, top_m=top_m),
        )
        return {
            "root": explanation.root,
            "k": explanation.k,
            "per_hop_neighbors": {
                str(h): [{"node": n, "score": s} for n, s in pairs]
                for h, pairs in explanation.neighbors_by_hop.items()
            },
            "edge_weights": [[s, d, w] for s, d, w in explanation.edges],
            "feature_sim": explanation.feature_similarity,
            "label_sim": explanation.label_similarity,
            "prediction": explanation.prediction,
            "label": explanation.label,
            "layout_hint": layout_hint,
        }

    def ppr(self, weights: dict, damping: float, tol: float) -> dict:
        pi = np.zeros(self.graph.num_nodes)
        for key, value in weights.items():
            node = int(key)
            if not (0 <= node < self.graph.num_nodes):
                raise ValueError(f"preference node {node} out of range")
            pi[node] = float(value)
        pi = normalize_preference(pi)
        key = (hashlib.sha256(pi.tobytes()).hexdigest(), damping, tol)
        ranks = self.cached(
            ("ppr", key),
            lambda: personalized_pagerank(self.matrix, pi, damping=damping, tol=tol),
        )
        return {
            "ranks": [float(v) for v in ranks.scores],
            "iterations": ranks.iterations,
            "residual": ranks.residual,
        }

    def feature_attribution(self, node: int) -> dict:
        if self.feature_student is None:
            raise StoreError("no feature_student artifact in this workspace")
        if not (0 <= node < self.graph.num_nodes):
            raise ValueError(f"node {node} out of range")

        def compute():
            background_idx = stratified_rows(self.graph, 50, seed=0)
            cfg = ShapConfig(
                background=self.graph.features[background_idx], num_samples=1024, seed=0
            )
            return explain_node_features(self.feature_student, self.graph, node, cfg)

        attribution = self.cached(("shap", node), compute)
        names = self.graph.feature_names or tuple(
            f"feature_{i}" for i in range(self.graph.feature_dim)
        )
        rows = [
            {
                "index": i,
                "name": names[i],
                "value": float(self.graph.features[node, i]),
                "shap": float(v),
            }
            for i, v in enumerate(attribution.values)
        ]
        return {
            "node_id": node,
            "base_value": attribution.base_value,
            "prediction": attribution.prediction,
            "features": rows,
        }

    def components(self) -> dict:
        def compute():
            rows = component_report(self.teacher, self.graph)
            return [
                {
                    "component": r.component,
                    "mc": r.mean_abs_contribution,
                    "delta_acc": r.delta_accuracy,
                    "reference": r.reference,
                    "count": int(r.node_ids.size),
                }
                for r in rows
            ]

        return {"rows": self.cached(("components",), compute)}


def _encode(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True).encode("utf-8")


class _Handler(BaseHTTPRequestHandler):
    server_version = "graphlens"
    workspace: ExplainWorkspace  # set on the server class

    def log_message(self, *args):  # keep test output quiet
        pass

    def _reply(self, status: int, payload: dict) -> None:
        body = _encode(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._reply(status, {"error": message})

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        ws = self.server.workspace  # type: ignore[attr-defined]
        url = urlparse(self.path)
        query = {k: v[-1] for k, v in parse_qs(url.query).items()}
        parts = [p for p in url.path.split("/") if p]
        try:
            if parts == ["graph", "summary"]:
                self._reply(200, ws.summary())
            elif parts == ["graph", "global"]:
                top_k = int(query.get("top_k", 50))
                threshold = float(query.get("edge_threshold", 0.3))
                self._reply(200, ws.global_view(top_k, threshold))
            elif len(parts) == 3 and parts[0] == "node" and parts[2] == "local":
                node = int(parts[1])
                if not (0 <= node < ws.graph.num_nodes):
                    self._error(404, f"node {node} out of range")
                    return
                k = int(query.get("k", 2))
                top_m = int(query.get("top_m", 10))
                self._reply(200, ws.local_view(node, k, top_m, query.get("layout_hint", "")))
            elif parts == ["components"]:
                self._reply(200, ws.components())
            else:
                self._error(404, f"unknown endpoint {url.path}")
        except (ValueError, StoreError) as exc:
            self._error(400, str(exc))

    def do_POST(self):
        ws = self.server.workspace  # type: ignore[attr-defined]
        url = urlparse(self.path)
        parts = [p for p in url.path.split("/") if p]
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length) or b"{}")
        except (ValueError, json.JSONDecodeError):
            self._error(400, "malformed JSON body")
            return
        try:
            if parts == ["ppr"]:
                weights = body.get("preference")
                if not isinstance(weights, dict) or not weights:
                    raise ValueError("preference must be a nonempty {node: weight} object")
                damping = float(body.get("damping", 0.85))
                tol = float(body.get("tol", 1e-9))
                self._reply(200, ws.ppr(weights, damping, tol))
            elif parts == ["explain", "feature"]:
                if "node_id" not in body:
                    raise ValueError("body must contain node_id")
                self._reply(200, ws.feature_attribution(int(body["node_id"])))
            else:
                self._error(404, f"unknown endpoint {url.path}")
        except (ValueError, StoreError) as exc:
            self._error(400, str(exc))


def serve(store: ArtifactStore, address: str = "127.0.0.1:8765") -> ThreadingHTTPServer:
    """Validate the workspace and return a ready (unstarted) HTTP server."""
    workspace = ExplainWorkspace(store)
    host, _, port = address.partition(":")
    server = ThreadingHTTPServer((host, int(port or 0)), _Handler)
    server.workspace = workspace  # type: ignore[attr-defined]
    return server
