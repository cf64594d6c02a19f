"""Workspace persistence: checksummed binary containers for models, matrices,
ranks, and projections, plus run manifests and role bookkeeping."""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .models import InteractionMatrix, ModelSpec, TrainedModel
from .pagerank import NodeRanks
from . import autodiff as ad

MAGIC = b"GLAR1\n"
_DTYPES = {"float64": "<f8", "int64": "<i8"}


class StoreError(RuntimeError):
    pass


def save_container(path: str | Path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> Path:
    """Write named arrays plus JSON metadata; trailing sha256 guards the file."""
    path = Path(path)
    manifest = []
    blobs = []
    for name, arr in arrays.items():
        if arr.dtype == np.float64:
            dtype = "float64"
        elif arr.dtype == np.int64:
            dtype = "int64"
        else:
            raise StoreError(f"unsupported array dtype {arr.dtype} for {name!r}")
        blob = np.ascontiguousarray(arr).astype(_DTYPES[dtype]).tobytes()
        manifest.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        blobs.append(blob)
    header = json.dumps(
        {"kind": kind, "meta": meta, "arrays": manifest}, sort_keys=True
    ).encode("utf-8")
    body = MAGIC + struct.pack("<I", len(header)) + header + b"".join(blobs)
    digest = hashlib.sha256(body).digest()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + digest)
    return path


def load_container(path: str | Path, expect_kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise StoreError(f"artifact not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 4 + 32 or not raw.startswith(MAGIC):
        raise StoreError(f"not a graphlens container: {path}")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise StoreError(f"checksum mismatch (corrupt artifact): {path}")
    header_len = struct.unpack("<I", body[len(MAGIC) : len(MAGIC) + 4])[0]
    header_start = len(MAGIC) + 4
    header = json.loads(body[header_start : header_start + header_len].decode("utf-8"))
    if expect_kind is not None and header["kind"] != expect_kind:
        raise StoreError(f"expected {expect_kind!r} container, found {header['kind']!r}")
    arrays: dict[str, np.ndarray] = {}
    offset = header_start + header_len
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * 8
        arr = np.frombuffer(body[offset : offset + nbytes], dtype=_DTYPES[entry["dtype"]])
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
        offset += nbytes
    return header["meta"], arrays


def save_model(path: str | Path, model: TrainedModel) -> Path:
    meta = {
        "spec": asdict(model.spec),
        "seed": model.seed,
        "loss_log": model.loss_log,
        "format_version": 1,
    }
    return save_container(path, "model", meta, model.param_arrays())


def load_model(path: str | Path) -> TrainedModel:
    meta, arrays = load_container(path, expect_kind="model")
    if meta.get("format_version") != 1:
        raise StoreError("unsupported model container version")
    spec_dict = dict(meta["spec"])
    spec_dict["layer_sizes"] = tuple(spec_dict["layer_sizes"])
    spec = ModelSpec(**spec_dict)
    params = {name: ad.Tensor(arr, requires_grad=True) for name, arr in arrays.items()}
    return TrainedModel(spec=spec, params=params, loss_log=list(meta["loss_log"]), seed=meta["seed"])


def save_interaction(path: str | Path, matrix: InteractionMatrix) -> Path:
    meta = {"num_nodes": matrix.num_nodes, "source_model": matrix.source_model}
    return save_container(
        path,
        "interaction",
        meta,
        {"src": matrix.src.astype(np.int64), "dst": matrix.dst.astype(np.int64), "values": matrix.values},
    )


def load_interaction(path: str | Path) -> InteractionMatrix:
    meta, arrays = load_container(path, expect_kind="interaction")
    return InteractionMatrix(
        num_nodes=meta["num_nodes"],
        src=arrays["src"],
        dst=arrays["dst"],
        values=arrays["values"],
        source_model=meta["source_model"],
    )


def save_ranks(path: str | Path, ranks: NodeRanks, meta: dict | None = None) -> Path:
    payload = {"residual": ranks.residual, "iterations": ranks.iterations}
    payload.update(meta or {})
    return save_container(path, "ranks", payload, {"scores": ranks.scores})


def load_ranks(path: str | Path) -> NodeRanks:
    meta, arrays = load_container(path, expect_kind="ranks")
    return NodeRanks(
        scores=arrays["scores"], residual=meta["residual"], iterations=meta["iterations"]
    )


def save_projection(path: str | Path, coords: np.ndarray, meta: dict | None = None) -> Path:
    return save_container(path, "projection", meta or {}, {"coords": coords})


def load_projection(path: str | Path) -> np.ndarray:
    _, arrays = load_container(path, expect_kind="projection")
    return arrays["coords"]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def run_id(verb: str, config: dict) -> str:
    digest = hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:8]
    return f"{verb}-{digest}"


class ArtifactStore:
    """A named workspace directory: graph bundle, checkpoints, interaction
    matrix, ranks, projection, reports, and run manifests.

    Artifacts are content-addressed by run id (a hash of the full run
    configuration including the seed); roles map stable names like
    "teacher" to the latest artifact path.
    """

    INDEX = "workspace.json"

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _index_path(self) -> Path:
        return self.root / self.INDEX

    def _read_index(self) -> dict:
        if not self._index_path().exists():
            return {"roles": {}}
        return json.loads(self._index_path().read_text())

    def _write_index(self, index: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self._index_path().write_text(json.dumps(index, sort_keys=True, indent=2) + "\n")

    def set_role(self, role: str, relative_path: str) -> None:
        index = self._read_index()
        index["roles"][role] = relative_path
        self._write_index(index)

    def role_path(self, role: str) -> Path | None:
        rel = self._read_index()["roles"].get(role)
        if rel is None:
            return None
        path = self.root / rel
        return path if path.exists() else None

    def roles(self) -> dict[str, str]:
        return dict(self._read_index()["roles"])

    def path_for(self, *parts: str) -> Path:
        path = self.root.joinpath(*parts)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_manifest(self, run: str, payload: dict) -> Path:
        path = self.path_for("runs", f"{run}.json")
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        return path

    def read_manifest(self, run: str) -> dict:
        path = self.root / "runs" / f"{run}.json"
        if not path.exists():
            raise StoreError(f"manifest not found: {path}")
        return json.loads(path.read_text())

    def missing_roles(self, required: tuple[str, ...]) -> list[str]:
        return [role for role in required if self.role_path(role) is None]
