"""Command-line shell: generate / train / distill / attribute / eval / serve / export."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .components import component_report
from .distill import KDConfig, OnlineKDConfig, distill_offline, distill_online
from .graphdata import SyntheticSpec, generate_synthetic_graph, load_graph_bundle, save_graph_bundle
from .metrics import evaluate_fidelity
from .models import (
    TEACHER_ARCHS,
    TrainConfig,
    balanced_class_weights,
    default_spec,
    node_embeddings,
    predict_labels,
    train_supervised,
)
from .pagerank import uniform_preference
from .projection import ProjectionConfig, project_embeddings
from .shapley import ShapConfig, explain_node_features, global_importance, mlp_predictor, stratified_rows
from .service import serve
from .store import (
    ArtifactStore,
    StoreError,
    load_interaction,
    load_model,
    load_ranks,
    run_id,
    save_interaction,
    save_model,
    save_projection,
    save_ranks,
)
from .structure import explain_structure


def _print(lines: list[str]) -> None:
    sys.stdout.write("\n".join(lines) + "\n")
    sys.stdout.flush()


def _load_graph(store: ArtifactStore):
    path = store.role_path("graph")
    if path is None:
        raise StoreError("workspace has no graph; run `graphlens generate` or place a bundle")
    return load_graph_bundle(path)


def _load_role_model(store: ArtifactStore, role: str):
    path = store.role_path(role)
    if path is None:
        raise StoreError(f"workspace has no {role!r} model; train or distill one first")
    return load_model(path)


def _accuracy(pred: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    if not mask.any():
        return float("nan")
    return float((pred[mask] == labels[mask]).mean() * 100.0)


def _fidelity_lines(report) -> list[str]:
    return [
        f"accuracy: {report.accuracy:.1f}",
        f"agreement: {report.agreement:.1f}",
        f"predictive_kl: {report.predictive_kl:.6f}",
        f"count: {report.count}",
    ]


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def _cmd_generate(args, store: ArtifactStore) -> None:
    spec = SyntheticSpec(
        num_blocks=args.blocks,
        nodes_per_block=args.block_size,
        p_in=args.p_in,
        p_out=args.p_out,
        d_informative=args.informative,
        d_noise=args.noise,
        class_separation=args.separation,
        imbalance_ratio=args.imbalance,
        seed=args.seed,
    )
    graph = generate_synthetic_graph(spec)
    save_graph_bundle(graph, store.path_for("graph", "meta").parent)
    store.set_role("graph", "graph")
    config = {"verb": "generate", **spec.__dict__}
    run = run_id("generate", config)
    store.write_manifest(run, {"config": config, "outputs": {"graph": "graph"}})
    sizes = np.bincount(graph.labels, minlength=graph.num_classes)
    _print(
        [
            "# graphlens generate",
            f"run: {run}",
            f"num_nodes: {graph.num_nodes}",
            f"num_edges: {graph.num_edges}",
            f"num_classes: {graph.num_classes}",
            f"feature_dim: {graph.feature_dim}",
            "class_sizes: " + ",".join(str(int(s)) for s in sizes),
            f"bundle: {store.root / 'graph'}",
        ]
    )


def _cmd_train(args, store: ArtifactStore) -> None:
    graph = _load_graph(store)
    spec = default_spec(
        args.arch, graph.feature_dim, graph.num_classes, hidden=args.hidden, dropout=args.dropout
    )
    weights = None
    if args.class_weighted:
        weights = balanced_class_weights(
            graph.labels, np.flatnonzero(graph.train_mask), graph.num_classes
        )
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        class_weights=weights,
        oversample=args.oversample,
        seed=args.seed,
    )
    model = train_supervised(spec, graph, config)
    role = args.role or ("teacher" if args.arch in TEACHER_ARCHS else f"baseline_{args.arch}")
    manifest_config = {
        "verb": "train",
        "arch": args.arch,
        "hidden": args.hidden,
        "dropout": args.dropout,
        "epochs": args.epochs,
        "lr": args.lr,
        "weight_decay": args.weight_decay,
        "class_weighted": args.class_weighted,
        "oversample": args.oversample,
        "seed": args.seed,
    }
    run = run_id("train", manifest_config)
    rel = f"models/{run}.gmodel"
    save_model(store.path_for(*rel.split("/")), model)
    store.set_role(role, rel)
    store.write_manifest(
        run,
        {
            "config": manifest_config,
            "outputs": {role: rel},
            "final_loss": model.loss_log[-1],
        },
    )
    pred = predict_labels(model, graph)
    _print(
        [
            "# graphlens train",
            f"run: {run}",
            f"arch: {args.arch}",
            f"role: {role}",
            f"final_loss: {model.loss_log[-1]:.6f}",
            f"train_acc: {_accuracy(pred, graph.labels, graph.train_mask):.1f}",
            f"val_acc: {_accuracy(pred, graph.labels, graph.val_mask):.1f}",
            f"test_acc: {_accuracy(pred, graph.labels, graph.test_mask):.1f}",
            f"model: {rel}",
        ]
    )


def _cmd_distill(args, store: ArtifactStore) -> None:
    graph = _load_graph(store)
    if args.mode == "offline":
        teacher = _load_role_model(store, args.teacher_role)
        spec = default_spec(
            args.student, graph.feature_dim, graph.num_classes,
            hidden=args.hidden, dropout=args.dropout,
        )
        kd = KDConfig(
            temperature=args.temperature,
            weight=args.kd_weight,
            epochs=args.epochs,
            exposure=args.exposure,
            learning_rate=args.lr,
            weight_decay=args.weight_decay,
            oversample=args.oversample,
            seed=args.seed,
        )
        trace: list = []
        student = distill_offline(teacher, spec, graph, kd, trace=trace)
        manifest_config = {
            "verb": "distill",
            "mode": "offline",
            "student": args.student,
            "hidden": args.hidden,
            "dropout": args.dropout,
            "temperature": args.temperature,
            "kd_weight": args.kd_weight,
            "epochs": kd.resolve_epochs(args.student),
            "exposure": args.exposure,
            "lr": args.lr,
            "weight_decay": args.weight_decay,
            "oversample": args.oversample,
            "seed": args.seed,
        }
        run = run_id("distill", manifest_config)
        rel = f"models/{run}.gmodel"
        save_model(store.path_for(*rel.split("/")), student)
        role = f"student_{args.student}"
        store.set_role(role, rel)
        if args.student == "mlp":
            store.set_role("feature_student", rel)
        report = evaluate_fidelity(teacher, student, graph)
        store.write_manifest(
            run,
            {
                "config": manifest_config,
                "outputs": {role: rel},
                "final_loss": student.loss_log[-1],
                "losses": {
                    "total": student.loss_log,
                    "supervised": [s for s, _ in trace],
                    "distillation": [d for _, d in trace],
                },
                "fidelity": {
                    "accuracy": report.accuracy,
                    "agreement": report.agreement,
                    "predictive_kl": report.predictive_kl,
                },
            },
        )
        _print(
            [
                "# graphlens distill (offline)",
                f"run: {run}",
                f"student: {args.student}",
                f"role: {role}",
                f"final_loss: {student.loss_log[-1]:.6f}",
            ]
            + _fidelity_lines(report)
            + [f"model: {rel}"]
        )
        return

    participants = [p.strip() for p in args.participants.split(",") if p.strip()]
    specs = [
        default_spec(arch, graph.feature_dim, graph.num_classes, hidden=args.hidden, dropout=args.dropout)
        for arch in participants
    ]
    cfg = OnlineKDConfig(
        temperature=args.temperature,
        epochs=args.epochs if args.epochs is not None else 200,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        mlp_loss_factor=args.mlp_loss_factor,
        mlp_peer_kl=args.mlp_peer_kl,
        oversample=args.oversample,
        seed=args.seed,
    )
    models = distill_online(specs, graph, cfg)
    manifest_config = {
        "verb": "distill",
        "mode": "online",
        "participants": participants,
        "hidden": args.hidden,
        "dropout": args.dropout,
        "temperature": args.temperature,
        "epochs": cfg.epochs,
        "lr": args.lr,
        "weight_decay": args.weight_decay,
        "mlp_loss_factor": args.mlp_loss_factor,
        "mlp_peer_kl": args.mlp_peer_kl,
        "oversample": args.oversample,
        "seed": args.seed,
    }
    run = run_id("distill", manifest_config)
    lines = ["# graphlens distill (online)", f"run: {run}"]
    outputs = {}
    for arch, model in zip(participants, models):
        rel = f"models/{run}-{arch}.gmodel"
        save_model(store.path_for(*rel.split("/")), model)
        role = f"online_{arch}"
        store.set_role(role, rel)
        outputs[role] = rel
    anchor = models[0]
    for arch, model in zip(participants[1:], models[1:]):
        report = evaluate_fidelity(anchor, model, graph)
        lines += [
            f"participant: {arch}",
            f"  accuracy: {report.accuracy:.1f}",
            f"  agreement_vs_{participants[0]}: {report.agreement:.1f}",
            f"  predictive_kl: {report.predictive_kl:.6f}",
        ]
    store.write_manifest(run, {"config": manifest_config, "outputs": outputs})
    _print(lines)


def _cmd_attribute(args, store: ArtifactStore) -> None:
    graph = _load_graph(store)
    if args.what == "component":
        model = _load_role_model(store, args.teacher_role)
        rows = component_report(
            model, graph, reference_mode=args.reference, reference_value=args.reference_value
        )
        payload = [
            {
                "component": r.component,
                "mc": r.mean_abs_contribution,
                "delta_acc": r.delta_accuracy,
                "reference": r.reference,
                "count": int(r.node_ids.size),
            }
            for r in rows
        ]
        rel = "artifacts/component_report.json"
        path = store.path_for(*rel.split("/"))
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        store.set_role("component_report", rel)
        lines = ["# graphlens attribute component"]
        for row in payload:
            lines.append(
                f"component: {row['component']} reference: {row['reference']} "
                f"mc: {row['mc']:.4f} delta_acc: {row['delta_acc']:.1f} count: {row['count']}"
            )
        _print(lines)
        return

    if args.what == "feature":
        student = _load_role_model(store, "feature_student")
        background_idx = stratified_rows(graph, args.background_size, seed=args.seed)
        cfg = ShapConfig(
            background=graph.features[background_idx],
            num_samples=args.samples,
            seed=args.seed,
        )
        names = graph.feature_names or tuple(f"feature_{i}" for i in range(graph.feature_dim))
        if args.node is not None:
            attribution = explain_node_features(student, graph, args.node, cfg)
            lines = [
                "# graphlens attribute feature (local)",
                f"node: {args.node}",
                f"prediction: {attribution.prediction:.6f}",
                f"base_value: {attribution.base_value:.6f}",
            ]
            order = np.argsort(-np.abs(attribution.values), kind="stable")
            for i in order[: args.top]:
                lines.append(
                    f"{names[i]}: value {graph.features[args.node, i]:.4f} shap {attribution.values[i]:+.6f}"
                )
            _print(lines)
            return
        target = 1 if graph.num_classes == 2 else 0
        predict = mlp_predictor(student, graph, class_index=target)
        instance_idx = stratified_rows(graph, args.instances, seed=args.seed + 1)
        importance = global_importance(predict, graph.features[instance_idx], cfg)
        rel = "artifacts/feature_importance.json"
        payload = {
            "mean_abs": [float(v) for v in importance.mean_abs],
            "order": [int(v) for v in importance.order],
            "names": list(names),
        }
        path = store.path_for(*rel.split("/"))
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        store.set_role("feature_importance", rel)
        lines = ["# graphlens attribute feature (global)"]
        for i in importance.order[: args.top]:
            lines.append(f"{names[i]}: {importance.mean_abs[i]:.6f}")
        _print(lines)
        return

    # structure
    teacher = _load_role_model(store, args.teacher_role)
    spec = default_spec(
        args.student, graph.feature_dim, graph.num_classes, hidden=args.hidden, dropout=args.dropout
    )
    kd = KDConfig(
        temperature=args.temperature,
        weight=args.kd_weight,
        epochs=args.epochs,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        seed=args.seed,
    )
    result = explain_structure(
        teacher, graph, uniform_preference(graph.num_nodes), spec, kd, damping=args.damping
    )
    perplexity = args.perplexity
    if perplexity is None:
        perplexity = max(2.0, min(30.0, (graph.num_nodes - 1) / 3.0 - 1.0))
    coords = project_embeddings(
        node_embeddings(teacher, graph),
        ProjectionConfig(method=args.projection, perplexity=perplexity, seed=args.seed),
    )
    manifest_config = {
        "verb": "attribute-structure",
        "student": args.student,
        "hidden": args.hidden,
        "dropout": args.dropout,
        "temperature": args.temperature,
        "kd_weight": args.kd_weight,
        "epochs": kd.resolve_epochs(args.student),
        "damping": args.damping,
        "projection": args.projection,
        "seed": args.seed,
    }
    run = run_id("structure", manifest_config)
    student_rel = f"models/{run}.gmodel"
    save_model(store.path_for(*student_rel.split("/")), result.student)
    store.set_role("structure_student", student_rel)
    matrix_rel = f"artifacts/{run}-interaction.bin"
    save_interaction(store.path_for(*matrix_rel.split("/")), result.matrix)
    store.set_role("interaction", matrix_rel)
    ranks_rel = f"artifacts/{run}-ranks.bin"
    save_ranks(
        store.path_for(*ranks_rel.split("/")),
        result.ranks,
        meta={"preference": "uniform", "damping": args.damping},
    )
    store.set_role("ranks", ranks_rel)
    proj_rel = f"artifacts/{run}-projection.bin"
    save_projection(
        store.path_for(*proj_rel.split("/")), coords, meta={"method": args.projection}
    )
    store.set_role("projection", proj_rel)
    store.write_manifest(
        run,
        {
            "config": manifest_config,
            "outputs": {
                "structure_student": student_rel,
                "interaction": matrix_rel,
                "ranks": ranks_rel,
                "projection": proj_rel,
            },
            "final_loss": result.student.loss_log[-1],
        },
    )
    lines = [
        "# graphlens attribute structure",
        f"run: {run}",
        f"student: {args.student}",
        f"ppr_iterations: {result.ranks.iterations}",
        f"ppr_residual: {result.ranks.residual:.3e}",
        "top_nodes:",
    ]
    for node in result.ranks.top(args.top):
        lines.append(f"  {node} {result.ranks.scores[node]:.6f}")
    _print(lines)


def _cmd_eval(args, store: ArtifactStore) -> None:
    graph = _load_graph(store)
    teacher = _load_role_model(store, args.teacher_role)
    student = _load_role_model(store, args.student_role)
    report = evaluate_fidelity(teacher, student, graph)
    _print(
        ["# graphlens eval", f"teacher: {args.teacher_role}", f"student: {args.student_role}"]
        + _fidelity_lines(report)
    )


def _cmd_serve(args, store: ArtifactStore) -> None:
    server = serve(store, args.address)
    roles = store.roles()
    lines = ["# graphlens serve", "artifacts:"]
    for role in sorted(roles):
        lines.append(f"  {role}: {roles[role]}")
    if args.validate_only:
        lines.append("status: workspace valid")
        _print(lines)
        server.server_close()
        return
    host, port = server.server_address[:2]
    lines.append(f"listening: http://{host}:{port}")
    _print(lines)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def _cmd_export(args, store: ArtifactStore) -> None:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.what == "ranks":
        path = store.role_path("ranks")
        if path is None:
            raise StoreError("no ranks artifact; run `graphlens attribute structure`")
        ranks = load_ranks(path)
        order = ranks.top(ranks.scores.size)
        out.write_text(
            "".join(f"{node} {ranks.scores[node]:.12g}\n" for node in order)
        )
        count = order.size
    elif args.what == "interaction":
        path = store.role_path("interaction")
        if path is None:
            raise StoreError("no interaction artifact; run `graphlens attribute structure`")
        matrix = load_interaction(path)
        out.write_text(
            "".join(
                f"{s} {d} {v:.12g}\n" for s, d, v in zip(matrix.src, matrix.dst, matrix.values)
            )
        )
        count = matrix.values.size
    else:
        path = store.role_path("feature_importance")
        if path is None:
            raise StoreError("no feature importance; run `graphlens attribute feature`")
        payload = json.loads(path.read_text())
        lines = [
            f"{payload['names'][i]} {payload['mean_abs'][i]:.12g}\n" for i in payload["order"]
        ]
        out.write_text("".join(lines))
        count = len(lines)
    _print(["# graphlens export", f"what: {args.what}", f"rows: {count}", f"out: {out}"])


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """key=value file overriding parser defaults (explicit flags win)."""
    if not getattr(args, "config", None):
        return
    overrides = {}
    for line in Path(args.config).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {line!r}")
        key, value = line.split("=", 1)
        overrides[key.strip().replace("-", "_")] = value.strip()
    for key, raw in overrides.items():
        if not hasattr(args, key):
            continue
        default = parser.get_default(key)
        current = getattr(args, key)
        if current != default:
            continue  # explicitly set on the command line
        if isinstance(default, bool):
            setattr(args, key, raw.lower() in ("1", "true", "yes"))
        elif isinstance(default, int) and default is not None:
            setattr(args, key, int(raw))
        elif isinstance(default, float):
            setattr(args, key, float(raw))
        else:
            setattr(args, key, raw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphlens")
    parser.add_argument("--workspace", default="workspace", help="workspace directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", default=None, help="key=value file overriding defaults")
    sub = parser.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="write a synthetic graph bundle")
    g.add_argument("--blocks", type=int, default=3)
    g.add_argument("--block-size", type=int, default=60)
    g.add_argument("--p-in", type=float, default=0.15)
    g.add_argument("--p-out", type=float, default=0.01)
    g.add_argument("--informative", type=int, default=8)
    g.add_argument("--noise", type=int, default=8)
    g.add_argument("--separation", type=float, default=1.0)
    g.add_argument("--imbalance", type=float, default=None)

    t = sub.add_parser("train", help="train a model on the workspace graph")
    t.add_argument("--arch", required=True)
    t.add_argument("--hidden", type=int, default=64)
    t.add_argument("--dropout", type=float, default=0.5)
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--weight-decay", type=float, default=5e-4)
    t.add_argument("--class-weighted", action="store_true")
    t.add_argument("--oversample", action="store_true")
    t.add_argument("--role", default=None)

    d = sub.add_parser("distill", help="offline or online knowledge distillation")
    d.add_argument("--mode", choices=("offline", "online"), default="offline")
    d.add_argument("--student", default="mlp")
    d.add_argument("--participants", default="appnp,gcn_lpa,mlp")
    d.add_argument("--teacher-role", default="teacher")
    d.add_argument("--hidden", type=int, default=64)
    d.add_argument("--dropout", type=float, default=0.5)
    d.add_argument("--temperature", type=float, default=2.0)
    d.add_argument("--kd-weight", type=float, default=1.0)
    d.add_argument("--epochs", type=int, default=None)
    d.add_argument("--exposure", choices=("all_nodes", "train_only"), default="all_nodes")
    d.add_argument("--lr", type=float, default=0.01)
    d.add_argument("--weight-decay", type=float, default=5e-4)
    d.add_argument("--oversample", action="store_true")
    d.add_argument("--mlp-loss-factor", type=float, default=1.0)
    d.add_argument("--mlp-peer-kl", action="store_true")

    a = sub.add_parser("attribute", help="component, feature, or structure attribution")
    a.add_argument("what", choices=("component", "feature", "structure"))
    a.add_argument("--teacher-role", default="teacher")
    a.add_argument("--reference", default="ones")
    a.add_argument("--reference-value", type=float, default=None)
    a.add_argument("--node", type=int, default=None)
    a.add_argument("--top", type=int, default=10)
    a.add_argument("--samples", type=int, default=1024)
    a.add_argument("--background-size", type=int, default=50)
    a.add_argument("--instances", type=int, default=40)
    a.add_argument("--student", default="sgat")
    a.add_argument("--hidden", type=int, default=64)
    a.add_argument("--dropout", type=float, default=0.5)
    a.add_argument("--temperature", type=float, default=2.0)
    a.add_argument("--kd-weight", type=float, default=1.0)
    a.add_argument("--epochs", type=int, default=None)
    a.add_argument("--lr", type=float, default=0.01)
    a.add_argument("--weight-decay", type=float, default=5e-4)
    a.add_argument("--damping", type=float, default=0.85)
    a.add_argument("--projection", choices=("pca", "tsne"), default="pca")
    a.add_argument("--perplexity", type=float, default=None,
                   help="t-SNE perplexity; default adapts to the graph size")

    e = sub.add_parser("eval", help="teacher/student fidelity metrics")
    e.add_argument("--teacher-role", default="teacher")
    e.add_argument("--student-role", required=True)

    s = sub.add_parser("serve", help="serve the explanation API over a workspace")
    s.add_argument("--address", default="127.0.0.1:8765")
    s.add_argument("--validate-only", action="store_true")

    x = sub.add_parser("export", help="write text exports of stored artifacts")
    x.add_argument("--what", choices=("ranks", "interaction", "importance"), required=True)
    x.add_argument("--out", required=True)

    return parser


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "distill": _cmd_distill,
    "attribute": _cmd_attribute,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
    "export": _cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_config_file(args, parser)
    store = ArtifactStore(args.workspace)
    try:
        _COMMANDS[args.verb](args, store)
    except (StoreError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
