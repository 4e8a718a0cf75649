"""Command-line interface: similarity, embedding, ranking, clustering, scans, LIF.

Every command writes plot-ready CSV files plus JSON sidecars into the output
directory, including a ``resolved_config.json`` sufficient to rerun it.
Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import scipy.stats

from dynembed import io
from dynembed.clustering import (
    Partition,
    louvain_optimize,
    quality_config_from_system,
    quality_value,
    spectral_partition,
    time_scan,
)
from dynembed.embedding import decompose, embed, rank_by_coordinate
from dynembed.graphs import (
    Graph,
    combinatorial_laplacian,
    load_edge_list,
    random_walk_laplacian,
    signed_laplacian,
)
from dynembed.lif import (
    LifParams,
    generate_assembly_network,
    rate_model_system,
    simulate_lif,
    structural_partition,
    validate_functional_recovery,
)
from dynembed.linsys import (
    LinearSystem,
    diffusion_system,
    discrete_walk_system,
    influence_system,
    random_walk_system,
    signed_system,
    teleported_system,
)
from dynembed.similarity import (
    NumericalError,
    centered_similarity_at,
    distance_squared,
    integrated_distance,
    integrated_similarity,
    integrated_similarity_discrete,
    similarity_at,
)

DYNAMICS = ("diffusion", "rw", "signed", "influence", "rate", "discrete")


class UsageError(ValueError):
    """Invalid flag combination or input; maps to exit code 2."""


def _max_workers() -> int:
    raw = os.environ.get("DYNEMBED_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def _load_graph(args) -> Graph:
    path = Path(args.edges)
    if not path.exists():
        raise UsageError(f"edge list {path} does not exist")
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh, directed=args.directed)


def _weighting_matrix(args, g: Graph) -> np.ndarray | None:
    if args.weighting == "identity":
        return None
    if args.center:
        raise UsageError("--weighting degree cannot be combined with --center")
    if args.dynamics not in ("diffusion", "rw", "discrete"):
        raise UsageError("--weighting degree requires an unsigned diffusion dynamics")
    return np.diag(g.out_degrees())


def _build_system(args, g: Graph) -> LinearSystem:
    W = _weighting_matrix(args, g)
    if args.teleport is not None and args.dynamics != "diffusion":
        raise UsageError("--teleport applies only to --dynamics diffusion")
    if args.dynamics == "diffusion":
        if args.teleport is not None:
            return teleported_system(g, args.teleport, W)
        return diffusion_system(g, W)
    if args.dynamics == "rw":
        return random_walk_system(g, W)
    if args.dynamics == "signed":
        if g.directed:
            raise UsageError("--dynamics signed requires an undirected edge list")
        return signed_system(g, W)
    if args.dynamics == "influence":
        return influence_system(g, W)
    if args.dynamics == "rate":
        return rate_model_system(g.weights)
    if args.dynamics == "discrete":
        return discrete_walk_system(g, W)
    raise UsageError(f"unknown dynamics {args.dynamics!r}")


def _time_spec(args) -> tuple[str, float]:
    if args.t is not None and args.interval is not None:
        raise UsageError("--t and --interval are mutually exclusive")
    if args.t is not None:
        return "point", args.t
    return "interval", args.interval if args.interval is not None else 1.0


def _nu_uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / np.sqrt(n))


def _compute_similarity(args, sys: LinearSystem):
    kind, t = _time_spec(args)
    n = sys.output_dim
    if kind == "point":
        if args.center:
            return centered_similarity_at(sys, t, _nu_uniform(n), args.alpha)
        return similarity_at(sys, t)
    if args.center:
        # the projector enters as the inner-product weighting of the integral
        proj = np.eye(n) - args.alpha * np.outer(_nu_uniform(n), _nu_uniform(n))
        sys = LinearSystem(sys.A_op, sys.B_op, sys.C_op, proj, sys.mode)
    if sys.mode == "discrete":
        return integrated_similarity_discrete(sys, int(t))
    return integrated_similarity(sys, t)


def _sidecar(args, psi) -> dict:
    return {
        "t_spec": psi.t_spec.to_json(),
        "centering": None
        if psi.centering is None
        else {"nu": "uniform", "alpha": psi.centering.alpha},
        "weighting": args.weighting,
        "dynamics": args.dynamics,
        "directed": args.directed,
        "teleport": args.teleport,
    }


def _write_config(outdir: Path, args) -> None:
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    io.write_json(outdir / "resolved_config.json", payload)


def _outdir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_similarity(args) -> int:
    g = _load_graph(args)
    sys_ = _build_system(args, g)
    psi = _compute_similarity(args, sys_)
    dsq = distance_squared(psi) if psi.t_spec.kind == "point" else integrated_distance(psi)
    out = _outdir(args)
    io.write_matrix_csv(out / "psi.csv", psi.values, g.node_ids)
    io.write_matrix_csv(out / "dsq.csv", dsq.values, g.node_ids)
    io.write_json(out / "psi.json", _sidecar(args, psi))
    _write_config(out, args)
    return 0


def cmd_embed(args) -> int:
    g = _load_graph(args)
    sys_ = _build_system(args, g)
    psi = _compute_similarity(args, sys_)
    emb = embed(decompose(psi), args.c, node_ids=g.node_ids)
    out = _outdir(args)
    header = ["node_id"] + [f"phi_{k}" for k in range(1, args.c + 1)]
    rows = [
        [g.node_ids[i]] + [float(x) for x in emb.coords[i]] for i in range(g.n)
    ]
    io.write_table_csv(out / "embedding.csv", header, rows)
    payload = _sidecar(args, psi)
    payload.update(
        {
            "c": emb.c,
            "truncation_error": emb.truncation_error,
            "sign_convention": emb.sign_convention,
        }
    )
    io.write_json(out / "embedding.json", payload)
    _write_config(out, args)
    return 0


def cmd_rank(args) -> int:
    g = _load_graph(args)
    sys_ = _build_system(args, g)
    psi = _compute_similarity(args, sys_)
    emb = embed(decompose(psi), max(args.dim, 1), node_ids=g.node_ids)
    ranking = rank_by_coordinate(emb, args.dim)
    out = _outdir(args)
    io.write_table_csv(
        out / "ranking.csv",
        ["rank", "node_id", "score"],
        [[r + 1, node, float(score)] for r, (node, score) in enumerate(ranking)],
    )
    payload = _sidecar(args, psi)
    payload["dim"] = args.dim
    if args.reference:
        ref_ids = io.read_ranking_csv(Path(args.reference))
        ref_pos = {node: r for r, node in enumerate(ref_ids)}
        ours = [node for node, _ in ranking if node in ref_pos]
        if len(ours) < 2:
            raise UsageError("reference ranking shares fewer than 2 nodes with the graph")
        our_rank = np.arange(len(ours))
        their_rank = np.array([ref_pos[node] for node in ours])
        rho = float(scipy.stats.spearmanr(our_rank, their_rank).statistic)
        payload.update({"spearman": rho, "n_common": len(ours)})
    io.write_json(out / "ranking.json", payload)
    _write_config(out, args)
    return 0


def _write_partition(out: Path, name: str, node_ids, part: Partition) -> None:
    io.write_table_csv(
        out / name,
        ["node_id", "community"],
        [[node_ids[i], int(part.labels[i])] for i in range(len(node_ids))],
    )


def cmd_cluster(args) -> int:
    g = _load_graph(args)
    out = _outdir(args)
    payload: dict = {"dynamics": args.dynamics, "seed": args.seed}
    if args.spectral:
        if args.dynamics == "signed":
            matrix = signed_laplacian(g)
        elif args.dynamics == "diffusion":
            matrix = combinatorial_laplacian(g)
        elif args.dynamics == "rw":
            matrix = random_walk_laplacian(g)
        else:
            sys_ = _build_system(args, g)
            kind, t = _time_spec(args)
            if kind != "point":
                raise UsageError("spectral clustering of this dynamics needs --t")
            matrix = similarity_at(sys_, t)
        part = spectral_partition(matrix, c=args.c, k=args.k, seed=args.seed)
        payload.update({"method": "spectral", "c": args.c, "k": args.k})
    else:
        sys_ = _build_system(args, g)
        kind, t = _time_spec(args)
        if kind != "point":
            raise UsageError("--louvain clusters the similarity at a point time; pass --t")
        nu = _nu_uniform(sys_.output_dim)
        alpha = args.alpha if args.center else 0.0
        config = quality_config_from_system(sys_, t, nu, alpha)
        part = louvain_optimize(config, seed=args.seed)
        payload.update(
            {
                "method": "louvain",
                "t": t,
                "alpha": alpha,
                "quality": quality_value(config, part),
            }
        )
    payload["n_communities"] = part.k
    _write_partition(out, "partition.csv", g.node_ids, part)
    io.write_json(out / "cluster.json", payload)
    _write_config(out, args)
    return 0


def cmd_scan(args) -> int:
    g = _load_graph(args)
    sys_ = _build_system(args, g)
    if args.tmin <= 0 or args.tmax <= args.tmin:
        raise UsageError("need 0 < tmin < tmax")
    times = np.geomspace(args.tmin, args.tmax, args.npoints)
    nu = _nu_uniform(sys_.output_dim)
    scan = time_scan(
        sys_,
        times,
        nu=nu,
        alpha=args.alpha,
        seeds=args.seeds,
        base_seed=args.seed,
        max_workers=_max_workers(),
    )
    out = _outdir(args)
    io.write_matrix_csv(out / "vi.csv", scan.vi_matrix, [repr(t) for t in scan.times])
    io.write_json(
        out / "scan.json",
        {
            "times": list(scan.times),
            "n_communities": list(scan.n_communities),
            "plateaus": [
                {
                    "t_start": p.t_start,
                    "t_stop": p.t_stop,
                    "n_communities": p.n_communities,
                    "mean_vi": p.mean_vi,
                }
                for p in scan.plateaus
            ],
            "best_partitions": {
                repr(t): [int(x) for x in scan.best[i].labels]
                for i, t in enumerate(scan.times)
            },
            "node_ids": list(g.node_ids),
        },
    )
    _write_config(out, args)
    return 0


def _load_params(args) -> LifParams:
    if args.params:
        return LifParams.from_json(Path(args.params).read_text("utf-8"))
    if getattr(args, "preset", "default") == "toy40":
        return LifParams().scaled(2, 16, 4)
    return LifParams()


def cmd_lif_gen(args) -> int:
    params = _load_params(args)
    W, planted = generate_assembly_network(params, seed=args.seed)
    out = _outdir(args)
    ids = [str(i) for i in range(params.n)]
    io.write_matrix_csv(out / "W_N.csv", W, ids)
    _write_partition(out, "planted.csv", ids, planted)
    (out / "params.json").write_text(params.to_json() + "\n", encoding="utf-8")
    _write_config(out, args)
    return 0


def cmd_lif_sim(args) -> int:
    params = _load_params(args)
    if args.wn:
        _, W = io.read_matrix_csv(Path(args.wn))
    else:
        W, _ = generate_assembly_network(params, seed=args.seed)
    spikes = simulate_lif(W, params, duration=args.duration, seed=args.seed)
    out = _outdir(args)
    io.write_table_csv(
        out / "spikes.csv",
        ["time_ms", "neuron_id"],
        [[float(t), int(i)] for t, i in zip(spikes.times, spikes.neurons)],
    )
    io.write_json(
        out / "spikes.json",
        {"n_events": len(spikes), "duration_ms": spikes.duration, "n_neurons": spikes.n_neurons},
    )
    _write_config(out, args)
    return 0


def cmd_lif_validate(args) -> int:
    params = _load_params(args)
    report = validate_functional_recovery(
        params,
        network_seed=args.seed,
        seeds=args.seeds,
        base_seed=args.seed,
        max_workers=_max_workers(),
    )
    out = _outdir(args)
    payload = report.to_json()
    payload["recovered"] = report.plateau_found and report.n_exact >= args.seeds - 1
    payload["structural_partition"] = [
        int(x) for x in structural_partition(params).labels
    ]
    io.write_json(out / "validation.json", payload)
    _write_config(out, args)
    return 0


def _add_graph_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--edges", required=True, help="tab-separated edge list file")
    p.add_argument("--directed", action="store_true", help="treat edges as one-way")
    p.add_argument("--dynamics", choices=DYNAMICS, default="diffusion")
    p.add_argument("--teleport", type=float, default=None, metavar="TAU",
                   help="teleportation rate in [0,1) for directed diffusion")
    p.add_argument("--weighting", choices=("identity", "degree"), default="identity")


def _add_time_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t", type=float, default=None, help="point time")
    p.add_argument("--interval", type=float, default=None,
                   help="integrate over [0, X]; defaults to [0, 1] when --t is absent")
    p.add_argument("--center", action="store_true",
                   help="project out the uniform response component")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="strength of the projection term (1 = full centering)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynembed",
        description="Dynamical similarity, embeddings and module detection for networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("similarity", help="similarity and squared-distance matrices")
    _add_graph_options(p)
    _add_time_options(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("embed", help="spectral embedding coordinates")
    _add_graph_options(p)
    _add_time_options(p)
    p.add_argument("--c", type=int, required=True, help="retained dimensions")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("rank", help="rank nodes by one embedding coordinate")
    _add_graph_options(p)
    _add_time_options(p)
    p.add_argument("--dim", type=int, default=1, help="1-based coordinate to rank by")
    p.add_argument("--reference", default=None, help="reference ranking CSV for Spearman")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("cluster", help="spectral or Louvain partition")
    _add_graph_options(p)
    _add_time_options(p)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--spectral", action="store_true")
    mode.add_argument("--louvain", action="store_true")
    p.add_argument("--c", type=int, default=2, help="eigenvectors (spectral)")
    p.add_argument("--k", type=int, default=2, help="groups (spectral)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("scan", help="multiscale Louvain scan over a time grid")
    _add_graph_options(p)
    p.add_argument("--tmin", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--npoints", type=int, default=12)
    p.add_argument("--seeds", type=int, default=4, help="Louvain runs per time")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("lif-gen", help="generate a planted-assembly coupling matrix")
    p.add_argument("--params", default=None, help="LifParams JSON file")
    p.add_argument("--preset", choices=("default", "toy40"), default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_lif_gen)

    p = sub.add_parser("lif-sim", help="simulate the spiking network")
    p.add_argument("--wn", default=None, help="coupling matrix CSV (default: generate)")
    p.add_argument("--params", default=None)
    p.add_argument("--preset", choices=("default", "toy40"), default="default")
    p.add_argument("--duration", type=float, required=True, help="milliseconds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_lif_sim)

    p = sub.add_parser("lif-validate", help="planted-assembly recovery pipeline")
    p.add_argument("--params", default=None)
    p.add_argument("--preset", choices=("default", "toy40"), default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=10, help="Louvain runs per time")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_lif_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"dynembed {args.command}: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"dynembed {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
