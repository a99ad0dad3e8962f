"""Command-line entry point: ``specaug <command> [options]``."""
import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from specaug import io
from specaug.augment import generate_view_pair
from specaug.contrastive import pretrain
from specaug.evaluation import (Dataset, extract_representations, hits_at_k, kfold_score)
from specaug.global_embed import DENSE_CAP, embed_graph
from specaug.graph import path_graph, product_graph
from specaug.sbm import (SbmSpec, block_eigenpairs, concentration_envelope, crop_fidelity_experiment,
                         davis_kahan_check, expectation_matrix, line_transformed_params,
                         quintile_report, sample_sbm)
from specaug.spectral import (LAPLACIAN_KINDS, NORMALIZED, UNNORMALIZED, eigen_residuals, laplacian,
                              path_closed_form, product_spectrum, spectral_embedding)


class CliError(Exception):
    pass


def _emit(record, stream=None):
    print(json.dumps(record, sort_keys=True), file=stream or sys.stdout)


def _load_graphs(paths):
    return [io.load_dataset(p).graph for p in paths]


def _run_config(args):
    try:
        cfg = io.load_run_config(args.config) if getattr(args, "config", None) else io.RunConfig()
    except io.ConfigError as exc:
        raise CliError(f"config error: {exc}") from None
    return cfg


# ---------------------------------------------------------------- commands

def cmd_spectra(args):
    if args.path_closed_form:
        n = args.path_closed_form
        g = path_graph(n)
        L = laplacian(g, UNNORMALIZED)
        emb = spectral_embedding(g, kind=UNNORMALIZED)
        expected = np.array([path_closed_form(n, k)[0] for k in range(n)])
        vec_err = max(min(np.linalg.norm(emb.eigenvectors[:, k] - path_closed_form(n, k)[1]),
                          np.linalg.norm(emb.eigenvectors[:, k] + path_closed_form(n, k)[1]))
                      for k in range(1, n))
        _emit({"check": "path_closed_form", "n": n,
               "max_eigenvalue_error": float(np.abs(emb.eigenvalues - expected).max()),
               "max_residual": float(eigen_residuals(L, emb.eigenvalues, emb.eigenvectors).max()),
               "max_eigenvector_error": float(vec_err)})
    if args.product:
        a, b = args.product
        ga, gb = path_graph(a), path_graph(b)
        got = spectral_embedding(product_graph(ga, gb), kind=UNNORMALIZED).eigenvalues
        want = product_spectrum(spectral_embedding(ga, kind=UNNORMALIZED).eigenvalues,
                                spectral_embedding(gb, kind=UNNORMALIZED).eigenvalues)
        _emit({"check": "product_spectrum", "a": a, "b": b,
               "max_error": float(np.abs(got - want).max())})
    if args.graph:
        g = io.load_dataset(args.graph).graph
        L = laplacian(g, args.kind)
        emb = spectral_embedding(g, args.k, args.kind)
        _emit({"graph": args.graph, "kind": args.kind, "num_nodes": g.num_nodes,
               "eigenvalues": emb.eigenvalues.tolist(),
               "max_residual": float(eigen_residuals(L, emb.eigenvalues, emb.eigenvectors).max())})
    if not (args.path_closed_form or args.product or args.graph):
        raise CliError("spectra needs --path-closed-form, --product or --graph")
    return 0


def cmd_augment(args):
    cfg = _run_config(args)
    aug = cfg.augment
    loaded = io.load_dataset(args.graph)
    g = loaded.graph
    glob = embed_graph(g, aug.embed_dim) if 2 <= g.num_nodes <= DENSE_CAP else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for center in args.centers:
        if not 0 <= center < g.num_nodes:
            raise CliError(f"center {center} outside the graph")
        pair = generate_view_pair(g, center, aug, glob, int(rng.integers(2 ** 63)))
        for tag, view in zip("ab", pair):
            stem = out / f"center{center}_{tag}"
            io.write_edge_list(stem.with_suffix(".edges"), view.graph, view.node_map)
            io.write_sge1(stem.with_suffix(".sge1"), view.features)
            Path(f"{stem}.nodes").write_text("".join(f"{v}\n" for v in view.node_map))
            _emit({"center": center, "view": tag, "num_nodes": view.num_nodes,
                   "num_edges": view.graph.num_edges, "history": list(view.history)})
    return 0


def cmd_pretrain(args):
    cfg = _run_config(args)
    seed = args.seed
    train = cfg.train
    overrides = {k: v for k, v in (("steps", args.steps), ("scheme", args.scheme),
                                    ("batch_size", args.batch_size)) if v is not None}
    if overrides:
        train = replace(train, **overrides)
    corpus = _load_graphs(args.graphs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = out / "metrics.jsonl"
    metrics.unlink(missing_ok=True)
    cfg.train, cfg.seed, cfg.output_dir = train, seed, str(out)
    (out / "config.ini").write_text(io.dump_run_config(cfg))
    with io.JsonlWriter(metrics) as writer:
        result = pretrain(corpus, train, cfg.augment, seed, workers=args.workers, callback=writer)
    io.save_checkpoint(out / "checkpoint.bin", result.params)
    last = result.records[-1]["loss"] if result.records else None
    _emit({"checkpoint": str(out / "checkpoint.bin"), "steps": len(result.records),
           "final_loss": last})
    return 0


def cmd_embed(args):
    params = io.load_checkpoint(args.checkpoint)
    if args.centers is not None or args.all_nodes:
        if len(args.graphs) != 1:
            raise CliError("node embedding takes exactly one --graphs file")
        g = io.load_dataset(args.graphs[0]).graph
        centers = range(g.num_nodes) if args.all_nodes else args.centers
        ds = Dataset([(g, int(c)) for c in centers], np.zeros(len(centers)), "node")
    else:
        graphs = _load_graphs(args.graphs)
        ds = Dataset(graphs, np.zeros(len(graphs)), "graph")
    reps = extract_representations(params, ds, radius=args.radius)
    io.write_sge1(args.out, reps)
    _emit({"embeddings": args.out, "rows": reps.shape[0], "cols": reps.shape[1]})
    return 0


def _read_row_labels(path, rows):
    labels = io.load_labels(path, rows)
    if (labels < 0).any():
        raise CliError(f"{path}: rows {np.flatnonzero(labels < 0)[:5].tolist()} have no label")
    return labels


def cmd_eval(args):
    X = io.read_sge1(args.embeddings).astype(np.float64)
    if args.hits:
        if not args.embeddings_b or not args.pairs:
            raise CliError("--hits needs --embeddings-b and --pairs")
        B = io.read_sge1(args.embeddings_b).astype(np.float64)
        pairs = io.parse_edge_list(Path(args.pairs).read_text(), args.pairs)
        for k in args.pool:
            _emit({"task": "hits", "metric": "hits@10", "pool": k,
                   "value": hits_at_k(X, B, pairs, k=k)})
        return 0
    if not args.labels:
        raise CliError("eval needs --labels (or --hits)")
    y = _read_row_labels(args.labels, X.shape[0])
    try:
        res = kfold_score(X, y, k=args.folds, metric=args.metric, rng_seed=args.seed, l2=args.l2)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    _emit(res.as_record(args.task))
    return 0


def cmd_sbm_verify(args):
    try:
        spec = SbmSpec(args.n, args.p, args.q, args.z)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    bs = block_eigenpairs(args.p, args.q, args.z)
    _emit({"check": "block_eigenpairs", "c_plus": bs.c_plus, "c_minus": bs.c_minus,
           "mu1": bs.mu1, "mu2": bs.mu2,
           "dense_eigenvalues": np.linalg.eigvalsh([[args.p, args.z], [args.z, args.q]])[::-1].tolist()})
    pp, qq, zz = line_transformed_params(args.p, args.q, args.z)
    _emit({"check": "line_transformed_params", "p_prime": pp, "q_prime": qq, "z_prime": zz})
    E = expectation_matrix(spec)
    seeds = np.random.SeedSequence(args.seed).spawn(args.draws + 1)
    ok = scaled_ok = env_ok = 0
    for s in seeds[:args.draws]:
        g, _ = sample_sbm(spec, s)
        r = davis_kahan_check(E, g.adjacency().toarray(), 2, block_size=args.n)
        ok += r.bound_satisfied
        scaled_ok += r.scaled_satisfied
        env_ok += r.op_norm <= concentration_envelope(args.p, args.n)
    _emit({"check": "davis_kahan", "draws": args.draws, "bound_satisfied": ok,
           "scaled_bound_satisfied": scaled_ok, "op_norm_within_envelope": env_ok})
    rep = crop_fidelity_experiment(spec, args.epsilon, args.centers, seeds[-1])
    _emit({"check": "crop_fidelity", "match_fraction": rep.match_fraction,
           "ego_match_fraction": rep.ego_match_fraction, "ties": rep.ties,
           "epsilon": rep.epsilon, "retries": rep.retries})
    return 0


def cmd_quintiles(args):
    graphs = _load_graphs(args.graphs)
    scores = np.loadtxt(args.scores, ndmin=1)
    try:
        rep = quintile_report(graphs, scores, args.kind)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    for i, (m, c, r) in enumerate(zip(rep.means, rep.counts, rep.lambda2_ranges)):
        _emit({"quintile": i + 1, "mean_score": float(m), "count": int(c),
               "lambda2_min": r[0], "lambda2_max": r[1]})
    return 0


# ---------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(prog="specaug",
                                     description="Spectral graph augmentations and pre-training.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    workers = dict(type=int, default=os.cpu_count() or 1,
                   help="processes for parallel stages (default: all cores)")

    p = sub.add_parser("spectra", help="eigen diagnostics and closed-form checks")
    p.add_argument("--path-closed-form", type=int, metavar="N")
    p.add_argument("--product", type=int, nargs=2, metavar=("A", "B"))
    p.add_argument("--graph")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--kind", choices=LAPLACIAN_KINDS, default=NORMALIZED)
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("augment", help="preview augmented view pairs")
    p.add_argument("--graph", required=True)
    p.add_argument("--centers", type=int, nargs="+", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("pretrain", help="contrastive pre-training")
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config")
    p.add_argument("--steps", type=int)
    p.add_argument("--scheme", choices=("e2e", "moco"))
    p.add_argument("--batch-size", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", **workers)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("embed", help="frozen representations to an SGE1 file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--centers", type=int, nargs="+")
    p.add_argument("--all-nodes", action="store_true")
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="k-fold classification or HITS@10")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--metric", choices=("accuracy", "macro_f1"), default="accuracy")
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--task", choices=("graph", "node"), default="graph")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hits", action="store_true")
    p.add_argument("--embeddings-b")
    p.add_argument("--pairs")
    p.add_argument("--pool", type=int, nargs="+", default=[20, 40])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sbm-verify", help="block-model theory checks")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--n", type=int, required=True, help="nodes per block")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--centers", type=int, default=50)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--draws", type=int, default=10)
    p.set_defaults(func=cmd_sbm_verify)

    p = sub.add_parser("quintiles", help="mean score per lambda_2 quintile")
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--kind", choices=LAPLACIAN_KINDS, default=NORMALIZED)
    p.set_defaults(func=cmd_quintiles)
    return parser


def run_cli(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CliError, io.FormatError, io.ConfigError, OSError) as exc:
        print(f"specaug {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
