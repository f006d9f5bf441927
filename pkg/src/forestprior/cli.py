"""Command-line entry point: simulate, fit, evaluate, experiment, replay.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver did not
converge (results are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import CopulaSpec, GraphGenSpec, MultiGraphSpec, gen_graph, gen_multi
from .density import KernelConfig, holdout_term_matrix, weight_matrix
from .errors import ConfigurationError, ContractError, DataError, EstimationError, ForestPriorError
from .evaluation import common_edges, f1_score, holdout_loglik, tune
from .experiments import StudySettings, mean_by_method, run_study, simulate_split
from .forest import Forest
from .io import (
    ensure_dir,
    file_digest,
    read_dataset_csv,
    read_edges_tsv,
    write_dataset_csv,
    write_dot,
    write_edges_tsv,
    write_weights_tsv,
)
from .solvers import PriorConfig, fit_fde, fit_joint, fit_scalefree, lambda_grid

log = logging.getLogger("forestprior")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3
THREADS_ENV = "FORESTPRIOR_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return os.cpu_count() or 1


def _bandwidth(value: str):
    try:
        return float(value)
    except ValueError:
        return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="forestprior", description="Forest density estimation with graph priors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw graphs and tree-copula data")
    s.add_argument("--graph", choices=["stars", "scale-free"], required=True)
    s.add_argument("--stars", type=int, help="number of stars (stars graph)")
    s.add_argument("--star-size", type=int, help="vertices per star (stars graph)")
    s.add_argument("--d", type=int, help="vertex count (scale-free graph)")
    s.add_argument("--alpha-pa", type=float, default=1.5, help="preferential attachment exponent")
    s.add_argument("--seed-chain", type=int, default=4, help="length of the initial chain")
    s.add_argument("--copula", choices=["gaussian", "t"], default="gaussian")
    s.add_argument("--rho", type=float, help="copula correlation (default 0.4 gaussian, 0.25 t)")
    s.add_argument("--nu", type=float, default=1.0, help="t copula degrees of freedom")
    s.add_argument("--n", type=int, default=200, help="training samples per unit")
    s.add_argument("--n-holdout", type=int, default=100, help="held-out samples per unit")
    s.add_argument("--units", type=int, default=1, help="number of related graphs K")
    s.add_argument("--shared-size", type=int, help="shared core size (scale-free, K > 1)")
    s.add_argument("--shared-stars", type=int, help="number of shared stars (stars, K > 1)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".", help="output directory")

    f = sub.add_parser("fit", help="estimate forests from training CSVs")
    f.add_argument("train", nargs="+", help="training CSV, one per unit")
    f.add_argument("--holdout", nargs="+", help="held-out CSV per unit (same order)")
    f.add_argument("--method", choices=["fde", "sf", "joint"], default="fde")
    f.add_argument("--lambda", dest="lam", type=float, help="fixed penalty (skips tuning)")
    f.add_argument("--lambda-grid", help="'auto' or comma-separated penalties")
    f.add_argument("--tune", choices=["held-out", "oracle"], default="held-out")
    f.add_argument("--truth", nargs="+", help="true edge lists per unit (oracle tuning, scoring)")
    f.add_argument("--alpha", type=float, default=1.0, help="Beta prior shape alpha")
    f.add_argument("--beta", type=float, default=1.0, help="Beta prior shape beta")
    f.add_argument("--max-iters", type=int, default=50)
    f.add_argument("--convergence", choices=["edge-set", "objective"], default="edge-set")
    f.add_argument("--tol", type=float, default=1e-8, help="objective-delta tolerance")
    f.add_argument("--kernel", choices=["gaussian", "epanechnikov"], default="gaussian")
    f.add_argument("--h1", type=_bandwidth, default="silverman", help="univariate bandwidth or 'silverman'")
    f.add_argument("--h2", type=_bandwidth, default="scott", help="bivariate bandwidth or 'scott'")
    f.add_argument("--grid-points", type=int, default=100)
    f.add_argument("--floor", type=float, default=1e-10)
    f.add_argument("--discrete", action="store_true", help="integer codes; empirical MI")
    f.add_argument("--colors", help="CSV of label,color for DOT output")
    f.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or all cores)")
    f.add_argument("--out", default=".", help="output directory")

    e = sub.add_parser("evaluate", help="score estimated edge lists against truth")
    e.add_argument("--estimated", nargs="+", required=True)
    e.add_argument("--truth", nargs="+", required=True)
    e.add_argument("--out", default="scores.csv", help="aggregate CSV path")

    x = sub.add_parser("experiment", help="replicated simulation comparing FDE with SF-FDE or J-FDE")
    x.add_argument("--study", choices=["hubs", "multi"], default="hubs")
    x.add_argument("--graph", choices=["stars", "scale-free"], default="stars")
    x.add_argument("--copula", choices=["gaussian", "t"], default="gaussian")
    x.add_argument("--rho", type=float)
    x.add_argument("--nu", type=float, default=1.0)
    x.add_argument("--n", type=int, default=200)
    x.add_argument("--n-holdout", type=int, default=100)
    x.add_argument("--reps", type=int, default=10)
    x.add_argument("--tuning", choices=["oracle", "held-out"], default="oracle")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out", default="summary.csv")

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest and compare outputs")
    r.add_argument("manifest")
    r.add_argument("--out", help="write outputs here instead of the recorded directory")
    return p


def _manifest(path: Path, args, argv, config: dict, inputs, outputs) -> None:
    doc = {
        "tool": "forestprior",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "config": config,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {Path(p).name: file_digest(p) for p in outputs},
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _unit_prefix(k: int, K: int) -> str:
    return f"unit{k + 1}_" if K > 1 else ""


def cmd_simulate(args, argv) -> int:
    K = args.units
    if K < 1:
        raise UsageError("--units must be >= 1")
    family = "gaussian" if args.copula == "gaussian" else "student_t"
    rho = args.rho if args.rho is not None else (0.4 if family == "gaussian" else 0.25)
    if args.graph == "stars":
        if args.stars is None or args.star_size is None:
            raise UsageError("--graph stars requires both --stars and --star-size")
        d = args.stars * args.star_size
        if args.d is not None and args.d != d:
            raise UsageError(f"--d {args.d} conflicts with --stars x --star-size = {d}")
        gspec = GraphGenSpec(kind="stars", d=d, num_stars=args.stars, star_size=args.star_size, rng_seed=args.seed)
        if K > 1 and args.shared_stars is None:
            raise UsageError("--units > 1 with --graph stars requires --shared-stars")
    else:
        if args.d is None:
            raise UsageError("--graph scale-free requires --d")
        gspec = GraphGenSpec(
            kind="scale_free", d=args.d, alpha_pa=args.alpha_pa, seed_chain_len=args.seed_chain, rng_seed=args.seed
        )
        if K > 1 and args.shared_size is None:
            raise UsageError("--units > 1 with --graph scale-free requires --shared-size")
    CopulaSpec(family=family, rho=rho, nu=args.nu, n=args.n + args.n_holdout)
    if args.n < 2 or args.n_holdout < 1:
        raise UsageError("need --n >= 2 and --n-holdout >= 1")

    seeds = [int(s) for s in np.random.SeedSequence(args.seed).generate_state(K + 1)]
    if K == 1:
        truths = [gen_graph(gspec)]
    else:
        truths = gen_multi(
            MultiGraphSpec(
                K=K, base=gspec, shared_size=args.shared_size or gspec.d, shared_stars=args.shared_stars or 0,
                rng_seed=seeds[0],
            )
        )
    out = ensure_dir(args.out)
    outputs = []
    for k, truth in enumerate(truths):
        train, hold = simulate_split(truth, family, rho, args.nu, args.n, args.n_holdout, seeds[k + 1])
        pre = _unit_prefix(k, K)
        for name, obj in ((f"{pre}train.csv", train), (f"{pre}holdout.csv", hold)):
            write_dataset_csv(out / name, obj)
            outputs.append(out / name)
        write_edges_tsv(out / f"{pre}truth.tsv", truth, train.column_names)
        outputs.append(out / f"{pre}truth.tsv")
        log.info("unit %d: d=%d, %d true edges", k + 1, truth.d, len(truth))
    config = {
        "graph": gspec.__dict__,
        "copula": {"family": family, "rho": rho, "nu": args.nu, "n": args.n, "n_holdout": args.n_holdout},
        "units": K,
        "shared_size": args.shared_size,
        "shared_stars": args.shared_stars,
        "seed": args.seed,
        "unit_seeds": seeds,
    }
    _manifest(out / "manifest.json", args, argv, config, [], outputs)
    print(f"wrote {len(outputs)} files for {K} unit(s), d={truths[0].d} to {out}")
    return EXIT_OK


def _parse_grid(spec: str | None):
    if spec is None or spec == "auto":
        return "auto"
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--lambda-grid must be 'auto' or comma-separated numbers, got {spec!r}") from None


def _read_colors(path):
    colors = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if len(row) >= 2:
                colors[row[0]] = row[1]
    return colors


def cmd_fit(args, argv) -> int:
    K = len(args.train)
    if args.method == "joint" and K < 2:
        raise UsageError("--method joint needs at least 2 training files")
    if args.holdout and len(args.holdout) != K:
        raise UsageError(f"{len(args.holdout)} --holdout files for {K} training files")
    if args.truth and len(args.truth) != K:
        raise UsageError(f"{len(args.truth)} --truth files for {K} training files")
    penalized = args.method in ("sf", "joint")
    grid = None if args.lam is not None else _parse_grid(args.lambda_grid) if penalized else None
    tune_mode = "oracle" if args.tune == "oracle" else "held_out"
    if grid is not None:
        if tune_mode == "held_out" and not args.holdout:
            raise UsageError("held-out tuning requires --holdout")
        if tune_mode == "oracle" and not args.truth:
            raise UsageError("--tune oracle requires --truth")
    try:
        kcfg = KernelConfig(args.kernel, args.h1, args.h2, args.grid_points, args.floor)
        prior = PriorConfig(
            lam=args.lam or 0.0, alpha=args.alpha, beta=args.beta, max_iters=args.max_iters,
            convergence="edge_set" if args.convergence == "edge-set" else "objective", tol=args.tol,
        )
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from exc
    threads = args.threads or default_threads()
    mode = "discrete" if args.discrete else "kde"

    trains = [read_dataset_csv(p, args.discrete) for p in args.train]
    holds = [read_dataset_csv(p, args.discrete) for p in args.holdout] if args.holdout else None
    labels = trains[0].column_names
    for p, ds in zip(args.train[1:], trains[1:]):
        if ds.column_names != labels:
            raise DataError(f"{p}: columns differ from {args.train[0]}")
    truths = None
    if args.truth:
        truths = []
        for p in args.truth:
            tl, tf = read_edges_tsv(p, labels)
            _check_labels(labels, tl, args.train[0], p)
            truths.append(tf)

    weights = [weight_matrix(ds, kcfg, mode, threads) for ds in trains]
    terms = [holdout_term_matrix(t, h, kcfg, mode, threads) for t, h in zip(trains, holds)] if holds else None
    unit_terms = terms if terms else [None] * K

    tuned = None
    lam_used = prior.lam
    if args.method == "fde":
        fits = [fit_fde(w, t) for w, t in zip(weights, unit_terms)]
    elif args.method == "sf":
        fits, tuned = [], []
        for k, (w, t) in enumerate(zip(weights, unit_terms)):
            if grid is None:
                fits.append(fit_scalefree(w, prior, t))
                tuned.append(None)
                continue
            lams = lambda_grid(w) if grid == "auto" else grid
            tr = tune(
                lambda lam, w=w, t=t: fit_scalefree(w, prior.with_lambda(lam), t),
                lams, tune_mode, holdout_terms=t, truth=truths[k] if truths else None,
            )
            fits.append(tr.result)
            tuned.append(tr)
    else:
        if grid is None:
            fits = fit_joint(weights, prior, terms)
        else:
            lams = lambda_grid(weights) if grid == "auto" else grid
            tr = tune(lambda lam: fit_joint(weights, prior.with_lambda(lam), terms), lams, tune_mode,
                      holdout_terms=terms, truth=truths)
            fits, lam_used = tr.result, tr.best_lambda
            tuned = [tr] * K

    out = ensure_dir(args.out)
    colors = _read_colors(args.colors) if args.colors else None
    outputs = []
    shared = common_edges([f.pruned for f in fits]) if K > 1 else frozenset()
    for k, (path, fit, w) in enumerate(zip(args.train, fits, weights)):
        stem = Path(path).stem
        doc = fit.to_dict(labels, w)
        doc["train"] = Path(path).name
        tr = tuned[k] if tuned else None
        if tr is not None:
            doc["selected_lambda"] = tr.best_lambda
            doc["lambda_grid"] = tr.grid
            doc["grid_scores"] = tr.scores
            doc["tuning"] = tune_mode
        elif penalized:
            doc["selected_lambda"] = lam_used
        if terms:
            doc["holdout_loglik"] = holdout_loglik(fit.pruned, terms[k])
        if truths:
            doc["score"] = f1_score(fit.pruned, truths[k]).to_dict()
        (out / f"{stem}.result.json").write_text(json.dumps(doc, indent=2) + "\n")
        write_edges_tsv(out / f"{stem}.forest.tsv", fit.pruned, labels, w)
        write_edges_tsv(out / f"{stem}.tree.tsv", fit.tree, labels, w)
        write_weights_tsv(out / f"{stem}.weights.tsv", w)
        write_dot(out / f"{stem}.dot", fit.pruned, labels, colors, shared)
        outputs += [out / f"{stem}{ext}" for ext in (".result.json", ".forest.tsv", ".tree.tsv", ".weights.tsv", ".dot")]
        print(
            f"{stem}: tree {len(fit.tree)} edges, pruned {len(fit.pruned)} edges, "
            f"{fit.iterations} iteration(s), {fit.stop_reason}"
        )
    if K > 1:
        write_edges_tsv(out / "common_edges.tsv", Forest(fits[0].pruned.d, shared), labels)
        outputs.append(out / "common_edges.tsv")
        print(f"common edges across {K} units: {len(shared)}")
    config = {
        "method": args.method,
        "kernel": kcfg.__dict__,
        "bandwidths": {lb: kcfg.bandwidths(trains[0].column(i)) for i, lb in enumerate(labels)}
        if mode == "kde" else None,
        "prior": prior.__dict__,
        "lambda": [t.best_lambda if t else lam_used for t in tuned] if tuned else lam_used,
        "tuning": tune_mode if grid is not None else None,
        "mode": mode,
    }
    inputs = list(args.train) + list(args.holdout or []) + list(args.truth or [])
    _manifest(out / "manifest.json", args, argv, config, inputs, outputs)
    if not all(f.converged for f in fits):
        log.warning("solver stopped at max_iters without converging")
        return EXIT_NONCONVERGED
    return EXIT_OK


def _check_labels(expected, got, ref_name, name):
    if list(got) != list(expected):
        missing = sorted(set(expected) - set(got))
        extra = sorted(set(got) - set(expected))
        detail = f"missing {missing}, unexpected {extra}" if missing or extra else "same labels in a different order"
        raise DataError(f"{name}: vertex labels differ from {ref_name}: {detail}")


def cmd_evaluate(args, argv) -> int:
    if len(args.estimated) != len(args.truth):
        raise UsageError(f"{len(args.estimated)} estimated files for {len(args.truth)} truth files")
    rows = []
    for k, (ep, tp) in enumerate(zip(args.estimated, args.truth)):
        tl, tf = read_edges_tsv(tp)
        el, ef = read_edges_tsv(ep, tl)
        if sorted(el) != sorted(tl):
            _check_labels(tl, el, tp, ep)
        if el != tl:
            # same vertex set, different order: re-index the estimate
            pos = {lb: i for i, lb in enumerate(tl)}
            ef = Forest.from_edges(len(tl), [(pos[el[i]], pos[el[j]]) for i, j in ef.edges])
        rep = f1_score(ef, tf)
        rows.append({"unit": k + 1, "estimated": ep, "truth": tp, **rep.to_dict()})
    fields = ["unit", "estimated", "truth", "true_positive", "false_positive", "false_negative",
              "precision", "recall", "f1"]
    mean = {"unit": "mean", "estimated": "", "truth": ""}
    for key in fields[3:]:
        mean[key] = float(np.mean([r[key] for r in rows]))
    out = Path(args.out)
    if out.parent:
        ensure_dir(out.parent)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        writer.writerow(mean)
    reports = out.with_suffix(".json")
    reports.write_text(json.dumps(rows, indent=2) + "\n")
    for r in rows:
        print(f"unit {r['unit']}: precision {r['precision']:.4f} recall {r['recall']:.4f} f1 {r['f1']:.4f}")
    print(f"mean f1 {mean['f1']:.4f} over {len(rows)} unit(s)")
    return EXIT_OK


def cmd_experiment(args, argv) -> int:
    family = "gaussian" if args.copula == "gaussian" else "student_t"
    rho = args.rho if args.rho is not None else (0.4 if family == "gaussian" else 0.25)
    settings = StudySettings(
        graph="stars" if args.graph == "stars" else "scale_free",
        family=family, rho=rho, nu=args.nu, n=args.n, n_holdout=args.n_holdout,
        tuning="oracle" if args.tuning == "oracle" else "held_out",
    )
    rows = run_study(settings, args.study, args.reps, args.seed)
    fields = ["rep", "method", "f1", "precision", "recall", "lam", "holdout_loglik"]
    if args.study == "multi":
        fields.append("common_edges")
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    for method, value in mean_by_method(rows).items():
        print(f"{method}: mean f1 {value:.4f} over {args.reps} replication(s)")
    return EXIT_OK


def _replace_out(argv: list[str], out: str) -> list[str]:
    argv = list(argv)
    if "--out" in argv:
        argv[argv.index("--out") + 1] = out
    else:
        argv += ["--out", out]
    return argv


def cmd_replay(args, argv) -> int:
    try:
        doc = json.loads(Path(args.manifest).read_text())
    except (OSError, ValueError) as exc:
        raise DataError(f"{args.manifest}: cannot read manifest ({exc})") from exc
    old = doc["argv"]
    out = os.path.abspath(args.out) if args.out else None
    cwd = os.getcwd()
    os.chdir(doc.get("cwd", cwd))
    try:
        for path, digest in doc.get("inputs", {}).items():
            if not os.path.exists(path) or file_digest(path) != digest:
                raise DataError(f"input {path} is missing or changed since the manifest was written")
        new_argv = _replace_out(old, out) if out else old
        code = main(new_argv)
        new_doc = json.loads((Path(_out_dir(new_argv)) / "manifest.json").read_text())
    finally:
        os.chdir(cwd)
    diff = sorted(k for k in doc["outputs"] if new_doc["outputs"].get(k) != doc["outputs"][k])
    if diff:
        print(f"outputs differ from the manifest: {diff}")
        return EXIT_DATA
    print(f"replayed '{doc['command']}': all {len(doc['outputs'])} output digests match")
    return code


def _out_dir(argv):
    return argv[argv.index("--out") + 1] if "--out" in argv else "."


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, EstimationError, ContractError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigurationError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ForestPriorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
