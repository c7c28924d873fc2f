"""Command-line interface.

Every command prints a report of its full configuration (including the seed)
and its results. ``--format structured`` prints ``key=value`` lines followed by
one ``json=`` line holding the same report as a JSON object.

Exit codes: 0 success, 1 domain error (bad file, invalid request, no robust
counterfactual, failed reproduction), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import experiments
from .apds import DELTA_INIT, MAX_DOUBLINGS, SearchDivergedError, apds
from .enumeration import MAX_DEPTH, MAX_LEAVES, enumerate_shifts, provable_delta
from .evaluation import (Dataset, delta_e, evaluate, load_csv, noms_compare, shift_protocol,
                         split_halves, train)
from .evaluation.data import read_matrix, read_vector
from .evaluation.lof import LOF_K, LOF_THRESHOLD
from .evaluation.noms import ALTERNATIVES
from .evaluation.training import TrainingDivergedError
from .generation import (MARGIN, RELAXATION, TAU, CfxRequest, RobustCounterfactualExplainer,
                         generate_robust_cfx)
from .network import THRESHOLD, ModelFormatError, Network, load_model, save_model
from .reduction import DimacsError, brute_force_sat, build_reduction, parse_dimacs, realizable
from .sampling import default_mask
from .zoo import enumeration_network, linear_network, two_relu_network

SEED_ENV = "ROBUSTCFX_SEED"
BUILTIN_MODELS = {
    "two-relu": two_relu_network,
    "enumeration-example": enumeration_network,
    "linear": linear_network,
}


class DomainError(Exception):
    pass


class UsageError(Exception):
    pass


# -- reporting ----------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _flatten(prefix: str, value, out: list[tuple[str, object]]):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}", v, out)
    else:
        out.append((prefix, value))


def render(command: str, config: dict, results: dict, fmt: str) -> str:
    config, results = _jsonable(config), _jsonable(results)
    if fmt == "structured":
        pairs = [("command", command)]
        _flatten("config", config, pairs)
        _flatten("result", results, pairs)
        lines = [f"{k}={json.dumps(v) if isinstance(v, (list, dict)) else v}" for k, v in pairs]
        doc = {"command": command, "config": config, "results": results}
        lines.append("json=" + json.dumps(doc, sort_keys=True))
        return "\n".join(lines)
    lines = [f"robustcfx {command}", "config:"]
    lines += [f"  {k}: {v}" for k, v in config.items()]
    lines.append("results:")
    for k, v in results.items():
        if isinstance(v, dict):
            lines.append(f"  {k}:")
            lines += [f"    {a}: {b}" for a, b in v.items()]
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            lines.append(f"  {k}:")
            lines += ["    " + "  ".join(f"{a}={b:.6g}" if isinstance(b, float) else f"{a}={b}"
                                         for a, b in row.items()) for row in v]
        else:
            lines.append(f"  {k}: {v}")
    return "\n".join(lines)


# -- argument helpers ------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _load_net(spec: str) -> Network:
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN_MODELS:
            raise DomainError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTIN_MODELS)}")
        return BUILTIN_MODELS[name]()
    return load_model(spec)


def _input(args, net: Network) -> np.ndarray:
    x = np.asarray(args.input if args.input is not None else read_vector(args.input_file))
    if x.size != net.input_dim:
        raise DomainError(f"input has {x.size} features, model expects {net.input_dim}")
    return x


def _mask(args, net: Network):
    choice = getattr(args, "perturb_biases", "auto")
    return default_mask(net, None if choice == "auto" else choice == "yes")


def _dataset_for(net: Network, path) -> Dataset:
    ds = load_csv(path)
    norm = net.metadata.get("normalization")
    if norm:
        lo, hi = np.asarray(norm["min"], float), np.asarray(norm["max"], float)
        if lo.size != ds.n_features:
            raise DomainError("dataset features do not match the model's normalization block")
        ds = Dataset(ds.X, ds.y, ds.feature_names, lo, hi)
    if ds.n_features != net.input_dim:
        raise DomainError(f"dataset has {ds.n_features} features, model expects {net.input_dim}")
    return ds


# -- commands -------------------------------------------------------------------

def cmd_apds(args):
    net = _load_net(args.model)
    x = _input(args, net)
    alpha = None if args.miss is not None else args.alpha
    res = apds(net, x, alpha, args.r, args.seed, miss=args.miss, n=args.n, mask=_mask(args, net),
               delta_init=args.delta_init, max_doublings=args.max_doublings)
    return {"x": x, "output": net.forward(x), **res.as_dict()}


def cmd_enumerate(args):
    net = _load_net(args.model)
    x = _input(args, net)
    if not args.delta > 0:
        raise DomainError(f"--delta must be positive, got {args.delta}")
    rep = enumerate_shifts(net, x, args.delta, max_depth=args.max_depth,
                           max_leaves=args.max_leaves, mask=_mask(args, net))
    return {"x": x, "output": net.forward(x), **rep.as_dict()}


def cmd_provable_delta(args):
    net = _load_net(args.model)
    x = _input(args, net)
    d = provable_delta(net, x, max_depth=args.max_depth, max_leaves=args.max_leaves,
                       mask=_mask(args, net), seed=args.seed)
    return {"x": x, "output": net.forward(x), "provable_delta": d}


def cmd_generate(args):
    net = _load_net(args.model)
    ds = _dataset_for(net, args.dataset)
    Xn = ds.Xn
    if not 0 <= args.input_row < Xn.shape[0]:
        raise DomainError(f"--input-row must lie in 0..{Xn.shape[0] - 1}")
    x = Xn[args.input_row]
    if net.forward(x) >= THRESHOLD:
        raise DomainError(f"row {args.input_row} is already classified 1; nothing to explain")
    req = CfxRequest(x, args.delta, args.alpha, args.r, args.seed, initial_budget=args.initial_budget,
                     relaxation=args.relaxation, tau=args.tau, margin=args.margin,
                     mask=_mask(args, net))
    bounds = None if args.no_clamp else (Xn.min(axis=0), Xn.max(axis=0))
    res = generate_robust_cfx(req, net, Xn, bounds=bounds)
    out = {"x": x, "output": net.forward(x), **res.as_dict()}
    if res.x_prime is not None:
        out["x_prime_raw"] = ds.denormalize(res.x_prime)
        out["output_prime"] = net.forward(res.x_prime)
    if not res.robust:
        raise DomainError(res.reason or "no robust CFX can be found", out)
    return out


def cmd_train(args):
    ds = load_csv(args.dataset)
    hyper = {"epochs": args.epochs, "learning_rate": args.lr, "batch_size": args.batch_size}
    arch = tuple(args.arch)
    if args.shifted_out:
        d1, d2 = split_halves(ds, args.seed)
        base, shifted = shift_protocol(d1, d2, arch, hyper, args.seed)
        save_model(base.network, args.out)
        save_model(shifted.network, args.shifted_out)
        return {"base_accuracy": base.training_accuracy, "shifted_accuracy": shifted.training_accuracy,
                "base_loss": base.loss_curve[-1] if base.loss_curve else None,
                "delta_e": delta_e(base.network, shifted.network),
                "base_rows": int(d1.X.shape[0]), "shifted_rows": int(ds.X.shape[0])}
    res = train(ds, arch, hyper, args.seed)
    save_model(res.network, args.out)
    return {"training_accuracy": res.training_accuracy,
            "final_loss": res.loss_curve[-1] if res.loss_curve else None, "rows": int(ds.X.shape[0])}


def cmd_evaluate(args):
    base, shifted = _load_net(args.base), _load_net(args.shifted)
    ds = _dataset_for(base, args.dataset)
    Xn = ds.Xn
    if args.cfx:
        C = read_matrix(args.cfx)
        if not args.inputs:
            raise UsageError("--cfx requires --inputs (the original rows, same order)")
        X = read_matrix(args.inputs)
        failed = 0
    else:
        X = Xn[base.predict_output(Xn) < THRESHOLD][:args.n_cfx]
        if X.shape[0] == 0:
            raise DomainError("no rows classified 0 by the base model")
        ex = RobustCounterfactualExplainer(base, args.delta, args.alpha, args.r, seed=args.seed)
        res = ex.fit(Xn).explain(X)
        keep = np.array([r.robust for r in res])
        failed = int((~keep).sum())
        if not keep.any():
            raise DomainError("no robust counterfactual was found for any row")
        X, C = X[keep], np.vstack([r.x_prime for r in res if r.robust])
    rep = evaluate(X, C, base, shifted, Xn, k=args.lof_k, threshold=args.lof_threshold)
    return {**rep.as_dict(), "generation_failures": failed}


def cmd_noms_compare(args):
    net = _load_net(args.model)
    C = read_matrix(args.cfx) if args.cfx else np.atleast_2d(args.input)
    if C.size == 0 or C.shape[1] != net.input_dim:
        raise DomainError(f"counterfactual rows must have {net.input_dim} features")
    rows = noms_compare(net, C, args.deltas, args.n, args.seed, mask=_mask(args, net),
                        alternative=args.alternative, test_alpha=args.test_alpha)
    return {"table": [vars(r) for r in rows]}


def cmd_reduce(args):
    try:
        text = Path(args.cnf).read_text()
    except OSError as exc:
        raise DomainError(str(exc)) from None
    cnf = parse_dimacs(text)
    g = build_reduction(cnf, args.delta)
    out = {"n_vars": cnf.n_vars, "n_clauses": cnf.n_clauses, "layers": len(g.net.layers),
           "params": g.net.n_params, "perturbed_params": int(g.mask.sum()),
           "centre_output": g.centre_output}
    if args.out:
        meta = dict(g.net.metadata)
        meta.update({"interval_halfwidth": g.delta, "shift_mask": g.mask.astype(int).tolist(),
                     "cnf": cnf.to_dimacs(), "input": g.x.tolist()})
        save_model(Network(g.net.layers, meta), args.out)
        out["model"] = args.out
    if args.check:
        if cnf.n_vars > 6:
            raise DomainError("--check is limited to formulas with at most 6 variables")
        sat, real = brute_force_sat(cnf), realizable(g)
        out.update({"satisfiable": sat is not None, "realizable": real is not None,
                    "equivalent": (sat is None) == (real is None),
                    "witness": list(real) if real is not None else None})
        if not out["equivalent"]:
            raise DomainError("satisfiability and realizability disagree", out)
    return out


def cmd_reproduce(args):
    tol = json.loads(Path(args.tolerances).read_text()) if args.tolerances \
        else experiments.load_tolerances()
    ids = experiments.EXPERIMENTS if args.experiment == "all" else (args.experiment,)
    results, ok = {}, True
    for e in ids:
        o = experiments.reproduce(e, tol)
        results[e] = {"status": "PASS" if o.passed else "FAIL", **o.metrics}
        print(f"{'PASS' if o.passed else 'FAIL'} {e}", file=sys.stderr)
        ok &= o.passed
    results["tolerances_version"] = tol.get("version")
    if not ok:
        raise DomainError("one or more experiments failed their acceptance bound", results)
    return results


# -- parser -------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, seed: int):
    g = p.add_argument_group("common")
    g.add_argument("--format", choices=("human", "structured"), default="human")
    g.add_argument("--seed", type=int, default=seed,
                   help=f"RNG seed (default from ${SEED_ENV}, else 0)")
    g.add_argument("--threads", type=int, default=None, help="cap BLAS/OpenMP worker threads")
    g.add_argument("--output", help="also write the JSON report to this file")


def _model_input(p, shift=True):
    p.add_argument("--model", required=True, help="model JSON file or builtin:NAME")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=_floats, help="comma-separated feature values")
    src.add_argument("--input-file", help="CSV file whose first numeric row is the input")
    if shift:
        p.add_argument("--perturb-biases", choices=("auto", "yes", "no"), default="auto",
                       help="auto follows the model metadata")


def build_parser(seed: int = 0) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustcfx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("apds", help="sampled search for the largest tolerable shift")
    _model_input(p)
    p.add_argument("--alpha", type=float, default=0.999)
    p.add_argument("--r", type=float, default=0.995)
    p.add_argument("--miss", type=float, help="1 - alpha given directly (overrides --alpha)")
    p.add_argument("--n", type=int, help="samples per test (default: Wilks size)")
    p.add_argument("--delta-init", type=float, default=DELTA_INIT)
    p.add_argument("--max-doublings", type=int, default=MAX_DOUBLINGS)
    p.set_defaults(func=cmd_apds)

    p = sub.add_parser("enumerate", help="exact volume split of a shift box")
    _model_input(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--max-depth", type=int, default=MAX_DEPTH)
    p.add_argument("--max-leaves", type=int, default=MAX_LEAVES)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("provable-delta", help="largest shift proven robust for every realization")
    _model_input(p)
    p.add_argument("--max-depth", type=int, default=MAX_DEPTH)
    p.add_argument("--max-leaves", type=int, default=MAX_LEAVES)
    p.set_defaults(func=cmd_provable_delta)

    p = sub.add_parser("generate", help="robust counterfactual for one dataset row")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--input-row", type=int, required=True, help="0-based data row")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--alpha", type=float, default=0.999)
    p.add_argument("--r", type=float, default=0.995)
    p.add_argument("--tau", type=int, default=TAU)
    p.add_argument("--relaxation", type=float, default=RELAXATION)
    p.add_argument("--margin", type=float, default=MARGIN)
    p.add_argument("--initial-budget", type=float)
    p.add_argument("--no-clamp", action="store_true", help="do not clamp to feature ranges")
    p.add_argument("--perturb-biases", choices=("auto", "yes", "no"), default="auto")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a classifier (optionally the base/shifted pair)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--shifted-out", help="train on half the data to --out and on all of it here")
    p.add_argument("--arch", type=_ints, default=[20, 10])
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="VM1, VM2, proximity, plausibility and delta_e")
    p.add_argument("--dataset", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--shifted", required=True)
    p.add_argument("--cfx", help="CSV of counterfactual rows (normalized space)")
    p.add_argument("--inputs", help="CSV of the original rows matching --cfx")
    p.add_argument("--n-cfx", type=int, default=50)
    p.add_argument("--delta", type=float, default=0.02)
    p.add_argument("--alpha", type=float, default=0.999)
    p.add_argument("--r", type=float, default=0.995)
    p.add_argument("--lof-k", type=int, default=LOF_K)
    p.add_argument("--lof-threshold", type=float, default=LOF_THRESHOLD)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("noms-compare", help="mean-shift table under uniform parameter shifts")
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--cfx", help="CSV of counterfactual rows")
    src.add_argument("--input", type=_floats, help="a single counterfactual")
    p.add_argument("--deltas", type=_floats, default=[0.05, 0.1, 0.2, 0.3])
    p.add_argument("--n", type=_ints, default=[1000, 10000])
    p.add_argument("--alternative", choices=ALTERNATIVES, default="auto")
    p.add_argument("--test-alpha", type=float, default=0.05)
    p.add_argument("--perturb-biases", choices=("auto", "yes", "no"), default="auto")
    p.set_defaults(func=cmd_noms_compare)

    p = sub.add_parser("reduce", help="build the gadget network for a 3-CNF formula")
    p.add_argument("--cnf", required=True, help="DIMACS file")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--check", action="store_true", help="compare with brute-force SAT")
    p.add_argument("--out", help="write the centre network with shift metadata")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("reproduce", help="run a canned experiment and check its bound")
    p.add_argument("experiment", choices=(*experiments.EXPERIMENTS, "all"))
    p.add_argument("--tolerances", help="override the bundled tolerance file")
    p.set_defaults(func=cmd_reproduce)

    for p in sub.choices.values():
        _common(p, seed)
    return parser


def run(argv=None) -> int:
    try:
        seed = _default_seed()
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    parser = build_parser(seed)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "format", "output", "command")}
    fmt = args.format
    try:
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be at least 1")
        limit = nullcontext()
        if args.threads:
            from threadpoolctl import threadpool_limits
            limit = threadpool_limits(limits=args.threads)
        with limit:
            results, code = args.func(args), 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        results, code = (exc.args[1] if len(exc.args) > 1 else {"error": exc.args[0]}), 1
    except (ValueError, OSError, ModelFormatError, DimacsError, SearchDivergedError,
            TrainingDivergedError, FloatingPointError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        results, code = {"error": str(exc)}, 1
    print(render(args.command, config, results, fmt))
    if args.output:
        doc = {"command": args.command, "config": _jsonable(config), "results": _jsonable(results),
               "exit_code": code}
        Path(args.output).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
