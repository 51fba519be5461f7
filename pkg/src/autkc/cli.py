"""Command line client for the AUTKC service.

Each subcommand assembles the same pydantic request the HTTP API accepts
and dispatches it either to the in-process handlers (default) or to a
running server (``--server http://host:port``), then writes the response
to disk: canonical JSON/JSONL/CSV artifacts plus a run manifest.

Exit codes: 0 success; 2 usage or validation error; 3 an internal gate
failed (consistency thresholds, closed-form mismatch); 4 input file parse
error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .serialize import dumps_canonical, now, run_manifest, write_csv, write_json, write_jsonl
from .service import schemas
from .service.app import (
    handle_compare,
    handle_consistency,
    handle_eval,
    handle_lipschitz,
    handle_train,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GATE = 3
EXIT_PARSE = 4

_ENDPOINTS = {
    "eval": ("/eval", handle_eval, schemas.EvalResponse),
    "train": ("/train", handle_train, schemas.TrainResponse),
    "consistency": ("/consistency", handle_consistency, schemas.ConsistencyResponse),
    "compare-metrics": ("/compare-metrics", handle_compare, schemas.CompareResponse),
    "lipschitz": ("/lipschitz", handle_lipschitz, schemas.LipschitzResponse),
}


class UsageError(Exception):
    pass


def dispatch(command: str, request, server: str | None):
    """Run a request in-process or POST it to a server; returns the response model."""
    path, handler, response_model = _ENDPOINTS[command]
    if server is None:
        return handler(request)
    import httpx

    resp = httpx.post(server.rstrip("/") + path, json=request.model_dump(mode="json"), timeout=3600.0)
    if resp.status_code != 200:
        raise UsageError(f"server returned {resp.status_code}: {resp.text}")
    return response_model.model_validate(resp.json())


def _read_scores_csv(path: str):
    """Scores file: one row per sample, C score columns then a label column."""
    scores, labels = [], []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    start = 0
    if lines:
        try:
            float(lines[0].split(",")[0])
        except ValueError:
            start = 1  # tolerate a header row
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) < 3:
            raise _parse_error(f"{path}: line {lineno}: need >= 2 score columns plus a label")
        try:
            scores.append([float(v) for v in fields[:-1]])
        except ValueError:
            raise _parse_error(f"{path}: line {lineno}: non-numeric score") from None
        try:
            labels.append(int(fields[-1]))
        except ValueError:
            raise _parse_error(f"{path}: line {lineno}: non-integer label") from None
        if len(scores[-1]) != len(scores[0]):
            raise _parse_error(f"{path}: line {lineno}: inconsistent column count")
    if not scores:
        raise _parse_error(f"{path}: no data rows")
    return scores, labels


class ParseError(Exception):
    pass


def _parse_error(msg: str) -> ParseError:
    return ParseError(msg)


def _out_prefix(args, command: str) -> Path:
    prefix = Path(args.out if args.out else Path("out") / command)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    return prefix


def _finish(command: str, config: dict, seed, outputs: list[Path], t0: float, prefix: Path) -> None:
    manifest = run_manifest(command, config, seed, outputs, now() - t0)
    write_json(prefix.parent / f"{prefix.name}.manifest.json", manifest)


def cmd_eval(args) -> int:
    t0 = now()
    scores, labels = _read_scores_csv(args.scores)
    C = len(scores[0])
    if args.K < 1 or args.K > C - 1:
        raise UsageError(f"--K must be in [1, {C - 1}] for C={C} classes")
    if args.kmax is not None and not 1 <= args.kmax <= C:
        raise UsageError(f"--kmax must be in [1, {C}] for C={C} classes")
    req = schemas.EvalRequest(scores=scores, labels=labels, K=args.K, kmax=args.kmax)
    resp = dispatch("eval", req, args.server)
    prefix = _out_prefix(args, "eval")
    report = write_json(prefix.parent / f"{prefix.name}.report.json", resp.model_dump())
    curve = write_csv(
        prefix.parent / f"{prefix.name}.curve.csv",
        ["k", "topk_up"],
        [(k + 1, v) for k, v in enumerate(resp.topk_curve)],
    )
    _finish("eval", {"scores": args.scores, "K": args.K, "kmax": args.kmax}, None, [report, curve], t0, prefix)
    print(f"autkc_up@{resp.K} = {resp.autkc_up:.6f}  (n={resp.n})")
    return EXIT_OK


def _parse_seed_list(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise UsageError(f"empty seed list {text!r}")
    return seeds


def _build_train_request(args, seed: int | None) -> schemas.TrainRequest:
    config: dict = {}
    if args.config:
        import json

        try:
            config.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    flag_map = {
        "loss": args.loss,
        "epochs": args.epochs,
        "warmup_epochs": args.warmup,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "momentum": args.momentum,
        "weight_decay": args.weight_decay,
        "model": args.model,
    }
    if args.K:
        flag_map["K_eval"] = [int(v) for v in args.K.split(",")]
    if args.hidden:
        flag_map["hidden"] = [int(v) for v in args.hidden.split(",")]
    config.update({k: v for k, v in flag_map.items() if v is not None})
    data_flags = {
        "C": args.C, "d": args.d, "n_train": args.n_train, "n_test": args.n_test, "tau": args.tau,
    }
    data = dict(config.get("data", {}))
    data.update({k: v for k, v in data_flags.items() if v is not None})
    if data:
        config["data"] = data
    if args.data_csv:
        config["train_csv"] = Path(args.data_csv).read_text(encoding="utf-8")
        if args.test_csv:
            config["test_csv"] = Path(args.test_csv).read_text(encoding="utf-8")
    if seed is not None:
        config["seed"] = seed
    if "loss" not in config:
        raise UsageError("--loss is required (e.g. --loss autkc-exp@5)")
    return schemas.TrainRequest(**config)


def _train_one(payload: tuple) -> dict:
    command_args, seed = payload
    req = schemas.TrainRequest(**command_args)
    resp = handle_train(req)
    return resp.model_dump()


def cmd_train(args) -> int:
    t0 = now()
    if args.seeds:
        seeds = _parse_seed_list(args.seeds)
    else:
        seeds = [args.seed]  # None defers to the config file / schema default
    prefix = _out_prefix(args, "train")
    requests = {}
    for seed in seeds:
        req = _build_train_request(args, seed)
        requests[req.seed] = req
    seeds = list(requests)
    results: dict[int, dict] = {}
    if args.server is None and args.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            payloads = [(req.model_dump(), seed) for seed, req in requests.items()]
            for seed, result in zip(requests, pool.map(_train_one, payloads)):
                results[seed] = result
    else:
        for seed, req in requests.items():
            results[seed] = dispatch("train", req, args.server).model_dump()

    outputs: list[Path] = []
    for seed, result in results.items():
        tag = f"_seed{seed}" if len(seeds) > 1 else ""
        history = write_jsonl(prefix.parent / f"{prefix.name}{tag}.history.jsonl", result["history"])
        report = write_json(
            prefix.parent / f"{prefix.name}{tag}.report.json",
            {"config": result["config"], "final": result["final"]},
        )
        outputs.extend([history, report])
        final_autkc = result["final"]["autkc_up"]
        print(f"seed {seed}: test autkc_up = " + dumps_canonical(final_autkc))
    if len(seeds) > 1:
        summary = {
            "seeds": seeds,
            "mean_autkc_up": {
                K: sum(results[s]["final"]["autkc_up"][K] for s in seeds) / len(seeds)
                for K in results[seeds[0]]["final"]["autkc_up"]
            },
        }
        outputs.append(write_json(prefix.parent / f"{prefix.name}.summary.json", summary))
    resolved = requests[seeds[0]].model_dump()
    resolved.pop("train_csv", None)
    resolved.pop("test_csv", None)
    _finish("train", resolved, seeds, outputs, t0, prefix)
    return EXIT_OK


def cmd_consistency(args) -> int:
    t0 = now()
    req = schemas.ConsistencyRequest(
        family=args.family, C=args.C, K=args.K, trials=args.trials, seed=args.seed,
        gap_tol=args.gap_tol,
    )
    try:
        resp = dispatch("consistency", req, args.server)
    except ValueError as exc:
        if "unsatisfiable" in str(exc):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        raise
    prefix = _out_prefix(args, "consistency")
    report = write_json(prefix.parent / f"{prefix.name}.report.json", resp.model_dump())
    _finish("consistency", req.model_dump(), args.seed, [report], t0, prefix)
    if args.family == "hinge":
        print(f"hinge risk_gap = {resp.risk_gap:.6g} (tail mass {resp.tail_mass:.4f} > {resp.condition_threshold:.4f})")
    print(f"{args.family}: rp_success_rate = {resp.rp_success_rate:.3f} over {resp.trials} trials")
    if not resp.passed:
        print("consistency gate FAILED", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def cmd_compare_metrics(args) -> int:
    t0 = now()
    prefix = _out_prefix(args, "compare-metrics")
    if args.sweep:
        if args.k is not None or args.K is not None:
            raise UsageError("--sweep enumerates every 1 <= k < K <= C; drop --k/--K")
        pairs = [(k, K) for k in range(1, args.C) for K in range(k + 1, args.C + 1)]
    else:
        if args.k is None or args.K is None:
            raise UsageError("--k and --K are required (or use --sweep)")
        if args.k >= args.K:
            raise UsageError(f"--k must be below --K (got k={args.k}, K={args.K})")
        if args.K > args.C:
            raise UsageError(f"--K must be at most --C (got K={args.K}, C={args.C})")
        pairs = [(args.k, args.K)]
    rows = []
    all_match = True
    for k, K in pairs:
        req = schemas.CompareRequest(C=args.C, k=k, K=K)
        resp = dispatch("compare-metrics", req, args.server)
        rows.append(resp.model_dump())
        all_match = all_match and resp.closed_form_match
        disc = "inf" if resp.discriminancy_infinite else f"{resp.degree_of_discriminancy:.6g}"
        print(
            f"C={resp.C} k={resp.k} K={resp.K}: R={resp.R} S={resp.S} P={resp.P} Q={resp.Q} "
            f"consistency={resp.degree_of_consistency:.3f} discriminancy={disc}"
        )
    payload = rows[0] if len(rows) == 1 else {"C": args.C, "pairs": rows, "all_closed_form_match": all_match}
    report = write_json(prefix.parent / f"{prefix.name}.report.json", payload)
    _finish("compare-metrics", {"C": args.C, "sweep": args.sweep, "k": args.k, "K": args.K},
            None, [report], t0, prefix)
    if not all_match:
        print("closed-form count mismatch", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def cmd_lipschitz(args) -> int:
    t0 = now()
    req = schemas.LipschitzRequest(family=args.family, C=args.C, trials=args.trials, seed=args.seed)
    resp = dispatch("lipschitz", req, args.server)
    prefix = _out_prefix(args, "lipschitz")
    report = write_json(prefix.parent / f"{prefix.name}.report.json", resp.model_dump())
    _finish("lipschitz", req.model_dump(), args.seed, [report], t0, prefix)
    print(
        f"{resp.family}@{resp.K} C={resp.C}: max ratio {resp.max_ratio:.6f} vs bound pair "
        f"({resp.bound_pair[0]:.4f}, {resp.bound_pair[1]:.4f}) -> {'pass' if resp.passed else 'VIOLATION'}"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autkc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"autkc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", help="output path prefix (default out/<command>)")
        p.add_argument("--server", help="dispatch to a running service instead of in-process")

    p = sub.add_parser("eval", help="AUTKC/top-k metrics for a scores CSV (scores columns then label)")
    p.add_argument("scores", help="CSV: one row per sample, C score columns then a label column")
    p.add_argument("--K", type=int, required=True, help="partial-area cutoff (1 <= K <= C-1)")
    p.add_argument("--kmax", type=int, help="top-k curve length (default min(K+1, C))")
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train", help="train a model and evaluate AUTKC/top-k metrics")
    p.add_argument("--loss", help="loss spec: <family>[@cutoff], e.g. autkc-exp@5, l5@3, ce")
    p.add_argument("--K", help="evaluation cutoffs, comma separated (default 1,3,5)")
    p.add_argument("--warmup", type=int, help="cross-entropy warm-up epochs")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="seed sweep, e.g. '0-4' or '0,1,2' (writes per-seed outputs)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for seed sweeps")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--model", choices=["linear", "mlp"])
    p.add_argument("--hidden", help="MLP hidden sizes, comma separated")
    p.add_argument("--data-csv", dest="data_csv", help="train on this dataset CSV instead of synthetic data")
    p.add_argument("--test-csv", dest="test_csv", help="evaluation dataset CSV")
    p.add_argument("--C", type=int, help="synthetic: class count")
    p.add_argument("--d", type=int, help="synthetic: feature dimension")
    p.add_argument("--n-train", type=int, dest="n_train")
    p.add_argument("--n-test", type=int, dest="n_test")
    p.add_argument("--tau", type=float, help="synthetic: ambiguity temperature")
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("consistency", help="Bayes-optimality / consistency lab experiments")
    p.add_argument("--family", required=True, choices=["square", "exp", "logit", "hinge"])
    p.add_argument("--C", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gap-tol", type=float, default=1e-6, dest="gap_tol")
    add_common(p)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("compare-metrics", help="exhaustive metric comparison pair counts")
    p.add_argument("--C", type=int, required=True)
    p.add_argument("--k", type=int, help="top-k cutoff (must be < K)")
    p.add_argument("--K", type=int, help="partial-area cutoff")
    p.add_argument("--sweep", action="store_true", help="run every 1 <= k < K <= C")
    add_common(p)
    p.set_defaults(func=cmd_compare_metrics)

    p = sub.add_parser("lipschitz", help="empirical Lipschitz bound check for normalized losses")
    p.add_argument("--family", required=True, help="autkc-sq@K, autkc-exp@K or autkc-logit@K")
    p.add_argument("--C", type=int, default=5)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    add_common(p)
    p.set_defaults(func=cmd_lipschitz)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (UsageError, ValidationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
