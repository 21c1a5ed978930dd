"""Command-line front end.

Subcommands:

* ``verify``: certified radius per input, JSON reports (volatile values are
  kept in a ``sidecar`` object so identical runs are byte-identical).
* ``bounds``: per-layer output intervals at a fixed radius (--eps0).
* ``compare``: both anchor policies across inputs and norms, CSV rows with
  per-row improvement over the forward-anchor baseline.
* ``oracle-check``: samples perturbation balls and fails on any point that
  escapes the computed bounds or flips the certified prediction.

Exit codes: 0 on success, 1 on usage/file/format errors or oracle
violations, 2 when --strict is set and some input is misclassified.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from .certify import (
    CertificationConfig,
    CertificationReport,
    certified_radius,
    norm_name,
    parse_norm,
)
from .model import (
    InputFormatError,
    NetworkFormatError,
    forward,
    load_inputs,
    load_network,
    normalize,
)
from .oracle import OracleConfig, prediction_check, soundness_check
from .propagate import PerturbationBall, compute_all_bounds
from .relaxation import AnchorPolicy

INPUT_FORMATS = ("json", "csv", "idx")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); 2 is reserved for --strict
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="network JSON file")
    p.add_argument("--input", required=True, help="input vectors: PATH[:json|csv|idx]")
    p.add_argument("--indices", default="all", help="rows to use: 'all', 'a..b', or 'i,j,k'")
    p.add_argument("--label", default="auto", help="target class, or 'auto' for argmax")
    p.add_argument("--norm", default=None, help="perturbation norm: 1, 2, or inf")
    p.add_argument("--policy", default="forward", help="anchor policy: forward or midpoint")
    p.add_argument("--iters", type=int, default=15, help="binary search iterations")
    p.add_argument("--eps0", type=float, default=0.05, help="initial search radius")
    p.add_argument("--seed", type=int, default=0, help="seed for sampling oracles")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--strict", action="store_true", help="exit 2 on misclassified inputs")


def build_parser() -> _Parser:
    parser = _Parser(prog="tilin", description=__doc__, add_help=True)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, text in (
        ("verify", "certified radius per input (JSON reports)"),
        ("bounds", "per-layer bounds at radius --eps0 (JSON)"),
        ("compare", "anchor policies x norms over the input set (CSV)"),
        ("oracle-check", "sampling checks against verify/bounds outputs"),
    ):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        if name == "oracle-check":
            p.add_argument("--report", default=None, help="verify output JSON to check")
            p.add_argument("--samples", type=int, default=10_000, help="oracle sample count")
    return parser


# ---------------------------------------------------------------------------
# shared plumbing


def _split_input_arg(arg: str) -> tuple[str, str | None]:
    if ":" in arg:
        path, tail = arg.rsplit(":", 1)
        if tail.lower() in INPUT_FORMATS:
            return path, tail.lower()
    return arg, None


def _parse_indices(text: str, count: int) -> list[int]:
    if text in ("all", ""):
        return list(range(count))
    try:
        if ".." in text:
            a, b = text.split("..")
            idxs = list(range(int(a), int(b) + 1))
        else:
            idxs = [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"--indices {text!r}: expected 'all', 'a..b', or 'i,j,k'") from exc
    for i in idxs:
        if not 0 <= i < count:
            raise UsageError(f"--indices: row {i} out of range for {count} inputs")
    return idxs


def _labels_for(args, net, inputs, idxs) -> list[int]:
    if args.label == "auto":
        return [int(np.argmax(forward(net, inputs[i]))) for i in idxs]
    try:
        fixed = int(args.label)
    except ValueError as exc:
        raise UsageError(f"--label {args.label!r}: expected an integer or 'auto'") from exc
    if not 0 <= fixed < net.output_dim:
        raise UsageError(f"--label {fixed} out of range for {net.output_dim} classes")
    return [fixed] * len(idxs)


def _thread_count(jobs: int) -> int:
    raw = os.environ.get("TILIN_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise UsageError(f"TILIN_THREADS={raw!r} is not an integer") from exc
        if n < 1:
            raise UsageError("TILIN_THREADS must be >= 1")
        return min(n, max(jobs, 1))
    return min(max(jobs, 1), os.cpu_count() or 1)


def _run_pool(tasks):
    """Run thunks preserving order; sequential when one worker suffices."""
    workers = _thread_count(len(tasks))
    if workers == 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def _write_text(out: str | None, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")


def _load_setup(args):
    net = normalize(load_network(args.model))
    path, fmt = _split_input_arg(args.input)
    inputs = load_inputs(path, fmt)
    if inputs.shape[1] != net.input_dim:
        raise InputFormatError(
            f"input width {inputs.shape[1]} != network input_dim {net.input_dim}"
        )
    idxs = _parse_indices(args.indices, inputs.shape[0])
    labels = _labels_for(args, net, inputs, idxs)
    return net, inputs, idxs, labels


def _config(args, p=None, policy=None) -> CertificationConfig:
    return CertificationConfig(
        p=parse_norm(args.norm or "inf") if p is None else p,
        policy=AnchorPolicy.parse(args.policy) if policy is None else policy,
        iterations=args.iters,
        eps0=args.eps0,
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_verify(args) -> int:
    net, inputs, idxs, labels = _load_setup(args)
    cfg = _config(args)
    tasks = [
        (lambda i=i, t=t: certified_radius(net, inputs[i], t, cfg, input_id=str(i)))
        for i, t in zip(idxs, labels)
    ]
    reports: list[CertificationReport] = _run_pool(tasks)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    payload = [r.to_file_dict(stamp) for r in reports]
    _write_text(args.out, json.dumps(payload, indent=2))
    if args.strict and any("misclassified" in r.flags for r in reports):
        return 2
    return 0


def cmd_bounds(args) -> int:
    net, inputs, idxs, labels = _load_setup(args)
    cfg = _config(args)
    payload = []
    misclassified = False
    for i, t in zip(idxs, labels):
        x = inputs[i]
        misclassified |= int(np.argmax(forward(net, x))) != t
        bounds, _ = compute_all_bounds(net, PerturbationBall(x, args.eps0, cfg.p), cfg.policy)
        payload.append(
            {
                "input_id": str(i),
                "eps": args.eps0,
                "norm": norm_name(cfg.p),
                "policy": cfg.policy.value,
                "layers": [
                    {"layer": k, "lower": b.lower.tolist(), "upper": b.upper.tolist()}
                    for k, b in enumerate(bounds)
                ],
            }
        )
    _write_text(args.out, json.dumps(payload, indent=2))
    if args.strict and misclassified:
        return 2
    return 0


def cmd_compare(args) -> int:
    net, inputs, idxs, labels = _load_setup(args)
    norms = [parse_norm(tok) for tok in (args.norm or "1,2,inf").split(",")]
    policies = [AnchorPolicy.FORWARD_VALUE, AnchorPolicy.MIDPOINT]
    combos = [(i, t, p, pol) for i, t in zip(idxs, labels) for p in norms for pol in policies]

    def job(i, t, p, pol):
        cfg = _config(args, p=p, policy=pol)
        started = time.perf_counter()
        rep = certified_radius(net, inputs[i], t, cfg, input_id=str(i))
        return rep, time.perf_counter() - started

    results = _run_pool([lambda c=c: job(*c) for c in combos])

    baseline: dict[tuple[str, str], float] = {}
    for rep, _ in results:
        if rep.policy == AnchorPolicy.FORWARD_VALUE.value:
            baseline[(rep.input_id, rep.norm)] = rep.eps_cert
    rows = []
    for rep, seconds in results:
        base = baseline.get((rep.input_id, rep.norm), 0.0)
        if base > 0.0:
            improvement = f"{100.0 * (rep.eps_cert - base) / base:.4f}"
        else:
            improvement = ""
        rows.append(
            {
                "input": rep.input_id,
                "method": rep.method,
                "norm": rep.norm,
                "eps_cert": f"{rep.eps_cert:.12g}",
                "time_sec": f"{seconds:.6f}",
                "improvement_pct": improvement,
            }
        )

    import io

    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=["input", "method", "norm", "eps_cert", "time_sec", "improvement_pct"]
    )
    writer.writeheader()
    writer.writerows(rows)
    _write_text(args.out, buf.getvalue())

    # average wall time over correctly-classified inputs, per method and norm
    for pol in policies:
        for p in norms:
            times = [
                sec
                for rep, sec in results
                if rep.policy == pol.value
                and rep.norm == norm_name(p)
                and "misclassified" not in rep.flags
            ]
            if times:
                print(
                    f"tilin/{pol.value} norm={norm_name(p)}: "
                    f"avg_time_sec={sum(times) / len(times):.4f} over {len(times)} inputs",
                    file=sys.stderr,
                )
    if args.strict and any("misclassified" in rep.flags for rep, _ in results):
        return 2
    return 0


def cmd_oracle_check(args) -> int:
    net, inputs, idxs, labels = _load_setup(args)
    cfg = _config(args)
    jobs: list[tuple[int, int, float]] = []  # (row, label, radius)
    if args.report:
        with open(args.report, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
        for ent in entries:
            row = int(ent["input_id"])
            if row >= inputs.shape[0]:
                raise UsageError(f"--report input_id {row} out of range for the input file")
            jobs.append((row, int(ent["label"]), float(ent["eps_cert"])))
    else:
        jobs = [(i, t, args.eps0) for i, t in zip(idxs, labels)]

    checks = []
    violations = 0
    for row, label, eps in jobs:
        x = inputs[row]
        entry = {"input_id": str(row), "label": label, "eps": eps}
        if eps <= 0.0:
            entry["skipped"] = "radius is zero, nothing to check"
            checks.append(entry)
            continue
        ball = PerturbationBall(x, eps, cfg.p)
        bounds, _ = compute_all_bounds(net, ball, cfg.policy)
        ocfg = OracleConfig(samples=args.samples, seed=args.seed)
        entry["soundness"] = soundness_check(net, bounds, ball, ocfg)
        entry["prediction"] = prediction_check(net, ball, label, ocfg)
        violations += entry["soundness"]["violations"] + entry["prediction"]["violations"]
        checks.append(entry)

    payload = {
        "oracle": "suite",
        "seed": args.seed,
        "samples": args.samples,
        "norm": norm_name(cfg.p),
        "policy": cfg.policy.value,
        "violations": violations,
        "checks": checks,
    }
    _write_text(args.out, json.dumps(payload, indent=2))
    return 1 if violations else 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: verify, bounds, compare, oracle-check")
        handler = {
            "verify": cmd_verify,
            "bounds": cmd_bounds,
            "compare": cmd_compare,
            "oracle-check": cmd_oracle_check,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"tilin: usage error: {exc}", file=sys.stderr)
        return 1
    except (NetworkFormatError, InputFormatError) as exc:
        print(f"tilin: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"tilin: error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
