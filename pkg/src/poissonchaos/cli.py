"""Command-line entry point.

Kernel files are JSON::

    {"q": 2, "N": 2, "lambda": [2.0, 2.0],
     "entries": [{"idx": [1, 2], "val": 0.5}]}

``lambda`` is optional and defaults to all ones. Indices are 1-based and must
be strictly increasing. Reports go to stdout as TSV with a single ``#`` header
line; logs go to stderr. Exit status is 0 on success, 1 on invalid input and
2 on budget or runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .contract import contraction_table
from .errors import BudgetExceeded, ChaosError, ParseError, SizeMismatch, ValidationError
from .experiments import Thresholds, get_family, universality_run, vector_diagnose
from .kernels import SymmetricKernel, WeightVector, build_symmetric
from .moments import (
    MomentProvider,
    diagnose,
    fourth_moment_structured,
    make_provider,
    moment4_sparse,
    moment_bruteforce,
    mixed_moment_bruteforce,
    product_second_moment,
)
from .montecarlo import RngSpec, simulate

log = logging.getLogger("poissonchaos")


# ---------------------------------------------------------------------------
# kernel files


def _reject_constant(token):
    raise ParseError(f"non-finite number {token} is not allowed")


def _require_int(obj, key, where):
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}{key}: expected an integer, got {v!r}")
    return v


def _require_number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: expected a number, got {v!r}")
    return float(v)


def parse_kernel_file(text: str) -> tuple[SymmetricKernel, WeightVector]:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    unknown = set(doc) - {"q", "N", "lambda", "entries"}
    if unknown:
        raise ParseError(f"unknown fields: {sorted(unknown)}")
    q = _require_int(doc, "q", "")
    N = _require_int(doc, "N", "")
    if "lambda" in doc:
        lam = doc["lambda"]
        if not isinstance(lam, list):
            raise ParseError("lambda: expected an array")
        if len(lam) != N:
            raise ParseError(f"lambda: expected {N} values, got {len(lam)}")
        w = WeightVector(tuple(_require_number(x, f"lambda[{i}]") for i, x in enumerate(lam)))
    else:
        w = WeightVector.ones(N)
    entries = doc.get("entries")
    if not isinstance(entries, list):
        raise ParseError("entries: expected an array")
    raw = []
    for k, e in enumerate(entries):
        where = f"entries[{k}]"
        if not isinstance(e, dict) or set(e) != {"idx", "val"}:
            raise ParseError(f"{where}: expected an object with exactly 'idx' and 'val'")
        idx = e["idx"]
        if not isinstance(idx, list) or any(isinstance(i, bool) or not isinstance(i, int) for i in idx):
            raise ParseError(f"{where}.idx: expected an array of integers")
        # repeated indices are left to build_symmetric so they surface as RepeatedIndex
        if len(set(idx)) == len(idx) and idx != sorted(idx):
            raise ParseError(f"{where}.idx: indices must be strictly increasing")
        val = _require_number(e["val"], f"{where}.val")
        try:
            build_symmetric(q, N, [(idx, val)])
        except ValidationError as err:
            raise type(err)(f"{where}: {err}") from None
        raw.append((idx, val))
    return build_symmetric(q, N, raw), w


def _num(x: float) -> str:
    return format(float(x), ".17g")


def serialize_kernel_file(f: SymmetricKernel, w: WeightVector | None = None) -> str:
    if w is None:
        w = WeightVector.ones(f.N)
    lines = [
        "{",
        f'  "q": {f.q},',
        f'  "N": {f.N},',
        f'  "lambda": [{", ".join(_num(x) for x in w.lam[:f.N])}],',
    ]
    items = [f'    {{"idx": [{", ".join(map(str, t))}], "val": {_num(v)}}}' for t, v in f.items()]
    if items:
        lines.append('  "entries": [')
        lines.append(",\n".join(items))
        lines.append("  ]")
    else:
        lines.append('  "entries": []')
    lines.append("}")
    return "\n".join(lines) + "\n"


def load_kernel(path: str) -> tuple[SymmetricKernel, WeightVector]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"{path}: {e.strerror}") from None
    try:
        return parse_kernel_file(text)
    except ValidationError as e:
        raise type(e)(f"{path}: {e}") from None


# ---------------------------------------------------------------------------
# report formatting


def fmt(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def tsv(header: Sequence[str], rows) -> str:
    out = ["#" + "\t".join(header)]
    out.extend("\t".join(fmt(v) for v in row) for row in rows)
    return "\n".join(out) + "\n"


def keyvalue(pairs) -> str:
    return tsv(["key", "value"], pairs)


# ---------------------------------------------------------------------------
# subcommands


def _one_kernel(args):
    if not args.kernel:
        raise ValidationError("--kernel is required")
    if len(args.kernel) != 1:
        raise ValidationError("exactly one --kernel is expected")
    return load_kernel(args.kernel[0])


def cmd_contract(args) -> str:
    f, w = _one_kernel(args)
    table = contraction_table(f, w)
    return tsv(["r", "l", "norm"], [(r, l, v) for (r, l), v in table.rows.items()])


def cmd_moments(args) -> str:
    f, w = _one_kernel(args)
    provider = make_provider(args.provider, w)
    m = args.order
    method = args.method
    if method == "structured":
        if provider.kind != "poisson" or m != 4:
            raise ValidationError("the structured formula gives fourth moments under the poisson provider")
        value = fourth_moment_structured(f, w)
    elif method == "sparse":
        if m != 4:
            raise ValidationError("the sparse expansion gives fourth moments only")
        value = moment4_sparse(f, f, f, f, provider)
    else:
        value = moment_bruteforce(f, provider, m)
    return keyvalue([("provider", provider.kind), ("method", method), ("order", m), ("moment", value)])


def cmd_diagnose(args) -> str:
    f, w = _one_kernel(args)
    rep = diagnose(f, w, make_provider(args.provider, w))
    table = rep.contraction_table
    pairs = [
        ("q", rep.q), ("N", rep.N), ("provider", rep.provider), ("method", rep.method),
        ("var_exact", rep.var_exact), ("m4_exact", rep.m4_exact), ("gap", rep.gap),
        ("m4_bruteforce", rep.m4_bruteforce), ("cond3a", rep.cond3a),
        ("integral4", table.integral4), ("contraction_max", table.contraction_max()),
    ]
    pairs.extend((f"star_{r}_{l}", v) for (r, l), v in table.rows.items())
    return keyvalue(pairs)


def _rng(args) -> RngSpec:
    return RngSpec(args.seed, args.streams)


def cmd_simulate(args) -> str:
    f, w = _one_kernel(args)
    rep = simulate(f, w, args.provider, args.samples, _rng(args), threads=args.threads)
    return keyvalue([
        ("provider", args.provider), ("n_samples", rep.n_samples), ("sigma2", rep.sigma2),
        ("mean", rep.mean), ("variance", rep.variance), ("se_variance", rep.se_variance),
        ("w1", rep.w1), ("ks", rep.ks), ("m4_empirical", rep.m4_empirical), ("se_m4", rep.se_m4),
    ])


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of integers, got {text!r}") from None


def cmd_universality(args) -> str:
    family = get_family(args.family, args.q)
    providers = [p.strip() for p in args.providers.split(",") if p.strip()]
    thresholds = Thresholds(args.gap_threshold, args.contraction_threshold, args.w1_threshold)
    rep = universality_run(family, providers, _int_list(args.grid), args.samples, _rng(args),
                           thresholds, threads=args.threads)
    header = ["family", "provider", "n", "N", "var_exact", "m4_exact", "gap", "contraction_max", "cond3a",
              "method", "w1", "ks", "m4_empirical", "se_m4", "gap_decreasing", "contraction_decreasing",
              "w1_decreasing", "final_gap_below", "final_contraction_below", "final_w1_below"]
    rows = []
    for r in rep.rows:
        t = rep.trends[r.provider]
        rows.append((rep.family, r.provider, r.n, r.N, r.var_exact, r.m4_exact, r.gap, r.contraction_max,
                     r.cond3a, r.method, r.w1, r.ks, r.m4_empirical, r.se_m4, t.gap_decreasing,
                     t.contraction_decreasing, t.w1_decreasing, t.final_gap_below,
                     t.final_contraction_below, t.final_w1_below))
    return tsv(header, rows)


def _parse_matrix(text: str | None, d: int) -> np.ndarray:
    if text is None:
        return np.eye(d)
    try:
        rows = [[float(x) for x in row.split(",")] for row in text.split(";")]
    except ValueError:
        raise ValidationError(f"cannot parse matrix {text!r}; use rows separated by ';'") from None
    if any(len(r) != len(rows[0]) for r in rows):
        raise ValidationError("matrix rows have unequal lengths")
    return np.array(rows)


def _kernels(args, count=None):
    paths = args.kernel or []
    if not paths or (count is not None and len(paths) != count):
        raise ValidationError(f"expected {count or 'one or more'} --kernel arguments, got {len(paths)}")
    loaded = [load_kernel(p) for p in paths]
    fs = [f for f, _ in loaded]
    if len({f.N for f in fs}) > 1:
        raise SizeMismatch("all kernels must share N")
    return fs, loaded[0][1]


def cmd_vector_diagnose(args) -> str:
    fs, w = _kernels(args)
    rep = vector_diagnose(fs, w, _parse_matrix(args.cov, len(fs)))
    rows = [("cov", p.i, p.j, p.exact, p.target, p.residual) for p in rep.pairs]
    for c in rep.components:
        rows.append(("contraction" if c.q >= 2 else "cond3a", c.j, c.j, c.statistic, None, None))
        rows.append(("m4", c.j, c.j, c.m4_exact, c.m4_exact - c.gap, c.gap))
    return tsv(["kind", "i", "j", "value", "target", "residual"], rows)


def cmd_product_check(args) -> str:
    fs, w = _kernels(args, count=2)
    f1, f2 = fs
    parts = product_second_moment(f1, f2, w)
    total = sum(v for _, v in parts)
    brute = mixed_moment_bruteforce([f1, f1, f2, f2], MomentProvider.poisson(w))
    rel = abs(total - brute) / max(abs(brute), 1e-300)
    rows = [(f"k={k}", v) for k, v in parts]
    rows += [("total", total), ("bruteforce", brute), ("rel_error", rel)]
    return tsv(["term", "value"], rows)


COMMANDS = {
    "contract": (cmd_contract, "contraction-norm table, one row per (r, l)"),
    "moments": (cmd_moments, "exact moments of the homogeneous sum"),
    "diagnose": (cmd_diagnose, "variance, fourth moment, gap and contraction statistics"),
    "simulate": (cmd_simulate, "Monte Carlo distances to the normal target"),
    "universality": (cmd_universality, "diagnostics along a kernel family for several laws"),
    "vector-diagnose": (cmd_vector_diagnose, "joint diagnostics for several kernels"),
    "product-check": (cmd_product_check, "second moment of a product against its chaos expansion"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poissonchaos", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--kernel", action="append", help="kernel JSON file (repeatable where several are needed)")
        p.add_argument("--out", help="write the report to this file instead of stdout")
        if name in ("moments", "diagnose", "simulate"):
            p.add_argument("--provider", default="poisson", choices=["gaussian", "rademacher", "poisson"])
        if name == "moments":
            p.add_argument("--method", default="bruteforce", choices=["bruteforce", "structured", "sparse"])
            p.add_argument("--order", type=int, default=4, help="moment order m (bruteforce: 0..4)")
        if name in ("simulate", "universality"):
            p.add_argument("--samples", type=int, default=100_000)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--streams", type=int, default=8)
            p.add_argument("--threads", type=int, default=1)
        if name == "universality":
            p.add_argument("--family", required=True, choices=["counterexample", "pair-partition", "q1-escape"])
            p.add_argument("--q", type=int, default=2, help="order of the counterexample family")
            p.add_argument("--providers", default="poisson,gaussian,rademacher")
            p.add_argument("--grid", default="8,32,128")
            p.add_argument("--gap-threshold", type=float, default=0.05)
            p.add_argument("--contraction-threshold", type=float, default=0.05)
            p.add_argument("--w1-threshold", type=float, default=0.05)
        if name == "vector-diagnose":
            p.add_argument("--cov", help="target covariance, rows separated by ';' (default identity)")
    return parser


def dispatch(argv: Sequence[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    handler = COMMANDS[args.command][0]
    try:
        report = handler(args)
    except ValidationError as e:
        log.error("%s: %s", type(e).__name__, e)
        return 1
    except (BudgetExceeded, ChaosError, MemoryError, RuntimeError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return 2
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    else:
        stdout.write(report)
    return 0


def main() -> None:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(name)s: %(message)s")
    sys.exit(dispatch())
