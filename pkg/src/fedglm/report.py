"""Textual and machine-readable reports, plus the pairwise comparison rule."""
import json
import math
from dataclasses import dataclass
from typing import List, Sequence

from .errors import NameMismatch

DEFAULT_ATOL = 1e-8
DEFAULT_RTOL = 1e-5


@dataclass(frozen=True)
class Verdict:
    name: str
    central: float
    distributed: float
    diff: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.diff <= self.bound


def compare_coefficients(names_c: Sequence[str], beta_c, names_d: Sequence[str], beta_d,
                         rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> List[Verdict]:
    """|b_d - b_c| <= atol + rtol * |b_c| for each coefficient, with the
    first fit taken as the centralized reference."""
    names_c, names_d = list(names_c), list(names_d)
    if names_c != names_d:
        raise NameMismatch(f"coefficient names differ: {names_c} vs {names_d}")
    out = []
    for name, c, d in zip(names_c, beta_c, beta_d):
        c, d = float(c), float(d)
        out.append(Verdict(name, c, d, abs(d - c), atol + rtol * abs(c)))
    return out


def _num(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return "%.17g" % x


def dumps(obj, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits, so output is
    byte-stable and round-trips exactly."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "item"):  # numpy scalar
        obj = obj.item()
    return _num(obj)


def fit_record(result, names, **meta) -> dict:
    se = result.std_errors
    rec = dict(meta)
    rec.update({
        "n": int(result.n),
        "p": int(result.p),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "rss": float(result.rss),
        "dispersion": None if result.dispersion is None else float(result.dispersion),
        "coefficients": [
            {"name": name, "estimate": float(b),
             "std_error": None if se is None else float(se[j])}
            for j, (name, b) in enumerate(zip(names, result.beta))
        ],
    })
    return rec


def format_fit(rec: dict) -> str:
    width = max([len("coefficient")] + [len(c["name"]) for c in rec["coefficients"]])
    lines = [f"{'coefficient':<{width}}  {'estimate':>16}  {'std. error':>14}"]
    for c in rec["coefficients"]:
        se = "NA" if c["std_error"] is None else f"{c['std_error']:.6g}"
        lines.append(f"{c['name']:<{width}}  {c['estimate']:>16.8g}  {se:>14}")
    lines.append("")
    lines.append(f"n = {rec['n']}, p = {rec['p']}, nodes = {rec.get('nodes', 1)}, "
                 f"iterations = {rec['iterations']}, converged = {rec['converged']}")
    return "\n".join(lines)


def format_verdicts(verdicts: Sequence[Verdict]) -> str:
    width = max([len("coefficient")] + [len(v.name) for v in verdicts])
    lines = [f"{'coefficient':<{width}}  {'central':>20}  {'other':>20}  {'|diff|':>10}  verdict"]
    for v in verdicts:
        lines.append(f"{v.name:<{width}}  {v.central:>20.12g}  {v.distributed:>20.12g}  "
                     f"{v.diff:>10.3e}  {'PASS' if v.ok else 'FAIL'}")
    lines.append("overall: " + ("PASS" if all(v.ok for v in verdicts) else "FAIL"))
    return "\n".join(lines)


def verdict_record(verdicts: Sequence[Verdict]) -> dict:
    return {
        "pass": all(v.ok for v in verdicts),
        "coefficients": [
            {"name": v.name, "central": v.central, "other": v.distributed,
             "diff": v.diff, "bound": v.bound, "pass": v.ok}
            for v in verdicts
        ],
    }


def format_cells(cells) -> str:
    """Lay cells out like the published tables: one row per (nodes, n) with
    one column per p when the node count is fixed, otherwise one row per
    node count with one column per n x p."""
    nodes = sorted({c.nodes for c in cells})
    ns = sorted({c.n for c in cells})
    ps = sorted({c.p for c in cells})
    lookup = {(c.nodes, c.n, c.p): c for c in cells}

    def val(c):
        if c is None:
            return "-"
        s = f"{c.mae:.3e}"
        return s + (f" ({c.nonconverged} nc)" if c.nonconverged else "")

    if len(nodes) == 1:
        k = nodes[0]
        head = [f"{cells[0].model.upper()} with {k} nodes: MAE over {cells[0].replicas} replicas",
                "observations" + "".join(f"{'p=' + str(p):>14}" for p in ps)]
        rows = [f"{n:<12}" + "".join(f"{val(lookup.get((k, n, p))):>14}" for p in ps) for n in ns]
        return "\n".join(head + rows)
    combos = [(n, p) for n in ns for p in ps]
    head = [f"{cells[0].model.upper()}: MAE over {cells[0].replicas} replicas",
            "nodes " + "".join(f"{f'{n}x{p}':>14}" for n, p in combos)]
    rows = [f"{k:<6}" + "".join(f"{val(lookup.get((k, n, p))):>14}" for n, p in combos)
            for k in nodes]
    return "\n".join(head + rows)


def cells_record(cells) -> dict:
    return {"cells": [dict(c.__dict__) for c in cells]}
