"""Replicated synthetic experiments: distributed vs centralized coefficients."""
import itertools
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import ConfigError, NotConverged
from .fednet import glm_task, lm_task, run_inproc
from .glm import DEFAULT_MAXIT, DEFAULT_TOL, Family, fit_glm
from .ingest import SyntheticSpec, gen_synthetic, partition_rows
from .lm import fit_lm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cell:
    model: str
    n: int
    p: int
    nodes: int
    replicas: int
    mae: float
    max_abs: float
    nonconverged: int = 0


def replica_seed(seed: int, n: int, p: int, replica: int) -> int:
    """Seed for one dataset; independent of node count so that node sweeps
    reuse the same data."""
    ss = np.random.SeedSequence([seed, n, p, replica])
    return int(ss.generate_state(1, np.uint64)[0])


def _last_iterate(fit):
    """Run ``fit``; a fit that hits maxit still yields its final iterate."""
    try:
        return fit(), True
    except NotConverged as e:
        return e.result, False


def replica_diff(model: str, n: int, p: int, nodes: int, seed: int,
                 maxit: int = DEFAULT_MAXIT, tol: float = DEFAULT_TOL):
    """``(|beta_distributed - beta_centralized|, converged)`` for one
    synthetic dataset.

    Separated binomial samples have no finite optimum; both sides then stop
    at maxit and the comparison is made on their last iterates.
    """
    kind = "lm" if model == "lm" else "glm-binomial"
    d = gen_synthetic(SyntheticSpec(n, p, 3.0, 1.0, seed, kind))
    parts = [(d.x[r], d.y[r]) for r in partition_rows(n, nodes)]
    if model == "lm":
        central = fit_lm(d.x, d.y)
        results, _ = run_inproc(parts, lm_task)
        return np.abs(results[0].beta - central.beta), True
    fam = Family("binomial")
    central, ok_c = _last_iterate(lambda: fit_glm(d.x, d.y, fam, maxit, tol))
    dist, ok_d = _last_iterate(lambda: run_inproc(parts, glm_task(fam, maxit, tol))[0][0])
    return np.abs(dist.beta - central.beta), ok_c and ok_d


def run_cell(model: str, n: int, p: int, nodes: int, replicas: int, seed: int,
             maxit: int = DEFAULT_MAXIT, tol: float = DEFAULT_TOL) -> Cell:
    maes, worst, nonconverged = [], 0.0, 0
    for rep in range(replicas):
        diff, converged = replica_diff(model, n, p, nodes, replica_seed(seed, n, p, rep),
                                       maxit, tol)
        nonconverged += not converged
        maes.append(float(diff.mean()))
        worst = max(worst, float(diff.max()))
    mae = float(np.mean(maes))
    log.info("%s n=%d p=%d nodes=%d mae=%.3e", model, n, p, nodes, mae)
    return Cell(model, n, p, nodes, replicas, mae, worst, nonconverged)


def run_grid(model: str, ns: Sequence[int], ps: Sequence[int], nodes: Sequence[int],
             replicas: int, seed: int = 0, maxit: int = DEFAULT_MAXIT,
             tol: float = DEFAULT_TOL) -> List[Cell]:
    if model not in ("lm", "glm"):
        raise ConfigError(f"unknown model {model!r}")
    if replicas < 1:
        raise ConfigError("need at least one replica")
    return [run_cell(model, n, p, k, replicas, seed, maxit, tol)
            for k, n, p in itertools.product(nodes, ns, ps)]


def parse_grid(text: str) -> dict:
    """Parse ``"n=100,1000;p=1,3;nodes=5"``; ``nodes`` also accepts
    ``start:stop:step`` (inclusive stop)."""
    out = {}
    for part in filter(None, (s.strip() for s in text.split(";"))):
        key, _, values = part.partition("=")
        key = key.strip()
        if key not in ("n", "p", "nodes") or not values:
            raise ConfigError(f"bad grid component {part!r}")
        try:
            if ":" in values:
                start, stop, step = (int(v) for v in values.split(":"))
                out[key] = list(range(start, stop + 1, step))
            else:
                out[key] = [int(v) for v in values.split(",")]
        except ValueError:
            raise ConfigError(f"bad grid values in {part!r}") from None
    missing = {"n", "p", "nodes"} - out.keys()
    if missing:
        raise ConfigError(f"grid is missing {sorted(missing)}")
    return out
