"""Command line entry point: ``fedglm fit | experiment | compare``."""
import argparse
import json
import logging
import os
import sys

from . import errors
from .experiment import parse_grid, run_grid
from .fednet import Node, NodeConfig, glm_task, lm_task, run_inproc
from .fednet.protocol import DEFAULT_TIMEOUT, connect_socket_node
from .glm import DEFAULT_MAXIT, DEFAULT_TOL, Family, fit_glm
from .ingest import build_design, infer_schema, load_schema, parse_csv, partition_rows
from .lm import fit_lm
from .report import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    cells_record,
    compare_coefficients,
    dumps,
    fit_record,
    format_cells,
    format_fit,
    format_verdicts,
    verdict_record,
)

log = logging.getLogger("fedglm")

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_NETWORK = 5

ENV_PEERS = "FEDGLM_PEERS"
ENV_NODE_ID = "FEDGLM_NODE_ID"
ENV_TIMEOUT = "FEDGLM_TIMEOUT"


def _csv_list(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def parse_peers(text):
    """``host:port,host:port,...`` indexed by node id."""
    addresses = {}
    for i, item in enumerate(_csv_list(text)):
        host, sep, port = item.rpartition(":")
        if not sep or not port.isdigit():
            raise errors.ConfigError(f"bad peer address {item!r}, expected host:port")
        addresses[i] = (host or "127.0.0.1", int(port))
    return addresses


def _emit(args, record, text):
    print(dumps(record) if args.format == "machine" else text)


def _load_design(args):
    if not args.data:
        raise errors.ConfigError("--data is required")
    if args.schema:
        schema = load_schema(args.schema)
    else:
        if not args.response or not args.predictors:
            raise errors.ConfigError("give --schema or both --response and --predictors")
        schema = infer_schema(args.data, args.response, _csv_list(args.predictors), args.sep)
    table = parse_csv(args.data, schema, args.sep)
    return build_design(table, schema, intercept=not args.no_intercept)


def _family(args):
    if args.model == "lm":
        return None
    return Family(args.family, args.link)


def _centralized(design, fam, args):
    if fam is None:
        return fit_lm(design.x, design.y)
    return fit_glm(design.x, design.y, fam, args.maxit, args.tol)


def _task(fam, args):
    return lm_task if fam is None else glm_task(fam, args.maxit, args.tol)


def cmd_fit(args):
    fam = _family(args)
    design = _load_design(args)
    timeout = float(os.environ.get(ENV_TIMEOUT, args.timeout))
    meta = {"model": args.model}
    if fam is not None:
        meta.update(family=fam.name, link=fam.link)

    if args.transport == "socket":
        peers = os.environ.get(ENV_PEERS, args.peers)
        node_id = os.environ.get(ENV_NODE_ID, args.node_id)
        if not peers or node_id is None:
            raise errors.ConfigError("socket transport needs --peers and --node-id")
        addresses = parse_peers(peers)
        node_id = int(node_id)
        cfg = NodeConfig(node_id, tuple(addresses), "socket", timeout, addresses)
        node = connect_socket_node(cfg)
        try:
            result = _task(fam, args)(node, design.x, design.y)
        finally:
            node.transport.close()
        meta.update(nodes=cfg.n_nodes, node_id=node_id)
    else:
        ranges = partition_rows(design.x.shape[0], args.nodes)
        parts = [(design.x[r], design.y[r]) for r in ranges]
        results, _ = run_inproc(parts, _task(fam, args), timeout)
        result = results[0]
        meta.update(nodes=args.nodes)

    record = fit_record(result, design.names, **meta)
    text = format_fit(record)
    status = EXIT_OK
    if args.check:
        central = _centralized(design, fam, args)
        verdicts = compare_coefficients(design.names, central.beta, design.names, result.beta,
                                        args.rtol, args.atol)
        record["check"] = verdict_record(verdicts)
        text += "\n\ncentralized vs distributed:\n" + format_verdicts(verdicts)
        status = EXIT_OK if record["check"]["pass"] else EXIT_MISMATCH
    _emit(args, record, text)
    return status


def cmd_experiment(args):
    grid = parse_grid(args.grid)
    if args.model == "glm" and args.family != "binomial":
        raise errors.ConfigError("synthetic GLM experiments use the binomial family")
    cells = run_grid(args.model, grid["n"], grid["p"], grid["nodes"], args.replicas,
                     args.seed, args.maxit, args.tol)
    record = {"model": args.model, "seed": args.seed, "replicas": args.replicas,
              **cells_record(cells)}
    _emit(args, record, format_cells(cells))
    return EXIT_OK


def _read_fit(path):
    try:
        with open(path, encoding="utf-8") as fh:
            rec = json.load(fh)
        coefs = rec["coefficients"]
        return [c["name"] for c in coefs], [float(c["estimate"]) for c in coefs]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise errors.DataError(f"{path} is not a machine-format fit report: {e}") from None


def cmd_compare(args):
    names_a, beta_a = _read_fit(args.central)
    names_b, beta_b = _read_fit(args.other)
    verdicts = compare_coefficients(names_a, beta_a, names_b, beta_b, args.rtol, args.atol)
    record = verdict_record(verdicts)
    _emit(args, record, format_verdicts(verdicts))
    return EXIT_OK if record["pass"] else EXIT_MISMATCH


def _common(p):
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--maxit", type=int, default=DEFAULT_MAXIT)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fedglm", description="Fit LMs/GLMs by exchanging only triangular QR factors.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model centrally or across nodes")
    fit.add_argument("--data", help="CSV file (the node's own partition in socket mode)")
    fit.add_argument("--schema", help="JSON schema with column kinds and level orders")
    fit.add_argument("--sep", default=",", help="CSV delimiter")
    fit.add_argument("--model", choices=("lm", "glm"), default="lm")
    fit.add_argument("--family", default="gaussian",
                     choices=("gaussian", "binomial", "poisson", "gamma"))
    fit.add_argument("--link", default=None, choices=("identity", "logit", "log", "inverse"))
    fit.add_argument("--response")
    fit.add_argument("--predictors", help="comma-separated predictor columns")
    fit.add_argument("--no-intercept", action="store_true")
    fit.add_argument("--nodes", type=int, default=1)
    fit.add_argument("--transport", choices=("inproc", "socket"), default="inproc")
    fit.add_argument("--node-id", type=int, default=None)
    fit.add_argument("--peers", default=None, help="host:port list indexed by node id")
    fit.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                     help="per-round deadline in seconds")
    fit.add_argument("--check", action="store_true",
                     help="also fit centrally and apply the pairwise comparison rule")
    fit.add_argument("--rtol", type=float, default=DEFAULT_RTOL)
    fit.add_argument("--atol", type=float, default=DEFAULT_ATOL)
    _common(fit)
    fit.set_defaults(func=cmd_fit)

    exp = sub.add_parser("experiment", help="distributed-vs-centralized MAE over a grid")
    exp.add_argument("--model", choices=("lm", "glm"), default="lm")
    exp.add_argument("--family", default="binomial")
    exp.add_argument("--grid", default="n=100,1000;p=1,3,5;nodes=5",
                     help='e.g. "n=100,1000;p=1,3;nodes=10:100:5"')
    exp.add_argument("--replicas", type=int, default=25)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--transport", choices=("inproc",), default="inproc")
    _common(exp)
    exp.set_defaults(func=cmd_experiment)

    cmp_ = sub.add_parser("compare", help="compare two machine-format fit reports")
    cmp_.add_argument("central", help="reference (centralized) fit report")
    cmp_.add_argument("other", help="fit report to check against the reference")
    cmp_.add_argument("--rtol", type=float, default=DEFAULT_RTOL)
    cmp_.add_argument("--atol", type=float, default=DEFAULT_ATOL)
    cmp_.add_argument("--format", choices=("text", "machine"), default="text")
    cmp_.add_argument("-v", "--verbose", action="store_true")
    cmp_.set_defaults(func=cmd_compare)
    return parser


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (errors.ConfigError, errors.NameMismatch)):
        return EXIT_USAGE
    if isinstance(exc, (errors.DataError, OSError)) and not isinstance(exc, ConnectionError):
        return EXIT_DATA
    if isinstance(exc, (errors.ProtocolError, errors.CodecError, ConnectionError)):
        return EXIT_NETWORK
    if isinstance(exc, (errors.SingularDesign, errors.NotConverged, errors.DomainError,
                        errors.DegenerateDof, errors.ShapeError, errors.EmptyInput)):
        return EXIT_NUMERICAL
    return EXIT_NUMERICAL if isinstance(exc, errors.FedGLMError) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (errors.FedGLMError, OSError) as e:
        print(f"fedglm: error: {e}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
