"""
Command-line entry for the ridge-regression lab.

    qridge cv --N 10 --M 3 --L 5 --out cv.json
    qridge fit --data train.csv --alpha 2.0 --out fit.json
    qridge sweep-fidelity --s-list 4 6 8 10 --out fid.json
    qridge sweep-channel --Q 2 --N 2 --out chan.json
    qridge bounds --out bounds.json
    qridge gen --N 12 --M 3 --out data.json

Exit codes: 0 ok, 2 bad input, 3 contract or degeneracy, 4 resource budget.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from experiment_runner import emit_report, load_config, run
from qridge_errors import QridgeError

logger = logging.getLogger(__name__)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("exact", "noise"))
    p.add_argument("--out", help="report path (JSON); omitted means summary to stdout only")
    p.add_argument("--log-level", default="WARNING",
                   choices=("DEBUG", "INFO", "WARNING", "ERROR"))


def _data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", dest="data_path", help="CSV with y as the last column")
    p.add_argument("--y", dest="y_path", help="separate one-column CSV of y")
    p.add_argument("--N", type=int, help="rows of a generated dataset")
    p.add_argument("--M", type=int, help="features of a generated dataset")
    p.add_argument("--kind", choices=("random", "good_fit", "synthetic"), default=None)
    p.add_argument("--noise", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qridge", description="Quantum ridge-regression simulator and bound checks")
    sub = parser.add_subparsers(dest="command", required=True)

    cv = sub.add_parser("cv", help="K-fold cross-validation over an alpha grid")
    _common(cv)
    _data(cv)
    cv.add_argument("--K", type=int)
    cv.add_argument("--alpha-min", type=float)
    cv.add_argument("--alpha-max", type=float)
    cv.add_argument("--L", type=int)
    cv.add_argument("--alphas", type=float, nargs="+")
    cv.add_argument("--s", type=int)
    cv.add_argument("--eps", type=float)
    cv.add_argument("--readout", choices=("qft", "exact"))

    fit = sub.add_parser("fit", help="prepare the fitting-parameter state and predict")
    _common(fit)
    _data(fit)
    fit.add_argument("--alpha", type=float)
    fit.add_argument("--s", type=int)
    fit.add_argument("--eps", type=float)
    fit.add_argument("--readout", choices=("qft", "exact"))

    fid = sub.add_parser("sweep-fidelity", help="fidelity against phase-register size")
    _common(fid)
    fid.add_argument("--s-list", type=int, nargs="+")
    fid.add_argument("--family-size", type=int)
    fid.add_argument("--alpha", type=float)
    fid.add_argument("--readout", choices=("qft", "exact"))

    chan = sub.add_parser("sweep-channel", help="parallel-simulation channel error against time step")
    _common(chan)
    chan.add_argument("--Q", dest="channel_Q", type=int)
    chan.add_argument("--N", dest="channel_N", type=int)
    chan.add_argument("--t", dest="channel_t", type=float)
    chan.add_argument("--epsilon", dest="channel_epsilon", type=float)
    chan.add_argument("--delta-t", dest="delta_t_list", type=float, nargs="+")
    chan.add_argument("--safety", dest="channel_safety", type=float)
    chan.add_argument("--dimension-budget", type=int)

    bounds = sub.add_parser("bounds", help="check closed-form bounds against brute force")
    _common(bounds)
    bounds.add_argument("--family-size", type=int)

    gen = sub.add_parser("gen", help="generate a dataset and its metadata")
    _common(gen)
    _data(gen)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    raw = vars(args).copy()
    for key in ("config", "log_level"):
        raw.pop(key, None)
    N, M, kind, noise = (raw.pop(k, None) for k in ("N", "M", "kind", "noise"))
    if any(v is not None for v in (N, M, kind, noise)):
        gen: Dict[str, Any] = {"kind": kind or "random"}
        if N is not None:
            gen["N"] = N
        if M is not None:
            gen["M"] = M
        if noise is not None:
            gen["noise"] = noise
        raw["generator"] = gen
    if raw.get("s_list") is not None:
        raw["s_list"] = list(raw["s_list"])
    return {k: v for k, v in raw.items() if v is not None}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, **_overrides(args))
        report = run(cfg)
        if cfg.out:
            written = emit_report(report, cfg.out)
            for name, path in written.items():
                logger.info("wrote %s -> %s", name, path)
        summary = report.summary
        print(f"{report.command}: " + ", ".join(
            f"{k}={v}" for k, v in summary.items() if not isinstance(v, (dict, list))
        ))
    except QridgeError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
