"""Command-line front end.

Exit codes: 0 success, 1 input could not be read or parsed, 2 the analysis
or a validation step failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .builtin import DEMO_DIRECTIONS, demo_network, resolve_path
from .grid_model import DynamicsConfig, build_grid_network, load_config, reduce_case
from .matpower import CaseParseError, load_case
from .matrix_core import ValidationError, eigenvalues
from .network import AssembledNetwork, check_assumptions
from .sensitivity import analyze
from .stability_region import feasibility_boundary, monte_carlo_growth, mss_spectral_radius

log = logging.getLogger("gridsens")


class InputError(Exception):
    """Unreadable or unparsable input (exit code 1)."""


def fmt(x) -> str:
    # Shortest decimal that round-trips to the same double.
    return repr(float(x))


def _configure_logging() -> None:
    level = os.environ.get("GRIDSENS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _load_inputs(args) -> tuple:
    """Case, config, and provenance lines for case-based commands."""
    if not args.case:
        raise ValidationError("--case is required unless --example is given")
    case_path = resolve_path(args.case)
    try:
        case = load_case(case_path)
    except OSError as exc:
        raise InputError(f"cannot read case {case_path}: {exc.strerror or exc}") from exc
    except CaseParseError as exc:
        raise InputError(f"{case_path}: {exc}") from exc
    prov = [f"case: {case_path.name}"]
    if args.config:
        cfg_path = resolve_path(args.config)
        try:
            raw = cfg_path.read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read config {cfg_path}: {exc.strerror or exc}") from exc
        try:
            config = load_config(cfg_path)
        except json.JSONDecodeError as exc:
            raise InputError(f"{cfg_path}: invalid JSON: {exc}") from exc
        except TypeError as exc:
            raise ValidationError(f"{cfg_path}: {exc}") from exc
        prov.append(f"config: {cfg_path.name} sha256={hashlib.sha256(raw).hexdigest()}")
    else:
        config = DynamicsConfig()
        prov.append(f"config: defaults sha256={config.digest()}")
    return case, config, prov


def _network(args, require_stable: bool = True) -> tuple[AssembledNetwork, list]:
    if args.example is not None:
        return demo_network(args.example), [f"example: {args.example}"]
    case, config, prov = _load_inputs(args)
    net, _ = build_grid_network(case, config, require_stable=require_stable)
    return net, prov


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    return out


def _write(path: Path, lines: list) -> None:
    path.write_text("\n".join(lines) + "\n")
    log.info("wrote %s", path)


def cmd_check(args) -> int:
    if args.example is not None:
        net, prov = _network(args)
    else:
        case, config, prov = _load_inputs(args)
        if config.contingencies:
            net, _ = build_grid_network(case, config, require_stable=False)
        else:
            net = AssembledNetwork(reduce_case(case, config).A_rel)
    rep = check_assumptions(net)
    lines = [*prov,
             f"states: {net.dim}",
             f"spectral_radius: {fmt(rep.radius)}",
             f"min_singular_value: {fmt(rep.min_singular)}"]
    lines += [f"observable {k}: {'yes' if v else 'no'}" for k, v in rep.observable.items()]
    lines += [f"FAIL {msg}" for msg in rep.failures()]
    lines.append("status: " + ("ok" if rep.ok else "failed"))
    print("\n".join(lines))
    return 0 if rep.ok else 2


def cmd_analyze(args) -> int:
    net, prov = _network(args)
    warnings = check_assumptions(net).failures()
    for msg in warnings:
        log.warning("assumption check: %s", msg)
    rep = analyze(net)
    rank = {k: i for i, k in enumerate(rep.ranking, 1)}
    rows = ["link,F,S,F_normalized,S_normalized,rank"]
    for k in net.link_ids:
        rows.append(",".join([k, fmt(rep.F[k]), fmt(rep.S[k]), fmt(rep.normalized_F[k]),
                              fmt(rep.normalized_S[k]), str(rank[k])]))
    report = [f"gridsens {__version__}", *prov,
              f"links: {len(net.links)}",
              f"interaction_index: {fmt(rep.I)}",
              "f_ranking: " + " ".join(rep.ranking),
              "s_ranking: " + " ".join(rep.s_ranking),
              "rankings_agree: " + ("yes" if rep.ranking == rep.s_ranking else "no")]
    report += [f"assumption_warning: {msg}" for msg in warnings]
    out = _out_dir(args)
    _write(out / "sensitivity.csv", rows)
    _write(out / "report.txt", report)
    print("\n".join(report))
    return 0


def cmd_region(args) -> int:
    net, prov = _network(args)
    region = feasibility_boundary(net, n_angles=args.angles, tol=args.tol)
    pts = region.boundary
    rows = ["angle,sigma1,sigma2"]
    rows += [f"{fmt(a)},{fmt(p[0])},{fmt(p[1])}" for a, p in zip(region.angles, pts)]
    rects = ["name,corner_sigma1,corner_sigma2,area"]
    for name in ("uniform", "f_scaled", "s_scaled"):
        r = region.rectangles[name]
        rects.append(f"{name},{fmt(r.corner[0])},{fmt(r.corner[1])},{fmt(r.area)}")
    out = _out_dir(args)
    _write(out / "boundary.csv", rows)
    _write(out / "rectangles.csv", rects)
    print("\n".join([*prov, f"links: {' '.join(region.link_ids)}", *rects]))
    return 0


def _parse_sigmas(text: str, count: int) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"--sigma must be a comma-separated list of numbers, got {text!r}") from None
    if len(vals) == 1:
        vals = vals * count
    if len(vals) != count:
        raise ValidationError(f"--sigma needs 1 or {count} values, got {len(vals)}")
    if any(not math.isfinite(v) or v < 0 for v in vals):
        raise ValidationError("--sigma values must be finite and nonnegative")
    return np.array(vals)


def cmd_simulate(args) -> int:
    net, prov = _network(args)
    sig = net.sigmas if args.sigma is None else _parse_sigmas(args.sigma, len(net.links))
    if args.trials < 1 or args.horizon < 2:
        raise ValidationError("--trials must be >= 1 and --horizon >= 2")
    est = monte_carlo_growth(net, sig, trials=args.trials, horizon=args.horizon, seed=args.seed)
    rho = mss_spectral_radius(net, sig)
    rows = ["t,mean_sq_norm"]
    rows += [f"{t},{fmt(v)}" for t, v in enumerate(est.mean_sq_norm)]
    verdict = "grow" if est.rate > 0 else "decay"
    footer = [f"# rate {fmt(est.rate)}",
              f"# rate_half_width {fmt(est.half_width)}",
              f"# log_rho {fmt(math.log(rho)) if rho > 0 else '-inf'}",
              f"# rho {fmt(rho)}",
              f"# classification {verdict}"]
    out = _out_dir(args)
    _write(out / "growth.csv", rows + footer)
    print("\n".join([*prov, "sigma: " + ",".join(fmt(s) for s in sig),
                     *(f[2:] for f in footer)]))
    return 0


def _g(x: float) -> str:
    return f"{x:.12g}"


def cmd_example(args) -> int:
    number = args.example if args.example is not None else args.number
    if number is None:
        raise ValidationError("example number required (1 or 2)")
    net = demo_network(number)
    rep = analyze(net)
    ev = sorted(eigenvalues(net.A).eigenvalues, key=lambda z: (-z.real, -z.imag))
    lines = [f"example {number}", "A ="]
    lines += ["  " + " ".join(f"{v:8.4g}" for v in row) for row in net.A]
    for link in net.links:
        lines.append(f"B[{link.id}] = [{' '.join(_g(v) for v in link.B)}]")
        lines.append(f"C[{link.id}] = [{' '.join(_g(v) for v in link.C)}]")
    lines.append("eigenvalues: " + ", ".join(
        _g(z.real) if abs(z.imag) < 1e-12 else f"{_g(z.real)}{z.imag:+.12g}j" for z in ev))
    lines += [f"F[{k}] = {_g(v)}" for k, v in rep.F.items()]
    lines += [f"S[{k}] = {_g(v)}" for k, v in rep.S.items()]
    lines.append(f"I = {_g(rep.I)}")
    print("\n".join(lines))
    return 0


COMMANDS = {"check": cmd_check, "analyze": cmd_analyze, "region": cmd_region,
            "simulate": cmd_simulate, "example": cmd_example}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridsens",
                                description="Contingency sensitivity analysis for uncertain networks.")
    p.add_argument("--version", action="version", version=f"gridsens {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    examples = sorted(DEMO_DIRECTIONS)

    def common(sp, out=True):
        sp.add_argument("--case", help="MATPOWER case file, or builtin:case39")
        sp.add_argument("--config", help="dynamics config JSON, or builtin:green / builtin:red")
        sp.add_argument("--example", type=int, choices=examples, help="use a built-in demo system")
        if out:
            sp.add_argument("--out", default=".", help="output directory")

    common(sub.add_parser("check", help="check stability, invertibility and observability"), out=False)
    common(sub.add_parser("analyze", help="F/S sensitivities and the interaction index"))
    sp = sub.add_parser("region", help="map the two-link mean-square stability region")
    common(sp)
    sp.add_argument("--angles", type=int, default=181)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp = sub.add_parser("simulate", help="Monte Carlo estimate of the mean-square growth")
    common(sp)
    sp.add_argument("--sigma", help="comma-separated sigmas; one value applies to every link")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--horizon", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp = sub.add_parser("example", help="print a built-in demo system and its indices")
    sp.add_argument("number", type=int, nargs="?", choices=examples)
    sp.add_argument("--example", type=int, choices=examples)
    return p


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
