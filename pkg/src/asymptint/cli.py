"""Command-line front end: ``asymptint {check,solve,oscillate,pde,verify}``.

Exit codes
----------
0  success (a scheme applies / certified convergence / checks pass)
1  error (bad configuration, invalid parameters)
2  hypotheses fail (no applicable scheme, criteria or ordering failure)
3  iteration did not converge
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import criteria, fixpoint, pde_radial, verify
from .coefficients import (
    EmdenFowler,
    ExpDecay,
    ExprCoefficient,
    GeneralLipschitz,
    PowerDecay,
)
from .errors import (
    AsymptError,
    CandidateOutOfSet,
    ConfigError,
    CriteriaFail,
    NoConvergence,
    OrderingViolated,
)
from .funcspace import Grid, GridFunction, graded_grid, make_grid

log = logging.getLogger("asymptint")

EXIT_OK, EXIT_ERROR, EXIT_CRITERIA, EXIT_NOCONV = 0, 1, 2, 3
PDE_RESIDUAL_TOL = 1e-6


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class CoefficientSpec(_Strict):
    kind: Literal["power", "exp", "expr"]
    mu: Optional[float] = None
    p: Optional[float] = None
    gamma: Optional[float] = None
    expr: Optional[str] = None
    envelope: Optional[tuple[float, float]] = None
    t_start: float = 1.0

    def build(self):
        if self.kind == "power":
            return PowerDecay(_need(self.mu, "mu"), _need(self.p, "p"), self.t_start)
        if self.kind == "exp":
            return ExpDecay(_need(self.mu, "mu"), _need(self.gamma, "gamma"), self.t_start)
        return ExprCoefficient(_need(self.expr, "expr"), _need(self.envelope, "envelope"), self.t_start)


def _need(value, name):
    if value is None:
        raise ConfigError(f"field {name!r} is required for this coefficient kind")
    return value


class NonlinearitySpec(_Strict):
    type: Literal["emden_fowler", "general"] = "emden_fowler"
    lam: Optional[float] = Field(default=None, alias="lambda")
    q: Optional[CoefficientSpec] = None
    f: Optional[str] = None
    k: Optional[CoefficientSpec] = None
    k2: Optional[CoefficientSpec] = None

    def build(self):
        if self.type == "emden_fowler":
            return EmdenFowler(_need(self.lam, "lambda"), _need(self.q, "q").build())
        return GeneralLipschitz(_need(self.f, "f"), _need(self.k, "k").build(),
                                self.k2.build() if self.k2 else None)


class PDESpec(_Strict):
    n: int
    a: CoefficientSpec
    g: CoefficientSpec
    C: float
    rho: float
    h0: float
    s0: float = 1.0
    eps: Optional[float] = None
    A: Optional[float] = None

    def build(self) -> pde_radial.RadialPDEInstance:
        return pde_radial.RadialPDEInstance(self.n, self.a.build(), self.g.build(), self.C, self.rho, self.h0,
                                            self.s0, self.eps, self.A)


class ProblemSpec(_Strict):
    nonlinearity: Optional[NonlinearitySpec] = None
    t0: float = 1.0
    params: dict[str, float | str] = Field(default_factory=dict)
    pde: Optional[PDESpec] = None

    def instance(self) -> criteria.ProblemInstance:
        nl = _need(self.nonlinearity, "problem.nonlinearity").build()
        return criteria.ProblemInstance(nl, self.t0, dict(self.params))


class SchemeSpec(_Strict):
    name: Literal["auto", "bounded_limit", "dube_mingarelli", "derivative_space", "linear_like", "wronskian",
                  "sandwich"] = "auto"


class GridSpec(_Strict):
    ratio: float = fixpoint.DEFAULT_RATIO
    n: Optional[int] = None
    t_max: Optional[float] = None


class ToleranceSpec(_Strict):
    tol: float = 1e-10
    max_iter: int = 200


class OutputSpec(_Strict):
    dir: Optional[str] = None
    prefix: str = "run"


class OscillateSpec(_Strict):
    t_end: float
    x0: float = 1.0
    v0: float = 0.0


class RunConfig(_Strict):
    problem: ProblemSpec
    scheme: SchemeSpec = Field(default_factory=SchemeSpec)
    grid: GridSpec = Field(default_factory=GridSpec)
    tolerances: ToleranceSpec = Field(default_factory=ToleranceSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    oscillate: Optional[OscillateSpec] = None
    seed: int = 0

    def dump(self) -> dict:
        return self.model_dump(by_alias=True, exclude_none=True, mode="json")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        parts = []
        for e in exc.errors():
            loc = ".".join(str(x) for x in e["loc"])
            parts.append(f"{loc}: {e['msg']}")
        raise ConfigError("invalid configuration: " + "; ".join(parts)) from None


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)


def dumps(obj) -> str:
    """Deterministic JSON; floats keep full round-trip precision."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_default, allow_nan=True) + "\n"


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------


def _grid_for(cfg: RunConfig, t0: float) -> Grid:
    g = cfg.grid
    t_max = g.t_max or fixpoint.DEFAULT_SPAN * t0
    if g.n is not None:
        return make_grid(t0, t_max, g.n)
    return graded_grid(t0, t_max, g.ratio)


def _emit(cfg: RunConfig, name: str, payload: str, stdout: bool = True):
    if cfg.output.dir:
        out = Path(cfg.output.dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{cfg.output.prefix}_{name}").write_text(payload)
    elif stdout:
        sys.stdout.write(payload)


def cmd_check(cfg: RunConfig) -> int:
    inst = cfg.problem.instance()
    report = criteria.run_all(inst)
    _emit(cfg, "check.json", dumps(report.to_dict()))
    log.info("applicable schemes: %s", report.applicable or "none")
    return EXIT_OK if report.applicable else EXIT_CRITERIA


def _choose_scheme(cfg: RunConfig, inst) -> str:
    if cfg.scheme.name != "auto":
        return cfg.scheme.name
    report = criteria.run_all(inst)
    if report.applicable:
        return report.applicable[0]
    if report.checks:
        return report.checks[0].scheme
    raise CriteriaFail("no scheme could be checked for this instance")


def solve_payload(cfg: RunConfig, force: bool = False) -> tuple[dict, str, verify.SolutionProfile]:
    inst = cfg.problem.instance()
    name = _choose_scheme(cfg, inst)
    grid = _grid_for(cfg, inst.t0)
    scheme, check = fixpoint.make_scheme(inst, name, grid, force)
    u, cert = fixpoint.iterate(scheme, tol=cfg.tolerances.tol, max_iter=cfg.tolerances.max_iter, force=force)
    prof = verify.SolutionProfile.from_fixed_point(scheme, u, cert)
    verify.verify_profile(prof)
    payload = {
        "scheme": name,
        "constants": check.constants,
        "criteria": check.to_dict(),
        "config": cfg.dump(),
        **prof.to_dict(),
    }
    t = prof.grid.nodes
    rows = ["t,x,xprime"] + [f"{a:.17g},{b:.17g},{c:.17g}" for a, b, c in
                             zip(t, prof.x.values, prof.xprime.values)]
    return payload, "\n".join(rows) + "\n", prof


def cmd_solve(cfg: RunConfig, force: bool = False) -> int:
    payload, csv, prof = solve_payload(cfg, force)
    _emit(cfg, "solve.json", dumps(payload))
    _emit(cfg, "solution.csv", csv, stdout=False)
    c = prof.certificate
    log.info("%s: %d iterations, error bound %.3g", payload["scheme"], c.iterations, c.error_bound)
    return EXIT_OK


def cmd_oscillate(cfg: RunConfig) -> int:
    if cfg.oscillate is None:
        raise ConfigError("oscillate: missing 'oscillate' section (t_end, x0, v0)")
    inst = cfg.problem.instance()
    o = cfg.oscillate
    res = verify.oscillation_demo(inst.nonlinearity, o.t_end, o.x0, o.v0, inst.t0)
    try:
        atk = criteria.check_atkinson(inst)
        divergent = atk.oscillatory
    except AsymptError:
        divergent = None
    payload = {**res.to_dict(), "classification": verify.classify(res), "atkinson_divergent": divergent}
    _emit(cfg, "crossings.json", dumps(payload))
    _emit(cfg, "trajectory.csv", res.to_csv(), stdout=False)
    return EXIT_OK


def cmd_pde(cfg: RunConfig, force: bool = False) -> int:
    spec = _need(cfg.problem.pde, "problem.pde")
    inst = spec.build()
    grid = _grid_for(cfg, inst.s0)
    res = pde_radial.run_pipeline(inst, cfg.tolerances.tol, grid, force)
    payload = {
        "instance": inst.to_dict(),
        "certificate": res.certificate.to_dict(),
        **res.profile.to_dict(),
    }
    _emit(cfg, "pde.json", dumps(payload))
    _emit(cfg, "pde.csv", res.profile.to_csv(), stdout=False)
    checks = res.profile.checks
    ok = all(v for v in checks.values() if isinstance(v, bool)) and checks["subsolution_residual"] <= PDE_RESIDUAL_TOL
    return EXIT_OK if ok else EXIT_CRITERIA


def cmd_verify(path: str, out_dir: str | None = None) -> int:
    """Re-run the verification of a saved solve JSON."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read solve record {path}: {exc}") from None
    cfg = RunConfig.model_validate(data["config"])
    inst = cfg.problem.instance()
    x = GridFunction.from_dict(data["solution"])
    xp = GridFunction.from_dict(data["derivative"], grid=x.grid)
    scheme, _ = fixpoint.make_scheme(inst, data["scheme"], x.grid, force=True)
    prof = verify.SolutionProfile(data["scheme"], x, xp, scheme.params(), inst.nonlinearity, None, scheme)
    result = verify.verify_profile(prof)
    text = dumps(result)
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "verification.json").write_text(text)
    else:
        sys.stdout.write(text)
    ok = all(result["profiles"].values()) and result["rk"]["within_envelope"]
    return EXIT_OK if ok else EXIT_CRITERIA


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asymptint", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("check", "solve", "oscillate", "pde", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config (for verify: a saved solve JSON)")
        sp.add_argument("--batch", help="file listing one config path per line")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--force", action="store_true", help="run even if the hypotheses fail")
        sp.add_argument("--grid-n", type=int, dest="grid_n")
        sp.add_argument("--tmax", type=float)
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    data = cfg.model_dump(by_alias=True)
    if args.out:
        data["output"]["dir"] = args.out
    if args.tol is not None:
        data["tolerances"]["tol"] = args.tol
    if args.grid_n is not None:
        data["grid"]["n"] = args.grid_n
    if args.tmax is not None:
        data["grid"]["t_max"] = args.tmax
    return RunConfig.model_validate(data)


def run_one(command: str, path: str, args) -> int:
    try:
        if command == "verify":
            return cmd_verify(path, args.out)
        cfg = _apply_overrides(load_config(path), args)
        if command == "check":
            return cmd_check(cfg)
        if command == "solve":
            return cmd_solve(cfg, args.force)
        if command == "oscillate":
            return cmd_oscillate(cfg)
        return cmd_pde(cfg, args.force)
    except NoConvergence as exc:
        log.error("%s", exc)
        return EXIT_NOCONV
    except (CriteriaFail, OrderingViolated, CandidateOutOfSet) as exc:
        log.error("%s", exc)
        return EXIT_CRITERIA
    except (AsymptError, ValueError, KeyError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


def main(argv=None) -> int:
    level = os.environ.get("ASYMPT_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    args = build_parser().parse_args(argv)
    if args.batch:
        try:
            paths = [ln.strip() for ln in Path(args.batch).read_text().splitlines() if ln.strip()]
        except OSError as exc:
            log.error("cannot read batch file: %s", exc)
            return EXIT_ERROR
        base = Path(args.batch).parent
        codes = [run_one(args.command, str(base / pth), args) for pth in paths]
        return max(codes, default=EXIT_OK)
    if not args.config:
        log.error("--config or --batch is required")
        return EXIT_ERROR
    return run_one(args.command, args.config, args)


if __name__ == "__main__":
    sys.exit(main())
