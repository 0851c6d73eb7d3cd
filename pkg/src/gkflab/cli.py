"""Command-line front end.

Subcommands: expect (closed-form predictions), gmf (Minkowski functionals),
simulate (field dumps), validate {ec|volume|kff|poincare|tube|sup} (Monte
Carlo experiments with JSON/CSV reports).

Settings resolve as flags > config file > defaults; the config file is a flat
key = value document with namespaced keys, and unknown keys are rejected with
their line number.  GKFLAB_SEED provides a fallback master seed.  Exit codes:
0 success or PASS, 1 experiment FAIL, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .fieldsim import GridSpec, simulate_field, write_field_dump
from .geomcore import SpaceDescriptor, lk_model_space
from .gkf import expected_lk
from .gmf import (
    DomainDescriptor,
    GmfNumericSettings,
    gmf_closed_form_vector,
    gmf_numeric,
    has_closed_form,
)
from .mcharness import ExperimentConfig, run_experiment

__all__ = ["main", "entrypoint"]


class CliError(Exception):
    """Configuration or usage problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# config file

_KNOWN_KEYS = {
    "space.kind": str,
    "space.sides": str,
    "space.radius": float,
    "space.n": int,
    "space.alpha": float,
    "space.lambda2": float,
    "field.ell": float,
    "field.spacing": float,
    "domain.kind": str,
    "domain.u": str,
    "domain.a": float,
    "domain.b": float,
    "domain.k": int,
    "mc.replicates": int,
    "mc.seed": int,
    "mc.workers": int,
    "mc.z_gate": float,
    "mc.mesh_level": int,
    "mc.n_list": str,
    "mc.rho_list": str,
    "mc.jmax": int,
    "mc.samples": int,
    "mc.target_tail": float,
    "mc.alpha": float,
    "mc.beta": float,
    "out.format": str,
    "out.path": str,
}


def load_config(path: str) -> dict:
    values: dict = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _KNOWN_KEYS:
            raise CliError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _KNOWN_KEYS[key](val)
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


class Settings:
    """Flag > config file > default resolution."""

    def __init__(self, args: argparse.Namespace, filemap: dict):
        self.args = args
        self.filemap = filemap

    def get(self, flag: str, filekey: str | None = None, default=None, cast=None):
        val = getattr(self.args, flag, None)
        if val is None and filekey is not None:
            val = self.filemap.get(filekey)
        if val is None:
            return default
        return cast(val) if cast is not None and isinstance(val, str) else val


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError as exc:
        raise CliError(f"bad numeric list {text!r}: {exc}") from exc


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError as exc:
        raise CliError(f"bad integer list {text!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# descriptor parsing


def parse_space(settings: Settings) -> SpaceDescriptor | None:
    spec = settings.get("space")
    lambda2 = settings.get("lambda2", "space.lambda2", cast=float)
    ell = settings.get("ell", "field.ell", cast=float)
    if lambda2 is None:
        lambda2 = 1.0 / ell**2 if ell is not None else 1.0
    if spec is None:
        kind = settings.filemap.get("space.kind")
        if kind is None:
            return None
        if kind in ("rect", "rectangle"):
            spec = f"rect:{settings.filemap.get('space.sides', '')}"
        elif kind == "point":
            spec = "point"
        elif kind == "ball":
            spec = f"ball:{settings.filemap.get('space.n')},{settings.filemap.get('space.radius')}"
        elif kind == "sphere2":
            spec = f"sphere2:{settings.filemap.get('space.radius', 1.0)}"
        elif kind == "cap":
            spec = f"cap:{settings.filemap.get('space.alpha')}"
        else:
            raise CliError(f"unknown space.kind {kind!r}")
    name, _, params = str(spec).partition(":")
    try:
        if name == "point":
            return SpaceDescriptor.rectangle((), metric_scale=lambda2)
        if name in ("rect", "rectangle"):
            sides = _float_list(params)
            return SpaceDescriptor.rectangle(sides, metric_scale=lambda2)
        if name == "ball":
            n, radius = params.split(",")
            return SpaceDescriptor.ball(int(n), float(radius), metric_scale=lambda2)
        if name == "sphere2":
            return SpaceDescriptor.sphere2(float(params or 1.0), metric_scale=lambda2)
        if name == "cap":
            return SpaceDescriptor.cap(math.radians(float(params)), metric_scale=lambda2)
    except (ValueError, CliError) as exc:
        raise CliError(f"bad space descriptor {spec!r}: {exc}") from exc
    raise CliError(f"unknown space kind {name!r}")


def parse_domain(settings: Settings, u: float | None = None) -> DomainDescriptor:
    kind = settings.get("domain", "domain.kind", default="halfline")
    k = settings.get("k", "domain.k", default=1, cast=int)
    if u is None:
        u_list = _resolve_u(settings)
        u = u_list[0] if u_list else None
    try:
        if kind == "halfline":
            if u is None:
                raise CliError("halfline domain needs --u")
            return DomainDescriptor.half_line(u)
        if kind == "interval":
            a = settings.get("a", "domain.a", cast=float)
            b = settings.get("b", "domain.b", cast=float)
            if a is None or b is None:
                raise CliError("interval domain needs --a and --b")
            return DomainDescriptor.interval(a, b)
        if kind == "ballcomp":
            if u is None:
                raise CliError("ballcomp domain needs --u")
            return DomainDescriptor.ball_complement(u, k=k)
        if kind == "fullspace":
            return DomainDescriptor.full_space(k=k)
    except ValueError as exc:
        raise CliError(f"bad domain: {exc}") from exc
    raise CliError(f"unknown domain kind {kind!r}")


def _resolve_u(settings: Settings) -> tuple[float, ...]:
    raw = settings.get("u", "domain.u")
    if raw is None:
        return ()
    return _float_list(raw)


def _resolve_seed(settings: Settings, default: int | None = 0) -> int | None:
    seed = settings.get("seed", "mc.seed", cast=int)
    if seed is None:
        env = os.environ.get("GKFLAB_SEED")
        if env is not None:
            try:
                seed = int(env)
            except ValueError as exc:
                raise CliError(f"GKFLAB_SEED must be an integer, got {env!r}") from exc
    return default if seed is None else seed


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_expect(settings: Settings) -> int:
    space = parse_space(settings)
    if space is None:
        raise CliError("expect needs a space (--space or space.kind in the config)")
    lk = lk_model_space(space)
    orders_raw = settings.get("i", default="0")
    orders = _int_list(orders_raw)
    for i in orders:
        if not 0 <= i <= lk.dim:
            raise CliError(f"curvature order {i} outside 0..{lk.dim}")
    kind = settings.get("domain", "domain.kind", default="halfline")
    u_list = _resolve_u(settings)
    if kind != "fullspace" and not u_list:
        raise CliError(f"domain {kind!r} needs --u")
    rows = []
    max_terms = lk.dim + 1
    for u in u_list or (None,):
        domain = parse_domain(settings, u=u)
        for i in orders:
            gmf = gmf_closed_form_vector(domain, lk.dim - i)
            pred = expected_lk(i, lk, gmf, space=space, domain=domain)
            terms = [f"{t:.6f}" for t in pred.terms]
            terms += [""] * (max_terms - len(terms))
            u_text = "" if u is None else f"{u:.6f}"
            rows.append([u_text, str(i), f"{pred.value:.6f}", *terms])
    header = ["u", "i", "predicted"] + [f"term_j{j}" for j in range(max_terms)]
    text = ",".join(header) + "\n" + "\n".join(",".join(r) for r in rows) + "\n"
    _emit(text, settings.get("out", "out.path"))
    return 0


def cmd_gmf(settings: Settings) -> int:
    domain = parse_domain(settings)
    j_max = settings.get("jmax", "mc.jmax", default=2, cast=int)
    force_numeric = bool(settings.get("force_numeric", default=False))
    if has_closed_form(domain) and not force_numeric:
        vec = gmf_closed_form_vector(domain, j_max)
        lines = ["j,value"] + [f"{j},{vec[j]:.6f}" for j in range(j_max + 1)]
    else:
        cfg = GmfNumericSettings(
            samples=settings.get("samples", "mc.samples", default=200_000, cast=int),
            seed=_resolve_seed(settings),
        )
        vec = gmf_numeric(domain, j_max, cfg)
        lines = ["j,value,stderr"] + [
            f"{j},{vec[j]:.6f},{vec.errors[j]:.6f}" for j in range(j_max + 1)
        ]
    _emit("\n".join(lines) + "\n", settings.get("out", "out.path"))
    return 0


def cmd_simulate(settings: Settings) -> int:
    dims_raw = settings.get("dims", default="50,50")
    dims = _int_list(dims_raw)
    spacing = settings.get("spacing", "field.spacing", default=0.2, cast=float)
    ell = settings.get("ell", "field.ell", default=1.0, cast=float)
    k = settings.get("k", "domain.k", default=1, cast=int)
    seed = _resolve_seed(settings, default=None)
    if seed is None:
        raise CliError("simulate needs --seed (or the GKFLAB_SEED environment variable)")
    binary = bool(settings.get("binary", default=False))
    out = settings.get("out", "out.path")
    if binary and not out:
        raise CliError("binary dumps need --out")
    try:
        grid = GridSpec(dims=dims, spacing=spacing)
        sample = simulate_field(grid, ell, k, seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if out:
        write_field_dump(sample, out, binary=binary)
    else:
        from .fieldsim import _field_header

        sys.stdout.write(_field_header(sample) + "\n")
        for comp in sample.values.reshape(sample.k, -1):
            for v in comp:
                sys.stdout.write(f"{float(v)!r}\n")
    return 0


_VALIDATE_KINDS = ("ec", "volume", "kff", "poincare", "tube", "sup")

_DEFAULT_THRESHOLDS = {
    "ec": (1.0, 2.0, 2.5),
    "volume": (-1.0, 0.0, 1.0, 2.0),
    "tube": (1.0,),
}

_DEFAULT_REPS = {
    "ec": 2000,
    "volume": 2000,
    "kff": 50_000,
    "poincare": 5000,
    "sup": 20_000,
    "tube": 2,
}


def cmd_validate(settings: Settings) -> int:
    kind = settings.args.experiment
    if kind not in _VALIDATE_KINDS:
        raise CliError(f"unknown experiment {kind!r}; pick one of {_VALIDATE_KINDS}")
    space = parse_space(settings)
    u_list = _resolve_u(settings)
    seed = _resolve_seed(settings)
    try:
        cfg = ExperimentConfig(
            kind=kind,
            space=space if space is not None else _default_space(kind),
            domain_kind=settings.get("domain", "domain.kind", default="halfline"),
            thresholds=u_list or _DEFAULT_THRESHOLDS.get(kind, ()),
            k=settings.get("k", "domain.k", default=1, cast=int),
            ell=settings.get("ell", "field.ell", default=1.0, cast=float),
            spacing=settings.get("spacing", "field.spacing", default=0.2, cast=float),
            mesh_level=settings.get("mesh_level", "mc.mesh_level", default=5, cast=int),
            replicates=settings.get(
                "replicates", "mc.replicates", default=_DEFAULT_REPS[kind], cast=int
            ),
            seed=seed,
            workers=settings.get("workers", "mc.workers", default=0, cast=int),
            z_gate=settings.get("z_gate", "mc.z_gate", cast=float),
            rho_list=_float_list(settings.get("rho", "mc.rho_list", default="0.05,0.1,0.2")),
            j_max=settings.get("jmax", "mc.jmax", default=3, cast=int),
            samples=settings.get("samples", "mc.samples", default=200_000, cast=int),
            alpha=math.radians(settings.get("alpha", "mc.alpha", default=30.0, cast=float)),
            beta=math.radians(settings.get("beta", "mc.beta", default=30.0, cast=float)),
            n_list=_int_list(settings.get("n_list", "mc.n_list", default="10,100,1000")),
            target_tail=settings.get("target_tail", "mc.target_tail", cast=float),
        )
        if kind == "sup" and cfg.target_tail is None and not u_list:
            cfg = ExperimentConfig(**{**_cfg_dict(cfg), "target_tail": 0.05, "thresholds": ()})
        if kind == "tube" and space is not None and settings.get("domain") is None:
            report = run_experiment(_strip_tube_domain(cfg))
        else:
            report = run_experiment(cfg)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = settings.get("out", "out.path")
    if out:
        with open(out + ".json", "w") as fh:
            fh.write(report.to_json())
        with open(out + ".csv", "w") as fh:
            fh.write(report.to_csv())
    sys.stdout.write(report.to_csv())
    sys.stdout.write(report.verdict + "\n")
    return 0 if report.passed else 1


def _cfg_dict(cfg: ExperimentConfig) -> dict:
    from dataclasses import asdict

    d = asdict(cfg)
    d["space"] = cfg.space
    return d


def _strip_tube_domain(cfg: ExperimentConfig) -> ExperimentConfig:
    return ExperimentConfig(**{**_cfg_dict(cfg), "thresholds": ()})


def _default_space(kind: str) -> SpaceDescriptor | None:
    if kind in ("ec", "volume", "sup"):
        return SpaceDescriptor.rectangle((10.0, 10.0))
    return None


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkflab",
        description="Expected curvatures of Gaussian excursion sets and their "
        "Monte Carlo validation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value settings file")
        p.add_argument("--out", help="output path (reports: base path for .json/.csv)")
        p.add_argument("--seed", type=int, help="master seed (fallback: GKFLAB_SEED)")
        p.add_argument("--k", type=int, help="field component count / domain dimension")
        p.add_argument("--u", help="threshold or comma-separated threshold grid")

    p = sub.add_parser("expect", help="closed-form expected curvatures")
    common(p)
    p.add_argument("--space", help="point | rect:T1,T2[,..] | ball:n,R | sphere2:R | cap:deg")
    p.add_argument("--lambda2", type=float, help="induced metric scale")
    p.add_argument("--ell", type=float, help="correlation length (lambda2 = 1/ell^2)")
    p.add_argument("--domain", help="halfline | interval | ballcomp | fullspace")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--i", help="curvature order(s), comma separated")

    p = sub.add_parser("gmf", help="Gaussian Minkowski functionals of a domain")
    common(p)
    p.add_argument("--domain", help="halfline | interval | ballcomp | fullspace")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--jmax", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--force-numeric", dest="force_numeric", action="store_true", default=None)

    p = sub.add_parser("simulate", help="write a field dump")
    common(p)
    p.add_argument("--dims", help="cells per axis, comma separated")
    p.add_argument("--spacing", type=float)
    p.add_argument("--ell", type=float)
    p.add_argument("--binary", action="store_true", default=None)

    p = sub.add_parser("validate", help="run a Monte Carlo validation experiment")
    common(p)
    p.add_argument("experiment", choices=_VALIDATE_KINDS)
    p.add_argument("--space", help="rect:T1,T2 | sphere2:R (experiment dependent)")
    p.add_argument("--lambda2", type=float)
    p.add_argument("--ell", type=float)
    p.add_argument("--spacing", type=float)
    p.add_argument("--domain", help="halfline | ballcomp")
    p.add_argument("--replicates", type=int)
    p.add_argument("--workers", type=int, help="worker processes (0 = auto)")
    p.add_argument("--z-gate", dest="z_gate", type=float)
    p.add_argument("--mesh-level", dest="mesh_level", type=int)
    p.add_argument("--alpha", type=float, help="cap radius, degrees")
    p.add_argument("--beta", type=float, help="cap radius, degrees")
    p.add_argument("--n-list", dest="n_list", help="sphere dimensions, comma separated")
    p.add_argument("--rho", help="tube radii, comma separated")
    p.add_argument("--jmax", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--target-tail", dest="target_tail", type=float)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors
        return 0 if exc.code in (0, None) else 2
    try:
        filemap = load_config(args.config) if getattr(args, "config", None) else {}
        settings = Settings(args, filemap)
        if args.command == "expect":
            return cmd_expect(settings)
        if args.command == "gmf":
            return cmd_gmf(settings)
        if args.command == "simulate":
            return cmd_simulate(settings)
        if args.command == "validate":
            return cmd_validate(settings)
        raise CliError(f"unknown command {args.command!r}")
    except CliError as exc:
        print(f"gkflab: error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:  # console script
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
