"""Command-line front end.

Every command resolves a :class:`RunConfig` (defaults, then ``--config``
file, then flags), runs one library operation and writes a JSON or CSV
artifact that embeds the resolved configuration and the library version.
Output is deterministic: no timestamps, sorted JSON keys, floats in CSV
with 17 significant digits.

Exit codes: 0 ok, 2 configuration, 3 numerical quality, 4 validation.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import affine as aff
from . import angle as ang
from . import quantizer as qz
from .errors import (ConfigError, InterpolationOutOfRange, MissingDerivatives,
                     NonAbsolutelyConvergent, NumericalQualityError, QuantizationError,
                     RankCapExceeded, UnsupportedProbe, ValidationError)
from .fock import boltzmann_density, operator_from_json, operator_to_json
from .quadrature import PhaseGrid
from .weights import from_spec, weight_to_operator

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4


@dataclass
class RunConfig:
    dim: int = 16
    R: int = 64
    A: int = 128
    weight: str = "cahill_glauber:-1"
    output: Optional[str] = None
    format: str = "json"
    seed: int = 0

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        extra = set(d) - set(cls.keys())
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        for k in ("dim", "R", "A"):
            v = getattr(self, k)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{k} must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be 'json' or 'csv'")
        if not isinstance(self.weight, str):
            raise ConfigError("weight must be a 'family:param' string")
        from_spec(self.weight)
        return self

    @property
    def grid(self) -> PhaseGrid:
        return PhaseGrid(self.R, self.A)


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    base = {}
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config!r}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    start = asdict(RunConfig())
    if getattr(ns, "format_default", None):
        start["format"] = ns.format_default
    start.update(base)
    cfg = RunConfig.from_mapping(start)
    over = {k: getattr(ns, k) for k in RunConfig.keys() if getattr(ns, k, None) is not None}
    merged = asdict(cfg)
    merged.update(over)
    return RunConfig.from_mapping(merged)


# --------------------------------------------------------------------------
# Emission
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


def _header(cfg: RunConfig, extra: dict) -> dict:
    return {"version": __version__, "config": asdict(cfg), "args": extra}


def _emit_text(text: str, cfg: RunConfig):
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_json(payload: dict, cfg: RunConfig, extra: dict):
    doc = dict(_header(cfg, extra))
    doc.update(payload)
    _emit_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", cfg)


def emit_csv(columns: Sequence[str], rows, cfg: RunConfig, extra: dict):
    meta = json.dumps(_header(cfg, extra), sort_keys=True)
    lines = [f"# {meta}", ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _emit_text("\n".join(lines) + "\n", cfg)


def emit_table(columns, rows, cfg: RunConfig, extra: dict):
    if cfg.format == "csv":
        emit_csv(columns, rows, cfg, extra)
    else:
        emit_json({"columns": list(columns),
                   "rows": [[float(v) for v in row] for row in rows]}, cfg, extra)


def _args_of(ns: argparse.Namespace) -> dict:
    skip = set(RunConfig.keys()) | {"config", "func", "format_default"}
    return {k: v for k, v in sorted(vars(ns).items()) if k not in skip}


# --------------------------------------------------------------------------
# Parsing helpers
# --------------------------------------------------------------------------

def parse_function(name: Optional[str], poly: Optional[str]) -> qz.PhaseFunction:
    if (name is None) == (poly is None):
        raise ConfigError("give exactly one of --f or --poly")
    if name is not None:
        return qz.builtin(name)
    try:
        rows = json.loads(poly)
        coeffs = {}
        for j, k, re, im in rows:
            coeffs[(int(j), int(k))] = coeffs.get((int(j), int(k)), 0) + complex(re, im)
    except (ValueError, TypeError) as exc:
        raise ConfigError("--poly takes a JSON list of [j, k, re, im] (z^j zbar^k)") from exc
    return qz.polynomial(coeffs)


def parse_floats(text: str) -> list:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"expected finite numbers, got {text!r}")
    return vals


def parse_range(text: str):
    """``lo:hi:n`` -> ``n`` evenly spaced points."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise ConfigError(f"range must be lo:hi:n, got {text!r}") from exc
    if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or (n > 1 and hi < lo):
        raise ConfigError(f"bad range {text!r}")
    return np.linspace(lo, hi, n)


def _phase_points(ns, cfg: RunConfig) -> np.ndarray:
    if ns.random:
        if ns.random < 1 or not ns.rmax > 0:
            raise ConfigError("--random needs a positive count and --rmax > 0")
        rng = np.random.default_rng(cfg.seed)
        r = ns.rmax * np.sqrt(rng.random(ns.random))
        th = 2.0 * np.pi * rng.random(ns.random)
        return r * np.exp(1j * th)
    xs, ys = parse_range(ns.re), parse_range(ns.im)
    return (xs[:, None] + 1j * ys[None, :]).ravel()


def _read_operator(path: str) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read operator file {path!r}: {exc}") from exc
    try:
        return operator_from_json(doc)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path!r} is not an operator file") from exc


def _density(spec: str, dim: int) -> np.ndarray:
    if spec == "cs":
        return np.ones((1, 1), dtype=complex)
    fam, _, par = spec.partition(":")
    if fam != "boltzmann" or not par:
        raise ConfigError("--rho must be 'cs' or 'boltzmann:<s>'")
    try:
        s = float(par)
    except ValueError as exc:
        raise ConfigError(f"bad --rho parameter {par!r}") from exc
    return boltzmann_density(s, dim)


def _interior(dim: int) -> int:
    return max(1, dim - 4)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_quantize(ns, cfg: RunConfig) -> int:
    f = parse_function(ns.f, ns.poly)
    w = from_spec(cfg.weight)
    A = qz.quantize(f, w, cfg.dim, cfg.grid, method=ns.method)
    one = qz.quantize(qz.builtin("one"), w, cfg.dim, cfg.grid, method=ns.method)
    m = _interior(cfg.dim)
    herm = float(np.max(np.abs(A - A.conj().T)))
    res = float(np.max(np.abs(one[:m, :m] - np.eye(m))))
    payload = operator_to_json(A)
    payload.update(hermiticity_defect=herm, identity_defect_interior=res, interior=m)
    emit_json(payload, cfg, _args_of(ns))
    print(f"hermiticity defect {herm:.3e}; interior ({m}x{m}) identity defect {res:.3e}",
          file=sys.stderr if not cfg.output else sys.stdout)
    return EXIT_OK


def cmd_spectrum(ns, cfg: RunConfig) -> int:
    A = _read_operator(ns.input)
    herm = float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0
    if ns.require_hermitian and herm > ns.tol:
        raise ValidationError(f"operator is not Hermitian: defect {herm:.3e} > {ns.tol:g}")
    ev = np.linalg.eigvalsh(0.5 * (A + A.conj().T)) if ns.hermitian_solver else np.linalg.eigvals(A)
    order = np.lexsort((ev.imag, ev.real))
    rows = [(i, ev[j].real, ev[j].imag) for i, j in enumerate(order)]
    emit_table(("index", "re", "im"), rows, cfg, _args_of(ns))
    return EXIT_OK


def cmd_symbol_scan(ns, cfg: RunConfig) -> int:
    z = _phase_points(ns, cfg)
    if ns.input:
        A = _read_operator(ns.input)
    else:
        A = qz.quantize(parse_function(ns.f, ns.poly), from_spec(cfg.weight), cfg.dim, cfg.grid)
    rho = _density(ns.rho, cfg.dim)
    vals = qz.lower_symbol(A, rho, z)
    rows = [(p.real, p.imag, v.real, v.imag) for p, v in zip(z, vals)]
    emit_table(("re_z", "im_z", "re_symbol", "im_symbol"), rows, cfg, _args_of(ns))
    return EXIT_OK


def cmd_weight_op(ns, cfg: RunConfig) -> int:
    M = weight_to_operator(from_spec(cfg.weight), cfg.dim, cfg.grid)
    payload = operator_to_json(M)
    payload["trace"] = [float(np.trace(M).real), float(np.trace(M).imag)]
    emit_json(payload, cfg, _args_of(ns))
    return EXIT_OK


def cmd_delta(ns, cfg: RunConfig) -> int:
    try:
        rows = json.loads(ns.combo)
    except json.JSONDecodeError as exc:
        raise ConfigError("--combo takes a JSON list of [re, im, r, s]") from exc
    try:
        combo = qz.DeltaCombo.from_json(rows)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, QuantizationError):
            raise
        raise ConfigError("--combo takes a JSON list of [re, im, r, s]") from exc
    rho = None if ns.rho == "cs" else _density(ns.rho, cfg.dim)
    center = complex(ns.center_re, ns.center_im)
    A = qz.quantize_delta(combo, cfg.dim, rho=rho, center=center)
    emit_json(operator_to_json(A), cfg, _args_of(ns))
    return EXIT_OK


def cmd_dequantize(ns, cfg: RunConfig) -> int:
    combo = qz.dequantize_rank_one(ns.n, ns.nn, exact=ns.exact)
    if ns.exact:
        terms = [[str(c), r, s] for (r, s), c in combo.terms]
        payload = {"terms_exact": terms}
        if ns.check:
            import sympy as sp
            A = qz.quantize_delta(combo, max(ns.n, ns.nn) + 1, exact=True)
            target = sp.zeros(*A.shape)
            target[ns.n, ns.nn] = 1
            payload["roundtrip_exact"] = bool(sp.simplify(A - target) == sp.zeros(*A.shape))
    else:
        payload = {"terms": combo.to_json()}
    emit_json(payload, cfg, _args_of(ns))
    return EXIT_OK


def cmd_wigner(ns, cfg: RunConfig) -> int:
    z = _phase_points(ns, cfg)
    if ns.input:
        A = _read_operator(ns.input)
    else:
        A = qz.quantize(parse_function(ns.f, ns.poly), from_spec(cfg.weight), cfg.dim, cfg.grid)
    W = qz.wigner_of_operator(A, z, summation=ns.summation)
    rows = [(p.real, p.imag, v.real, v.imag) for p, v in zip(z, W)]
    emit_table(("re_z", "im_z", "re_W", "im_W"), rows, cfg, _args_of(ns))
    return EXIT_OK


def cmd_angle_matrix(ns, cfg: RunConfig) -> int:
    A = ang.commutator_operator(cfg.dim) if ns.commutator else ang.angle_operator(cfg.dim)
    emit_json(operator_to_json(A), cfg, _args_of(ns))
    return EXIT_OK


def _sine_ctl(ns) -> ang.SineSeriesControl:
    return ang.SineSeriesControl(q_max=ns.q_max)


def cmd_angle_symbol(ns, cfg: RunConfig) -> int:
    J, g = ns.J, ns.gamma
    if not (math.isfinite(J) and J >= 0 and math.isfinite(g)):
        raise ConfigError("need finite J >= 0 and finite gamma")
    ctl = _sine_ctl(ns)
    s = ang.angle_lower_symbol(J, g, ctl)
    c = ang.commutator_symbol(J, g, ctl)
    rows = [(J, float(g) % (2 * math.pi), s, c)]
    emit_table(("J", "gamma", "symbol", "C"), rows, cfg, _args_of(ns))
    return EXIT_OK


def cmd_angle_scan(ns, cfg: RunConfig) -> int:
    Js = parse_floats(ns.J_list)
    if any(J < 0 for J in Js):
        raise ConfigError("J values must be >= 0")
    if ns.gamma_n < 1:
        raise ConfigError("--gamma-n must be >= 1")
    gam = 2.0 * math.pi * np.arange(ns.gamma_n) / ns.gamma_n
    ctl = _sine_ctl(ns)
    rows = []
    for J in Js:
        s = ang.angle_lower_symbol(J, gam, ctl)
        c = ang.commutator_symbol(J, gam, ctl)
        rows += [(J, g, a, b) for g, a, b in zip(gam, s, c)]
    emit_table(("J", "gamma", "symbol", "C"), rows, cfg, _args_of(ns))
    return EXIT_OK


def _fiducial(ns) -> aff.FiducialVector:
    return aff.build_fiducial(ns.a, ns.b, aff.HalfLineGrid(ns.h, ns.xmax))


def cmd_affine_kinetic(ns, cfg: RunConfig) -> int:
    psi = _fiducial(ns)
    K = aff.kinetic_constant(psi) if ns.K is None else ns.K
    if not K >= 0:
        raise ConfigError("K must be >= 0")
    op = aff.affine_kinetic(psi.grid, K=K)
    ev = op.eigvalsh(ns.eigs)
    gammas = parse_floats(ns.gammas)
    table = [[g, aff.c_gamma(psi, g)] for g in gammas]
    emit_json({"K": K, "c_gamma": table, "eigenvalues": [float(v) for v in ev]},
              cfg, _args_of(ns))
    return EXIT_OK


def cmd_affine_symbol(ns, cfg: RunConfig) -> int:
    if ns.f != "q^beta":
        raise ConfigError("only --f q^beta is supported")
    beta = ns.beta
    psi = _fiducial(ns)
    x = psi.grid.x
    lo, hi = ns.x_window
    keep = (x >= lo) & (x <= hi)
    if not keep.any():
        raise ConfigError("--x-window selects no grid points")
    xs = x[keep]
    ft = aff.affine_quantize_position(lambda u: u ** beta, psi, xs)
    rows = [(xi, fi, fi / xi ** beta) for xi, fi in zip(xs, ft)]
    emit_table(("x", "f_tilde", "ratio"), rows, cfg, _args_of(ns))
    return EXIT_OK


def cmd_affine_resolution(ns, cfg: RunConfig) -> int:
    psi = _fiducial(ns)
    x = psi.grid.x
    phi = np.exp(-0.5 * ((x - ns.center) / ns.width) ** 2).astype(complex)
    norm2 = float(np.sum(np.abs(phi) ** 2) * psi.grid.h)
    val = aff.resolution_check(phi, psi, q_bounds=(ns.qmin, ns.qmax), p_max=ns.pmax,
                               method=ns.method)
    emit_json({"value": val, "norm2": norm2, "ratio": val / norm2}, cfg, _args_of(ns))
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat JSON RunConfig; flags override it")
    p.add_argument("--dim", type=int)
    p.add_argument("--R", type=int, help="radial quadrature nodes")
    p.add_argument("--A", type=int, help="angular quadrature nodes")
    p.add_argument("--weight", help="family:param, e.g. cahill_glauber:-1")
    p.add_argument("--output", "-o", help="output path (stdout if omitted)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--seed", type=int)


def _function_args(p, required=False):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--f", help="builtin: one, z, zbar, q, p, q2, p2, zzbar, gaussian(sigma)")
    g.add_argument("--poly", help="JSON list of [j, k, re, im] for z^j zbar^k")


def _points_args(p):
    p.add_argument("--re", default="-2:2:9", help="lo:hi:n for Re z (write --re=-1:1:5 for negative lo)")
    p.add_argument("--im", default="-2:2:9", help="lo:hi:n for Im z")
    p.add_argument("--random", type=int, default=0, help="use N seeded random points instead")
    p.add_argument("--rmax", type=float, default=2.0)


def _fiducial_args(p):
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--xmax", type=float, default=40.0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="covquant", description="Covariant integral quantization toolkit")
    ap.add_argument("--version", action="version", version=f"covquant {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("quantize", help="quantize a phase-space function")
    _common(p)
    _function_args(p, required=True)
    p.add_argument("--method", choices=("auto", "kernel", "fourier"), default="auto")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("spectrum", help="eigenvalues of an operator file")
    _common(p)
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--require-hermitian", action="store_true")
    p.add_argument("--hermitian-solver", action="store_true",
                   help="use the Hermitian part and a symmetric eigensolver")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_spectrum, format_default="csv")

    p = sub.add_parser("symbol-scan", help="lower symbol tr(rho(z) A) on a grid of z")
    _common(p)
    _function_args(p)
    p.add_argument("--input", "-i", help="operator file instead of --f/--poly")
    p.add_argument("--rho", default="cs", help="'cs' or 'boltzmann:<s>'")
    _points_args(p)
    p.set_defaults(func=cmd_symbol_scan, format_default="csv")

    p = sub.add_parser("weight-op", help="the operator M of a weight")
    _common(p)
    p.set_defaults(func=cmd_weight_op)

    p = sub.add_parser("delta", help="quantize a combination of delta derivatives")
    _common(p)
    p.add_argument("--combo", required=True, help="JSON list of [re, im, r, s]")
    p.add_argument("--rho", default="cs")
    p.add_argument("--center-re", type=float, default=0.0)
    p.add_argument("--center-im", type=float, default=0.0)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("dequantize", help="upper symbol of |e_n><e_n'|")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--nn", type=int, required=True)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--check", action="store_true", help="verify the exact round trip")
    p.set_defaults(func=cmd_dequantize)

    p = sub.add_parser("wigner", help="Wigner function of an operator")
    _common(p)
    _function_args(p)
    p.add_argument("--input", "-i")
    p.add_argument("--summation", choices=("auto", "direct", "euler"), default="auto")
    _points_args(p)
    p.set_defaults(func=cmd_wigner, format_default="csv")

    pa = sub.add_parser("angle", help="action-angle sector")
    asub = pa.add_subparsers(dest="angle_command", required=True, parser_class=_Parser)
    p = asub.add_parser("matrix")
    _common(p)
    p.add_argument("--commutator", action="store_true", help="emit [A_angle, A_J] instead")
    p.set_defaults(func=cmd_angle_matrix)
    p = asub.add_parser("symbol")
    _common(p)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--q-max", type=int)
    p.set_defaults(func=cmd_angle_symbol, format_default="csv")
    p = asub.add_parser("commutator-scan")
    _common(p)
    p.add_argument("--J-list", required=True, help="comma-separated J values")
    p.add_argument("--gamma-n", type=int, default=64)
    p.add_argument("--q-max", type=int)
    p.add_argument("--out", dest="format", choices=("json", "csv"))
    p.set_defaults(func=cmd_angle_scan, format_default="csv")

    pf = sub.add_parser("affine", help="affine (half-plane) sector")
    fsub = pf.add_subparsers(dest="affine_command", required=True, parser_class=_Parser)
    p = fsub.add_parser("kinetic")
    _common(p)
    _fiducial_args(p)
    p.add_argument("--K", type=float, help="override the fiducial's kinetic constant")
    p.add_argument("--eigs", type=int, default=5)
    p.add_argument("--gammas", default="-2,-1,0,1,2")
    p.set_defaults(func=cmd_affine_kinetic)
    p = fsub.add_parser("symbol")
    _common(p)
    _fiducial_args(p)
    p.add_argument("--f", default="q^beta")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--x-window", type=float, nargs=2, default=(0.5, 10.0))
    p.set_defaults(func=cmd_affine_symbol, format_default="csv")
    p = fsub.add_parser("resolution")
    _common(p)
    _fiducial_args(p)
    p.add_argument("--center", type=float, default=5.0)
    p.add_argument("--width", type=float, default=0.5)
    p.add_argument("--qmin", type=float, default=1.0 / 32)
    p.add_argument("--qmax", type=float, default=32.0)
    p.add_argument("--pmax", type=float, default=40.0)
    p.add_argument("--method", choices=("quadrature", "reduced"), default="quadrature")
    p.set_defaults(func=cmd_affine_resolution)
    return ap


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, MissingDerivatives, NonAbsolutelyConvergent, UnsupportedProbe)):
        return EXIT_CONFIG
    if isinstance(exc, NumericalQualityError):
        return EXIT_NUMERICAL
    if isinstance(exc, (ValidationError, RankCapExceeded, InterpolationOutOfRange)):
        return EXIT_VALIDATION
    return EXIT_VALIDATION


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns)
        return ns.func(ns, cfg)
    except QuantizationError as exc:
        print(f"covquant: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
