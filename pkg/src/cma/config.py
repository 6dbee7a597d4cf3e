"""Run configuration: a line-oriented ``key = value`` format with ``[section]`` headers.

Blank lines and lines starting with ``#`` are ignored, and so is any text
after an unquoted ``#`` inside a line.  Lists are comma separated.  Every
section and key is optional unless the command needs it; unknown sections
and keys are errors.  See README.md for the full key reference.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

from . import torus
from .errors import CMAError, ParseError, ValidationError
from .operator import ALLOWED_LAMBDA
from .rhs import KINDS, RhsSpec
from .solver import SolveConfig

COMMANDS = ("solve", "sweep", "check-inequalities", "moser", "sobolev")
SEED_ENV = "CMA_SEED"


def _int(s):
    return int(s, 10)


def _float(s):
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan")
    return v


def _str(s):
    return s


def _list(conv):
    def parse(s):
        items = [t.strip() for t in s.split(",")]
        if any(t == "" for t in items):
            raise ValueError("empty list item")
        return tuple(conv(t) for t in items)
    return parse


def _opt_float(s):
    return None if s.lower() in ("none", "auto") else _float(s)


# section -> key -> converter
SCHEMA = {
    "run": {"command": _str, "seed": _int, "p0": _float, "lambda": _int, "out": _str},
    "grid": {"n": _int, "m": _int},
    "background": {"mode": _str, "amplitude": _float, "axes": _list(_int)},
    "solver": {"continuation_steps": _int, "newton_tol": _float, "max_newton": _int,
               "linear_tol": _float, "damping_min_eig": _float, "max_halvings": _int},
    "rhs": {"kind": _str, "seed": _int, "amplitude": _float, "bandwidth": _int,
            "center": _list(_float), "beta": _float, "r0": _float, "delta": _opt_float,
            "axes": _list(_int), "min_eig": _float},
    "family": {"amplitudes": _list(_float), "seeds": _list(_int), "betas": _list(_float)},
    "inequalities": {"samples": _int, "dims": _list(_int), "young_eps": _list(_float)},
    "moser": {"modes": _list(_str)},
    "sobolev": {"variant": _str, "trials": _int, "bandwidth": _int},
}


@dataclass
class BackgroundSpec:
    mode: str = "flat"
    amplitude: float = 0.0  # phi0 = amplitude * sum of cos(2 pi x_axis)
    axes: tuple = (0, 3)


@dataclass
class RunConfig:
    command: str
    n: int | None = None
    m: int | None = None
    background: BackgroundSpec = field(default_factory=BackgroundSpec)
    lam: int = 0
    solve: SolveConfig = field(default_factory=SolveConfig)
    rhs: RhsSpec | None = None
    family: list = field(default_factory=list)
    p0: float = 8.0
    out: str | None = None
    seed: int = 0
    min_eig: float = 0.1  # positivity margin required of manufactured data
    samples: int = 100000
    dims: tuple = (2, 3, 4, 5)
    young_eps: tuple = (0.1, 1.0, 10.0)
    moser_modes: tuple = ("delta", "gradient")
    sobolev_variant: str = "two-norm"
    sobolev_trials: int = 100
    sobolev_bandwidth: int = 3

    def grid(self):
        return torus.make_grid(self.n, self.m)


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def parse_sections(text: str) -> dict:
    """section -> key -> (raw value, line, column of value)."""
    out: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        body = line.strip()
        if body.startswith("["):
            if not body.endswith("]"):
                raise ParseError("unterminated section header", lineno, indent + 1)
            name = body[1:-1].strip()
            if name not in SCHEMA:
                raise ParseError(f"unknown section [{name}]", lineno, indent + 2)
            if name in out:
                raise ParseError(f"duplicate section [{name}]", lineno, indent + 2)
            section = name
            out[name] = {}
            continue
        if "=" not in body:
            raise ParseError("expected 'key = value'", lineno, indent + 1)
        if section is None:
            raise ParseError("key outside of any section", lineno, indent + 1)
        key, _, value = line.partition("=")
        key = key.strip()
        vcol = len(line) - len(value.lstrip()) + 1 if value.strip() else len(line) + 1
        if key not in SCHEMA[section]:
            raise ParseError(f"unknown key '{key}' in [{section}]", lineno, indent + 1)
        if key in out[section]:
            raise ParseError(f"duplicate key '{key}' in [{section}]", lineno, indent + 1)
        if not value.strip():
            raise ParseError(f"missing value for '{key}'", lineno, vcol)
        out[section][key] = (value.strip(), lineno, vcol)
    return out


def _convert(sections: dict) -> dict:
    vals: dict = {}
    for sec, items in sections.items():
        for key, (raw, line, col) in items.items():
            try:
                vals[sec, key] = SCHEMA[sec][key](raw)
            except ValueError as exc:
                raise ParseError(f"bad value for '{key}': {raw!r} ({exc})", line, col) from None
    return vals


def _rhs_from(vals: dict, seed: int) -> RhsSpec:
    kw = {}
    for key in ("kind", "seed", "amplitude", "bandwidth", "center", "beta", "r0", "delta", "axes"):
        if ("rhs", key) in vals:
            kw[key] = vals["rhs", key]
    kw.setdefault("seed", seed)
    return RhsSpec(**kw)


def parse_config(text: str, env: dict | None = None) -> RunConfig:
    """Parse and validate; ``env`` defaults to ``os.environ`` (for the seed override)."""
    env = os.environ if env is None else env
    vals = _convert(parse_sections(text))
    get = vals.get
    command = get(("run", "command"))
    if command is None:
        raise ValidationError("run.command", f"required, one of {', '.join(COMMANDS)}")
    if command not in COMMANDS:
        raise ValidationError("run.command", f"one of {', '.join(COMMANDS)}")
    seed = get(("run", "seed"), 0)
    env_seed = None
    if env.get(SEED_ENV, "").strip():
        try:
            env_seed = seed = int(env[SEED_ENV])
        except ValueError:
            raise ValidationError(SEED_ENV, "integer") from None
    if seed < 0:
        raise ValidationError("run.seed", ">= 0")

    cfg = RunConfig(command, seed=seed)
    cfg.p0 = get(("run", "p0"), 8.0)
    cfg.lam = get(("run", "lambda"), 0)
    cfg.out = get(("run", "out"))
    if cfg.lam not in ALLOWED_LAMBDA:
        raise ValidationError("run.lambda", "one of -1, 0, 1")

    needs_grid = command != "check-inequalities"
    cfg.n = get(("grid", "n"))
    cfg.m = get(("grid", "m"))
    if needs_grid or cfg.n is not None or cfg.m is not None:
        if cfg.n is None:
            raise ValidationError("grid.n", "required")
        if cfg.m is None:
            raise ValidationError("grid.m", "required")
        try:
            torus.make_grid(cfg.n, cfg.m)
        except CMAError as exc:
            raise ValidationError("grid", str(exc)) from None
        if not cfg.p0 > 2 * cfg.n:
            raise ValidationError("run.p0", f"p0 > 2n = {2 * cfg.n}")

    bg = BackgroundSpec(get(("background", "mode"), "flat"),
                        get(("background", "amplitude"), 0.0),
                        get(("background", "axes"), (0, 3)))
    if bg.mode not in ("flat", "perturbed"):
        raise ValidationError("background.mode", "flat or perturbed")
    if bg.mode == "perturbed":
        if bg.amplitude == 0:
            raise ValidationError("background.amplitude", "nonzero for a perturbed background")
        if cfg.n is not None and any(not 0 <= a < 2 * cfg.n for a in bg.axes):
            raise ValidationError("background.axes", f"real axis indices in [0, {2 * cfg.n})")
    elif ("background", "amplitude") in vals and bg.amplitude != 0:
        raise ValidationError("background.amplitude", "must be 0 for a flat background")
    cfg.background = bg

    skw = {k: v for (s, k), v in vals.items() if s == "solver"}
    cfg.solve = SolveConfig(**skw)

    cfg.min_eig = get(("rhs", "min_eig"), 0.1)
    if not cfg.min_eig > 0:
        raise ValidationError("rhs.min_eig", "> 0")
    has_rhs = any(s == "rhs" for s, _ in vals)
    if command in ("solve", "sweep", "moser"):
        if not has_rhs:
            raise ValidationError("rhs", f"section required for '{command}'")
        rhs = _rhs_from(vals, seed)
        if env_seed is not None:
            rhs = replace(rhs, seed=env_seed)
        if rhs.kind not in KINDS:
            raise ValidationError("rhs.kind", f"one of {', '.join(KINDS)}")
        rhs = replace(rhs, p0=cfg.p0)
        _validate_rhs(rhs, cfg)
        cfg.rhs = rhs
        if command == "sweep":
            cfg.family = _family(vals, rhs, cfg)

    cfg.samples = get(("inequalities", "samples"), cfg.samples)
    cfg.dims = get(("inequalities", "dims"), cfg.dims)
    cfg.young_eps = get(("inequalities", "young_eps"), cfg.young_eps)
    if cfg.samples < 1:
        raise ValidationError("inequalities.samples", ">= 1")
    if any(d < 2 for d in cfg.dims):
        raise ValidationError("inequalities.dims", "every dimension >= 2")
    if any(not e > 0 for e in cfg.young_eps):
        raise ValidationError("inequalities.young_eps", "every eps > 0")

    cfg.moser_modes = get(("moser", "modes"), ("delta", "gradient") if (cfg.n or 2) >= 2 else ("gradient",))
    for mode in cfg.moser_modes:
        if mode not in ("delta", "gradient"):
            raise ValidationError("moser.modes", "delta and/or gradient")
        if mode == "delta" and cfg.n == 1:
            raise ValidationError("moser.modes", "delta mode needs n >= 2")

    cfg.sobolev_variant = get(("sobolev", "variant"), "two-norm" if (cfg.n or 2) >= 2 else "one-norm")
    cfg.sobolev_trials = get(("sobolev", "trials"), cfg.sobolev_trials)
    cfg.sobolev_bandwidth = get(("sobolev", "bandwidth"), cfg.sobolev_bandwidth)
    if cfg.sobolev_variant not in ("two-norm", "one-norm"):
        raise ValidationError("sobolev.variant", "two-norm or one-norm")
    if cfg.sobolev_variant == "two-norm" and cfg.n == 1:
        raise ValidationError("sobolev.variant", "two-norm needs n >= 2")
    if cfg.sobolev_trials < 100:
        raise ValidationError("sobolev.trials", ">= 100")
    if cfg.m is not None and not 0 <= 2 * cfg.sobolev_bandwidth < cfg.m:
        raise ValidationError("sobolev.bandwidth", f"0 <= 2 * bandwidth < m = {cfg.m}")
    return cfg


def _validate_rhs(rhs: RhsSpec, cfg: RunConfig, prefix: str = "rhs") -> None:
    try:
        rhs.validate(cfg.n)
    except ValidationError as exc:
        raise ValidationError(f"{prefix}.{exc.field}", exc.constraint) from None
    except CMAError as exc:
        raise ValidationError(prefix, str(exc)) from None
    if rhs.kind == "smooth" and not 2 * rhs.bandwidth < cfg.m:
        raise ValidationError(f"{prefix}.bandwidth", f"2 * bandwidth < m = {cfg.m}")
    if rhs.center and len(rhs.center) != 2 * cfg.n:
        raise ValidationError(f"{prefix}.center", f"{2 * cfg.n} real coordinates")
    if rhs.kind == "cusp" and rhs.delta is not None and rhs.delta < 1.0 / cfg.m:
        raise ValidationError(f"{prefix}.delta", f">= grid spacing {1.0 / cfg.m:g}")
    if rhs.kind == "manufactured" and any(not 0 <= a < 2 * cfg.n for a in rhs.axes):
        raise ValidationError(f"{prefix}.axes", f"real axis indices in [0, {2 * cfg.n})")


def _family(vals: dict, base: RhsSpec, cfg: RunConfig) -> list:
    """Cartesian product of the [family] lists over the [rhs] base spec."""
    amps = vals.get(("family", "amplitudes"), (base.amplitude,))
    seeds = vals.get(("family", "seeds"), (base.seed,))
    betas = vals.get(("family", "betas"), (base.beta,))
    out = []
    for b in betas:
        for s in seeds:
            for a in amps:
                spec = replace(base, amplitude=a, seed=s, beta=b)
                _validate_rhs(spec, cfg, "family")
                out.append(spec)
    return out


def load_config(path, env: dict | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), env)
