"""Experiment configuration read from INI-style key/value files.

Sections
--------
``[kernel]``        ``alpha``, ``mu``; or ``grid`` (file of cell integrals, one per line)
``[domain]``        ``dim``, ``extents``, ``cells`` (comma separated per axis)
``[time]``          ``horizon``, ``steps``
``[nonlinearity]``  ``kind``, ``p``, ``gamma``, ``C0`` .. ``c2``, ``epsilonReg``, ``cap``
``[data]``          ``u0``, ``boundary``, ``f`` as ``kind:args`` (see ``parse_data``)
``[inner]``         ``tol``, ``maxIter``, ``method``
``[structure]``     ``q``, ``s``, ``gamma`` for the exponent and level-set analysis
``[degiorgi]``      ``chat``, ``nmax``, ``levels``
``[sweep]``         scenario grids (``p``, ``alpha``, ``s``, ``steps``, ``amplitudes`` ...)

Relative file paths resolve against the config file's directory.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exponents import StructureParams
from .grid import DomainGrid
from .kernels import FracParams, KernelGrid, TimeGrid
from .solver import Nonlinearity, SolveConfig


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(_float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _float(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    return float(t)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


@dataclass(frozen=True)
class DataSpec:
    """``kind`` plus numeric ``args`` or a ``path``."""

    kind: str
    args: tuple[float, ...] = ()
    path: Optional[Path] = None


DATA_KINDS = {
    "u0": ("constant", "bump", "random", "file"),
    "boundary": ("constant", "file"),
    "f": ("constant", "file", "powerlaw"),
}


def parse_data(text: str, role: str, base: Path) -> DataSpec:
    """``constant:c``, ``bump:amp,width``, ``random:lo,hi``, ``powerlaw:amp,exponent``, ``file:path``.

    A bare number means ``constant``.
    """
    text = text.strip()
    kind, _, rest = text.partition(":")
    if not rest:
        try:
            return DataSpec("constant", (float(text),))
        except ValueError:
            raise ConfigError(f"{role}: cannot parse {text!r}") from None
    kind = kind.strip().lower()
    if kind not in DATA_KINDS[role]:
        raise ConfigError(f"{role}: kind must be one of {DATA_KINDS[role]}, got {kind!r}")
    if kind == "file":
        return DataSpec(kind, path=(base / rest.strip()))
    args = _floats(rest)
    need = {"constant": 1, "bump": 2, "random": 2, "powerlaw": 2}[kind]
    if len(args) != need:
        raise ConfigError(f"{role}: {kind} takes {need} values, got {len(args)}")
    return DataSpec(kind, args)


def realize(spec: DataSpec, domain: DomainGrid, time: TimeGrid, rng: np.random.Generator):
    """Turn a data spec into something ``SolveConfig`` accepts.

    ``bump`` is a Gaussian centred in the box; ``powerlaw`` is
    ``amp * dist^-exponent`` from the centre with the distance floored at half
    a cell, which lies in ``L_s`` iff ``exponent * s < dim``.  Files hold one
    slice (or ``M+1`` stacked slices) of whitespace separated values.
    """
    if spec.kind == "constant":
        return spec.args[0]
    if spec.kind == "file":
        arr = np.loadtxt(spec.path, dtype=float, ndmin=1).ravel()
        n = int(np.prod(domain.shape))
        if arr.size == n:
            return arr.reshape(domain.shape)
        if arr.size == n * (time.steps + 1):
            return arr.reshape((time.steps + 1,) + domain.shape)
        raise ConfigError(f"{spec.path}: {arr.size} values do not fit the grid")
    coords = domain.coordinates()
    centre = [e / 2.0 for e in domain.extents]
    dist = np.sqrt(sum((c - m) ** 2 for c, m in zip(coords, centre)))
    if spec.kind == "bump":
        amp, width = spec.args
        return amp * np.exp(-0.5 * (dist / width) ** 2)
    if spec.kind == "random":
        lo, hi = spec.args
        v = rng.uniform(lo, hi, domain.shape)
        v[domain.boundary_mask] = 0.0
        return v
    if spec.kind == "powerlaw":
        amp, expo = spec.args
        floor = 0.5 * min(domain.spacing)
        return amp * np.maximum(dist, floor) ** (-expo)
    raise ConfigError(f"unknown data kind {spec.kind!r}")


@dataclass
class Experiment:
    """Everything a scenario needs; ``raw`` keeps the parsed file for extra keys."""

    kernel: object
    domain: DomainGrid
    time: TimeGrid
    nonlinearity: Nonlinearity
    u0: DataSpec
    boundary: DataSpec
    f: DataSpec
    tol: float = 1e-10
    max_iter: int = 200
    method: str = "newton"
    structure: Optional[StructureParams] = None
    c_hat: float = 1.0
    n_levels: int = 40
    level_steps: int = 10
    sweep: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    source_path: Optional[Path] = None

    @property
    def alpha(self) -> Optional[float]:
        return self.kernel.alpha if isinstance(self.kernel, FracParams) else None

    def solve_config(
        self,
        seed: int = 0,
        *,
        domain: Optional[DomainGrid] = None,
        time: Optional[TimeGrid] = None,
        nonlinearity: Optional[Nonlinearity] = None,
        kernel=None,
        f: Optional[DataSpec] = None,
    ) -> SolveConfig:
        domain = domain or self.domain
        time = time or self.time
        kernel = kernel if kernel is not None else self.kernel
        if isinstance(kernel, KernelGrid) and kernel.grid != time:
            raise ConfigError("an explicit kernel grid cannot be used on another time grid")
        rng = np.random.default_rng(seed)
        return SolveConfig(
            kernel=kernel,
            domain=domain,
            time=time,
            nonlinearity=nonlinearity or self.nonlinearity,
            u0=realize(self.u0, domain, time, rng),
            boundary=realize(self.boundary, domain, time, rng),
            source=realize(f or self.f, domain, time, rng),
            tol=self.tol,
            max_iter=self.max_iter,
            method=self.method,
        )

    def sweep_values(self, key: str, default):
        return self.sweep.get(key, default)


_CONSTANTS = ("C0", "C1", "C2", "c0", "c1", "c2")
_NL_KEYS = {
    "kind": "kind",
    "p": "p",
    "gamma": "gamma",
    "epsilonreg": "eps_reg",
    "cap": "cap",
}


def _nonlinearity(sec: configparser.SectionProxy) -> Nonlinearity:
    kw = {}
    for key, value in sec.items():
        # structure constants are case sensitive (C0 and c0 differ)
        name = key if key in _CONSTANTS else _NL_KEYS.get(key.lower())
        if name is None:
            raise ConfigError(f"[nonlinearity] unknown key {key!r}")
        kw[name] = value if name == "kind" else float(value)
    return Nonlinearity(**kw)


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    return cp


def _get(sec, key: str, default=None):
    for k in sec:
        if k.lower() == key.lower():
            return sec[k]
    return default


def load_config(path: str | Path) -> Experiment:
    path = Path(path)
    cp = _parser()
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read {path}")
    return parse_config(cp, path.parent, path)


def loads_config(text: str, base: str | Path = ".") -> Experiment:
    cp = _parser()
    cp.read_string(text)
    return parse_config(cp, Path(base), None)


SECTIONS = ("kernel", "domain", "time", "nonlinearity", "data", "inner", "structure", "degiorgi", "sweep")


def parse_config(cp: configparser.ConfigParser, base: Path, path: Optional[Path]) -> Experiment:
    """Build an ``Experiment``; any invalid value surfaces as ``ConfigError``."""
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown sections {unknown}")
    try:
        return _parse(cp, base, path)
    except ConfigError:
        raise
    except (ValueError, OSError) as err:
        where = path or "config"
        raise ConfigError(f"{where}: {err}") from err


def _parse(cp: configparser.ConfigParser, base: Path, path: Optional[Path]) -> Experiment:
    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    t = sec("time")
    time = TimeGrid(float(_get(t, "horizon", 1.0)), int(_get(t, "steps", 100)))

    d = sec("domain")
    extents = _floats(_get(d, "extents", "1.0"))
    cells = _ints(_get(d, "cells", "64"))
    dim = int(_get(d, "dim", len(cells)))
    if len(extents) == 1 and dim > 1:
        extents = extents * dim
    if len(cells) == 1 and dim > 1:
        cells = cells * dim
    if len(cells) != dim or len(extents) != dim:
        raise ConfigError("[domain] extents and cells must match dim")
    domain = DomainGrid(extents, cells)

    k = sec("kernel")
    grid_file = _get(k, "grid")
    if grid_file:
        kernel = KernelGrid(time, np.loadtxt(base / grid_file, dtype=float, ndmin=1))
    else:
        kernel = FracParams(float(_get(k, "alpha", 0.5)), float(_get(k, "mu", 0.0)))

    nl = _nonlinearity(cp["nonlinearity"]) if cp.has_section("nonlinearity") else Nonlinearity()

    dd = sec("data")
    u0 = parse_data(_get(dd, "u0", "0"), "u0", base)
    boundary = parse_data(_get(dd, "boundary", "0"), "boundary", base)
    f = parse_data(_get(dd, "f", "0"), "f", base)

    inner = sec("inner")
    method = str(_get(inner, "method", "newton"))
    if method not in ("newton", "gd"):
        raise ConfigError(f"[inner] method must be newton or gd, got {method!r}")
    st = sec("structure")
    structure = None
    if st:
        structure = StructureParams(
            N=dim,
            p=nl.p,
            q=_float(_get(st, "q", "inf")),
            gamma=float(_get(st, "gamma", nl.gamma)),
            s=_float(_get(st, "s", "inf")),
        )
    dg = sec("degiorgi")
    sweep = {}
    if cp.has_section("sweep"):
        for key, value in cp["sweep"].items():
            vals = _floats(value) if any(ch.isdigit() for ch in value) else value.strip()
            sweep[key] = vals
    return Experiment(
        kernel=kernel,
        domain=domain,
        time=time,
        nonlinearity=nl,
        u0=u0,
        boundary=boundary,
        f=f,
        tol=float(_get(inner, "tol", 1e-10)),
        max_iter=int(_get(inner, "maxIter", 200)),
        method=method,
        structure=structure,
        c_hat=float(_get(dg, "chat", 1.0)),
        n_levels=int(_get(dg, "nmax", 40)),
        level_steps=int(_get(dg, "levels", 10)),
        sweep=sweep,
        raw={s: dict(cp[s]) for s in cp.sections()},
        source_path=path,
    )
