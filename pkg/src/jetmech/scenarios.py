"""Built-in mechanical systems and JSON scenario files.

Every built-in accepts a fiber dimension ``n`` and acts componentwise, e.g.
``harmonic`` is ``sum_i (v_i^2 - q_i^2) / 2``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from . import derivatives as dv
from .derivatives import ScalarField
from .expressions import ExpressionError, parse
from .mechanics import HamiltonianSystem, LagrangianSystem


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    n: int
    lagrangian: str | None = None
    hamiltonian: str | None = None
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise ScenarioError("n must be a positive integer")
        if self.lagrangian is None and self.hamiltonian is None:
            raise ScenarioError("a scenario needs a lagrangian or a hamiltonian")
        for k, v in self.parameters.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ScenarioError(f"parameter {k!r} must be a finite number")


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int
    lagrangian: LagrangianSystem | None
    hamiltonian: HamiltonianSystem | None
    regular: bool = True

    def hamiltonian_system(self) -> HamiltonianSystem:
        """The explicit Hamiltonian, or the one induced by the Lagrangian."""
        if self.hamiltonian is not None:
            return self.hamiltonian
        if self.lagrangian is None:
            raise ScenarioError(f"{self.name} has neither L nor H")
        return HamiltonianSystem.from_lagrangian(self.lagrangian)


def _split(x, n):
    return x[0], x[1 : 1 + n], x[1 + n : 1 + 2 * n]


def _free_particle(n):
    def L(x):
        _, _, v = _split(x, n)
        return sum(0.5 * vi * vi for vi in v)

    return L, None


def _harmonic(n):
    def L(x):
        _, q, v = _split(x, n)
        return sum(0.5 * vi * vi - 0.5 * qi * qi for qi, vi in zip(q, v))

    return L, None


def _driven_oscillator(n):
    def L(x):
        t, q, v = _split(x, n)
        s = dv.sin(t)
        return sum(0.5 * vi * vi - 0.5 * qi * qi + qi * s for qi, vi in zip(q, v))

    def H(x):
        t, q, p = _split(x, n)
        s = dv.sin(t)
        return sum(0.5 * pi * pi + 0.5 * qi * qi - qi * s for qi, pi in zip(q, p))

    return L, H


def _caldirola_kanai(n):
    def L(x):
        t, q, v = _split(x, n)
        return dv.exp(t) * sum(0.5 * vi * vi - 0.5 * qi * qi for qi, vi in zip(q, v))

    return L, None


def _linear_velocity(n):
    def L(x):
        _, _, v = _split(x, n)
        return sum(v[1:], v[0])

    return L, None


_BUILTINS: dict[str, tuple[Callable, bool]] = {
    "free_particle": (_free_particle, True),
    "harmonic": (_harmonic, True),
    "driven_oscillator": (_driven_oscillator, True),
    "caldirola_kanai": (_caldirola_kanai, True),
    "linear_velocity": (_linear_velocity, False),
}

BUILTIN_NAMES = tuple(_BUILTINS)
REGULAR_NAMES = tuple(k for k, (_, ok) in _BUILTINS.items() if ok)


def builtin(name: str, n: int = 1) -> Scenario:
    try:
        make, regular = _BUILTINS[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; built-ins: {', '.join(BUILTIN_NAMES)}") from None
    if n < 1:
        raise ScenarioError("n must be a positive integer")
    L, H = make(n)
    lag = LagrangianSystem(n, ScalarField(L, 1 + 2 * n, name=name), name=name)
    ham = None if H is None else HamiltonianSystem(n, ScalarField(H, 1 + 2 * n, name=name), name=name)
    return Scenario(name, n, lag, ham, regular)


def from_config(cfg: ScenarioConfig) -> Scenario:
    try:
        lag = ham = None
        if cfg.lagrangian is not None:
            lag = LagrangianSystem(cfg.n, parse(cfg.lagrangian, cfg.n, "lagrangian", cfg.parameters), cfg.name, dict(cfg.parameters))
        if cfg.hamiltonian is not None:
            ham = HamiltonianSystem(cfg.n, parse(cfg.hamiltonian, cfg.n, "hamiltonian", cfg.parameters), cfg.name, dict(cfg.parameters))
    except ExpressionError as exc:
        raise ScenarioError(str(exc)) from None
    return Scenario(cfg.name, cfg.n, lag, ham)


def load_config(path: str | Path) -> ScenarioConfig:
    """Read one scenario from a JSON document."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario file must hold a JSON object")
    unknown = set(doc) - {"name", "n", "lagrangian", "hamiltonian", "parameters"}
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    for key in ("lagrangian", "hamiltonian"):
        if key in doc and not isinstance(doc[key], str):
            raise ScenarioError(f"{key} must be an expression string")
    params = doc.get("parameters", {})
    if not isinstance(params, dict):
        raise ScenarioError("parameters must be an object")
    return ScenarioConfig(
        name=str(doc.get("name", Path(path).stem)),
        n=doc.get("n", 1),
        lagrangian=doc.get("lagrangian"),
        hamiltonian=doc.get("hamiltonian"),
        parameters=params,
    )


def resolve(name_or_path: str, n: int = 1) -> Scenario:
    """A built-in by name, otherwise a JSON scenario file."""
    if name_or_path in _BUILTINS:
        return builtin(name_or_path, n)
    if name_or_path.endswith(".json") or Path(name_or_path).is_file():
        return from_config(load_config(name_or_path))
    return builtin(name_or_path, n)  # raises with the list of built-ins
