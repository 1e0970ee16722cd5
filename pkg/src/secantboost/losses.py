"""Margin losses queried strictly by value, plus their declared metadata.

A loss here is just a vectorized callable together with the facts the rest of
the toolkit is allowed to rely on: convexity, a smoothness constant when one
is known, and the declared jump set for discontinuous losses.  Nothing ever
asks a loss for a derivative.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "LossSpec",
    "make_builtin",
    "register_loss",
    "registered_names",
    "table_loss",
    "load_table_loss",
    "empirical_loss",
    "inject_label_noise",
    "LOGISTIC_BETA",
    "SQUARE_BETA",
]

# Largest secant curvature of the logistic loss.  The analytic second
# derivative tops out at 1/4 at the origin and secant curvatures can only
# average it; the dense numeric maximization in the test suite re-derives
# this constant to 1e-5.
LOGISTIC_BETA = 0.25

# (1 - z)^2 has constant curvature 2 at every scale.
SQUARE_BETA = 2.0


@dataclass(frozen=True)
class LossSpec:
    """A loss function plus the metadata the boosting stack consumes.

    evaluate must accept floats and numpy arrays and be finite on all of R.
    discontinuities lists (abscissa, jump magnitude) pairs for declared jump
    points; continuous losses leave it empty.
    """

    name: str
    evaluate: Callable
    is_convex: bool
    smoothness_beta: float | None = None
    discontinuities: tuple[tuple[float, float], ...] = ()
    params: Mapping[str, float] = field(default_factory=dict)

    def __call__(self, z):
        return self.evaluate(z)

    @property
    def disc(self) -> float:
        """Largest declared jump magnitude (0.0 when continuous)."""
        if not self.discontinuities:
            return 0.0
        return max(j for _, j in self.discontinuities)


def _vectorized(fn):
    # Uniform calling convention: scalars in, float out; arrays in, array out.
    # Scalar and array paths share the same ufunc arithmetic bit for bit.
    def wrapped(z):
        arr = np.asarray(z, dtype=np.float64)
        out = fn(arr)
        if arr.ndim == 0:
            return float(out)
        return out

    return wrapped


def _logistic(z):
    return np.logaddexp(0.0, -z)


def _exponential(z):
    return np.exp(-z)


def _square(z):
    return (1.0 - z) ** 2


def _hinge(z):
    return np.maximum(0.0, 1.0 - z)


def _zero_one(z):
    return np.where(z <= 0.0, 1.0, 0.0)


def _make_clipped_logistic(q: float):
    cap = float(np.logaddexp(0.0, -q))

    def clipped(z):
        return np.minimum(np.logaddexp(0.0, -z), cap)

    return clipped


def _make_spring(Q: float):
    # Logistic plus a train of circular-arc bumps of period 1/Q.  The bump
    # argument u = Q z - [Q z] (nearest-integer bracket, ties to even) lives
    # in [-1/2, 1/2], so 1 - 4 u^2 >= 0 up to rounding at the seams.
    def spring(z):
        u = Q * z - np.rint(Q * z)
        bump = (1.0 - np.sqrt(np.maximum(0.0, 1.0 - 4.0 * u * u))) / Q
        return np.logaddexp(0.0, -z) + bump

    return spring


def _builtin_specs(name: str, params: dict) -> LossSpec:
    if name == "exponential":
        return LossSpec("exponential", _vectorized(_exponential), is_convex=True)
    if name == "logistic":
        return LossSpec(
            "logistic",
            _vectorized(_logistic),
            is_convex=True,
            smoothness_beta=LOGISTIC_BETA,
        )
    if name == "square":
        return LossSpec(
            "square", _vectorized(_square), is_convex=True, smoothness_beta=SQUARE_BETA
        )
    if name == "hinge":
        return LossSpec("hinge", _vectorized(_hinge), is_convex=True)
    if name == "zero_one":
        return LossSpec(
            "zero_one",
            _vectorized(_zero_one),
            is_convex=False,
            discontinuities=((0.0, 1.0),),
        )
    if name == "clipped_logistic":
        q = float(params.pop("q", -2.0))
        return LossSpec(
            "clipped_logistic",
            _vectorized(_make_clipped_logistic(q)),
            is_convex=False,
            params={"q": q},
        )
    if name == "spring":
        Q = float(params.pop("Q", 1.0))
        if Q <= 0:
            raise ConfigError(f"spring loss needs Q > 0, got {Q}")
        return LossSpec(
            "spring",
            _vectorized(_make_spring(Q)),
            is_convex=False,
            params={"Q": Q},
        )
    raise KeyError(name)


BUILTIN_NAMES = (
    "exponential",
    "logistic",
    "square",
    "hinge",
    "zero_one",
    "clipped_logistic",
    "spring",
)

# User-registered loss factories: name -> callable(**params) -> LossSpec.
_REGISTRY: dict[str, Callable[..., LossSpec]] = {}


def register_loss(name: str, factory: Callable[..., LossSpec]) -> None:
    """Register an in-code loss factory resolvable by make_builtin."""
    if name in BUILTIN_NAMES:
        raise ConfigError(f"cannot shadow builtin loss {name!r}")
    _REGISTRY[name] = factory


def registered_names() -> tuple[str, ...]:
    return BUILTIN_NAMES + tuple(sorted(_REGISTRY))


def make_builtin(name: str, **params) -> LossSpec:
    """Resolve a loss by name: builtins first, then registered factories."""
    params = dict(params)
    try:
        spec = _builtin_specs(name, params)
    except KeyError:
        if name in _REGISTRY:
            return _REGISTRY[name](**params)
        raise ConfigError(f"unknown loss {name!r}") from None
    if params:
        raise ConfigError(f"loss {name!r} does not take parameters {sorted(params)}")
    return spec


def table_loss(name: str, zs: Sequence[float], values: Sequence[float]) -> LossSpec:
    """Piecewise-linear loss through the given (z, F(z)) knots.

    Outside the knot range the end values extend as constants.  Tables are
    continuous by construction, so no jump set is declared; convexity is not
    assumed.
    """
    zs = np.asarray(zs, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if zs.ndim != 1 or zs.shape != values.shape or zs.size < 2:
        raise ConfigError("table loss needs two matching 1-d columns with >= 2 rows")
    order = np.argsort(zs, kind="stable")
    zs = zs[order]
    values = values[order]
    if np.any(np.diff(zs) <= 0):
        raise ConfigError("table loss abscissae must be distinct")
    if not (np.all(np.isfinite(zs)) and np.all(np.isfinite(values))):
        raise ConfigError("table loss entries must be finite")

    def interp(z):
        return np.interp(z, zs, values)

    return LossSpec(name, _vectorized(interp), is_convex=False)


def load_table_loss(path: str, name: str | None = None) -> LossSpec:
    """Read a two-column CSV (z, value) into a piecewise-linear loss."""
    zs: list[float] = []
    vals: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader):
            if not row or (lineno == 0 and not _is_number(row[0])):
                continue  # header or blank line
            if len(row) < 2:
                raise ConfigError(f"{path}:{lineno + 1}: expected two columns")
            try:
                zs.append(float(row[0]))
                vals.append(float(row[1]))
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno + 1}: {exc}") from None
    return table_loss(name or "table", zs, vals)


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def empirical_loss(F: LossSpec, S, H) -> float:
    """Mean loss of ensemble H on dataset S: average of F(y_i * H(x_i))."""
    margins = np.asarray(S.labels, dtype=np.float64) * H.predict_dataset(S)
    return float(np.mean(F(margins)))


def inject_label_noise(S, eta: float, seed: int):
    """Flip each label independently with probability eta (returns a copy)."""
    if not 0.0 <= eta < 1.0:
        raise ConfigError(f"noise rate must be in [0, 1), got {eta}")
    rng = np.random.default_rng(seed)
    flips = rng.random(S.m) < eta
    labels = np.where(flips, -S.labels, S.labels)
    return dataclasses.replace(S, labels=labels)
