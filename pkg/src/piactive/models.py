"""Parameter spaces and differentiable model functions.

All models take points in *normalized* log coordinates. A physical input
``t > 0`` maps to ``s = log t`` and then affinely to
``xi = (2 s - (log_hi + log_lo)) / (log_hi - log_lo)`` in ``[-1, 1]``.
Gradients are returned with respect to ``xi``, which is the coordinate system
where the input density is uniform.

Evaluators are vectorized: ``value`` takes an ``(N, m)`` array and returns
``(N,)``; ``gradient`` returns ``(N, m)``. A single 1-D point is accepted too.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np


class DomainError(ValueError):
    """Physical inputs outside the model's domain (nonpositive, Ha = 0, ...)."""


# ---------------------------------------------------------------------------
# parameter spaces


@dataclass(frozen=True)
class ParameterSpace:
    names: tuple[str, ...]
    log_lower: np.ndarray
    log_upper: np.ndarray
    constants: dict = field(default_factory=dict)
    # name of the quantity-system input each parameter stands in for
    quantities: tuple[str, ...] | None = None
    model: str | None = None

    def __post_init__(self):
        names = tuple(self.names)
        lo = np.asarray(self.log_lower, dtype=float).copy()
        hi = np.asarray(self.log_upper, dtype=float).copy()
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        if lo.shape != (len(names),) or hi.shape != (len(names),):
            raise ValueError("bounds must have one entry per parameter")
        if not np.all(lo < hi):
            bad = [n for n, a, b in zip(names, lo, hi) if not a < b]
            raise ValueError(f"log_lower < log_upper violated for {bad}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "log_lower", lo)
        object.__setattr__(self, "log_upper", hi)
        object.__setattr__(self, "constants", dict(self.constants))
        quantities = tuple(self.quantities) if self.quantities is not None else names
        if len(quantities) != len(names):
            raise ValueError("one quantity name per parameter")
        object.__setattr__(self, "quantities", quantities)

    @classmethod
    def from_bounds(cls, names, low, high, **kw) -> "ParameterSpace":
        """Build from physical (linear) bounds."""
        low = np.asarray(low, dtype=float)
        high = np.asarray(high, dtype=float)
        if np.any(low <= 0) or np.any(high <= 0):
            raise DomainError("physical bounds must be positive for the log transform")
        return cls(tuple(names), np.log(low), np.log(high), **kw)

    @classmethod
    def normalized(cls, m: int) -> "ParameterSpace":
        """Generic space whose log bounds are exactly [-1, 1] (so xi = log t)."""
        return cls(tuple(f"x{i + 1}" for i in range(m)), -np.ones(m), np.ones(m))

    @property
    def m(self) -> int:
        return len(self.names)

    @property
    def center(self) -> np.ndarray:
        return (self.log_upper + self.log_lower) / 2

    @property
    def half_width(self) -> np.ndarray:
        return (self.log_upper - self.log_lower) / 2

    @property
    def space_id(self) -> str:
        blob = json.dumps(
            {"names": list(self.names), "lo": [repr(float(x)) for x in self.log_lower],
             "hi": [repr(float(x)) for x in self.log_upper]},
            sort_keys=True,
        )
        return hashlib.sha1(blob.encode()).hexdigest()[:16]

    def to_log(self, xi) -> np.ndarray:
        return self.center + self.half_width * np.asarray(xi, dtype=float)

    def to_physical(self, xi) -> np.ndarray:
        return np.exp(self.to_log(xi))

    def to_normalized(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("physical values must be positive")
        return (2 * np.log(t) - (self.log_upper + self.log_lower)) / (self.log_upper - self.log_lower)

    def gradient_to_normalized(self, t, grad_physical) -> np.ndarray:
        """Chain rule: df/dxi_i = df/dt_i * t_i * half_width_i."""
        return np.asarray(grad_physical) * np.asarray(t) * self.half_width

    def gradient_to_physical(self, t, grad_normalized) -> np.ndarray:
        return np.asarray(grad_normalized) / (np.asarray(t) * self.half_width)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(count, self.m))

    def with_inert_parameter(self, name: str, low: float = 1.0, high: float = 2.0) -> "ParameterSpace":
        return ParameterSpace(
            (*self.names, name),
            np.append(self.log_lower, math.log(low)),
            np.append(self.log_upper, math.log(high)),
            self.constants,
            (*self.quantities, name),
            self.model,
        )

    def to_dict(self) -> dict:
        params = []
        for name, q, lo, hi in zip(self.names, self.quantities, self.log_lower, self.log_upper):
            entry = {"name": name, "low": math.exp(lo), "high": math.exp(hi)}
            if q != name:
                entry["quantity"] = q
            params.append(entry)
        return {"params": params, "constants": dict(self.constants), "model": self.model}

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterSpace":
        try:
            params = data["params"]
            names = [p["name"] for p in params]
            low = [float(p["low"]) for p in params]
            high = [float(p["high"]) for p in params]
            quantities = [p.get("quantity", p["name"]) for p in params]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed parameter-space definition: {exc}") from exc
        return cls.from_bounds(names, low, high, constants=data.get("constants", {}),
                               quantities=quantities, model=data.get("model"))

    @classmethod
    def load(cls, path: str | Path) -> "ParameterSpace":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def bundled_path(filename: str) -> Path:
    return Path(str(resources.files("piactive") / "data" / filename))


def hartmann_space() -> ParameterSpace:
    return ParameterSpace.load(bundled_path("hartmann_space.json"))


def generator_space() -> ParameterSpace:
    return ParameterSpace.load(bundled_path("generator_space.json"))


# ---------------------------------------------------------------------------
# model interface


class ModelFunction:
    """A scalar function of normalized coordinates with a gradient."""

    name = "model"

    def __init__(self, space: ParameterSpace):
        self.space = space

    @property
    def m(self) -> int:
        return self.space.m

    def value(self, xi) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, xi) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.name!r} m={self.m}>"


def _as_points(xi, m: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(xi, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != m:
        raise ValueError(f"expected points with {m} coordinates, got shape {x.shape}")
    return x, single


@dataclass(frozen=True)
class EvaluationRecord:
    x_normalized: np.ndarray
    x_physical: np.ndarray
    f: float
    grad: np.ndarray


# ---------------------------------------------------------------------------
# Hartmann closed forms

# Ha below this uses the Taylor series of the bracketed factors; the direct
# forms lose ~eps/Ha^2 relative accuracy to cancellation.
SERIES_SWITCH = 0.5
_SERIES_TERMS = 14


def _bernoulli(n_max: int) -> list[Fraction]:
    B = [Fraction(0)] * (n_max + 1)
    B[0] = Fraction(1)
    for n in range(1, n_max + 1):
        B[n] = -sum(math.comb(n + 1, k) * B[k] for k in range(n)) / (n + 1)
    return B


def _series_coefficients():
    B = _bernoulli(2 * _SERIES_TERMS + 2)
    # x coth x = sum_{k>=0} 2^{2k} B_{2k} x^{2k} / (2k)!
    coth = [Fraction(2 ** (2 * k)) * B[2 * k] / math.factorial(2 * k) for k in range(_SERIES_TERMS + 1)]
    # (2/x) tanh(x/2) = sum_{k>=0} 2^{2k+2} (2^{2k+2} - 1) B_{2k+2} (x/2)^{2k} / (2k+2)!
    tanh = [Fraction(2 ** (2 * k + 2) * (2 ** (2 * k + 2) - 1)) * B[2 * k + 2]
            / math.factorial(2 * k + 2) / 2 ** (2 * k) for k in range(_SERIES_TERMS + 1)]
    return coth, tanh


_COTH_C, _TANH_C = _series_coefficients()
# 1 - x coth x and x d/dx of it, as even power series starting at x^2
_PHI = np.array([float(-c) for c in _COTH_C[1:]])
_PHI_D = np.array([float(-2 * (k + 1) * c) for k, c in enumerate(_COTH_C[1:])])
# 1 - (2/x) tanh(x/2) and x d/dx of it
_CHI = np.array([float(-c) for c in _TANH_C[1:]])
_CHI_D = np.array([float(-2 * (k + 1) * c) for k, c in enumerate(_TANH_C[1:])])


def _even_series(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    x2 = x * x
    acc = np.zeros_like(x)
    for c in coef[::-1]:
        acc = acc * x2 + c
    return acc * x2


def coth_factor(ha):
    """``(1 - Ha coth Ha, Ha * d/dHa (1 - Ha coth Ha))``, stable for all Ha > 0."""
    ha = np.asarray(ha, dtype=float)
    small = ha < SERIES_SWITCH
    h = np.where(small, 1.0, ha)
    e = np.exp(-2 * h)
    em1 = -np.expm1(-2 * h)  # 1 - e^{-2h}
    coth = (1 + e) / em1
    csch2 = 4 * e / em1**2
    phi = 1 - h * coth
    dphi = -h * coth + h * h * csch2
    phi = np.where(small, _even_series(_PHI, ha), phi)
    dphi = np.where(small, _even_series(_PHI_D, ha), dphi)
    return phi, dphi


def tanh_factor(ha):
    """``(1 - (2/Ha) tanh(Ha/2), Ha * d/dHa of it)``, stable for all Ha > 0."""
    ha = np.asarray(ha, dtype=float)
    small = ha < SERIES_SWITCH
    h = np.where(small, 1.0, ha)
    e = np.exp(-h)
    th = -np.expm1(-h) / (1 + e)  # tanh(h/2)
    sech2 = 4 * e / (1 + e) ** 2
    chi = 1 - 2 * th / h
    dchi = 2 * th / h - sech2
    chi = np.where(small, _even_series(_CHI, ha), chi)
    dchi = np.where(small, _even_series(_CHI_D, ha), dchi)
    return chi, dchi


def _check_positive(**values):
    for key, val in values.items():
        if np.any(np.asarray(val) <= 0) or np.any(~np.isfinite(np.asarray(val, dtype=float))):
            raise DomainError(f"{key} must be positive and finite")


def hartmann_number(mu, eta, B0, l=1.0):
    return B0 * l / np.sqrt(eta * mu)


def hartmann_u_avg(mu, rho, dpdx, eta, B0, l=1.0):
    """Average channel velocity of Hartmann flow. ``rho`` is accepted and ignored."""
    _check_positive(mu=mu, rho=rho, eta=eta, B0=B0, l=l)
    ha = hartmann_number(mu, eta, B0, l)
    phi, _ = coth_factor(ha)
    return -dpdx * eta / B0**2 * phi


def hartmann_b_ind(mu, rho, dpdx, eta, B0, l=1.0, mu0=1.0):
    """Induced magnetic field of Hartmann flow. ``rho`` is accepted and ignored."""
    _check_positive(mu=mu, rho=rho, eta=eta, B0=B0, l=l, mu0=mu0)
    ha = hartmann_number(mu, eta, B0, l)
    chi, _ = tanh_factor(ha)
    return dpdx * l * mu0 / (2 * B0) * chi


def hartmann_u_avg_log_gradient(mu, rho, dpdx, eta, B0, l=1.0):
    """Partials of u_avg w.r.t. (log mu, log rho, log dpdx, log eta, log B0)."""
    _check_positive(mu=mu, rho=rho, eta=eta, B0=B0, l=l)
    ha = hartmann_number(mu, eta, B0, l)
    phi, dphi = coth_factor(ha)
    pre = -dpdx * eta / B0**2
    u = pre * phi
    d_ha = pre * dphi  # d u / d log Ha at fixed prefactor
    zero = np.zeros_like(u)
    return np.stack([-0.5 * d_ha, zero, u, u - 0.5 * d_ha, -2 * u + d_ha], axis=-1)


def hartmann_b_ind_log_gradient(mu, rho, dpdx, eta, B0, l=1.0, mu0=1.0):
    """Partials of B_ind w.r.t. (log mu, log rho, log dpdx, log eta, log B0)."""
    _check_positive(mu=mu, rho=rho, eta=eta, B0=B0, l=l, mu0=mu0)
    ha = hartmann_number(mu, eta, B0, l)
    chi, dchi = tanh_factor(ha)
    pre = dpdx * l * mu0 / (2 * B0)
    b = pre * chi
    d_ha = pre * dchi
    zero = np.zeros_like(b)
    return np.stack([-0.5 * d_ha, zero, b, -0.5 * d_ha, -b + d_ha], axis=-1)


class HartmannModel(ModelFunction):
    """Hartmann u_avg or B_ind over a 5-parameter log space (mu, rho, dpdx, eta, B0)."""

    QOIS = ("u_avg", "b_ind")

    def __init__(self, qoi: str = "u_avg", space: ParameterSpace | None = None):
        if qoi not in self.QOIS:
            raise ValueError(f"unknown Hartmann quantity {qoi!r}; choose from {self.QOIS}")
        space = hartmann_space() if space is None else space
        if space.m != 5:
            raise ValueError("the Hartmann model needs exactly 5 parameters")
        super().__init__(space)
        self.qoi = qoi
        self.name = f"hartmann_{qoi}"
        self.l = float(space.constants.get("l", 1.0))
        self.mu0 = float(space.constants.get("mu0", 1.0))

    def _physical(self, xi):
        x, single = _as_points(xi, 5)
        t = self.space.to_physical(x)
        return t, single

    def value(self, xi):
        t, single = self._physical(xi)
        args = t.T
        if self.qoi == "u_avg":
            out = hartmann_u_avg(*args, l=self.l)
        else:
            out = hartmann_b_ind(*args, l=self.l, mu0=self.mu0)
        return out[0] if single else out

    def gradient(self, xi):
        t, single = self._physical(xi)
        args = t.T
        if self.qoi == "u_avg":
            g = hartmann_u_avg_log_gradient(*args, l=self.l)
        else:
            g = hartmann_b_ind_log_gradient(*args, l=self.l, mu0=self.mu0)
        g = g * self.space.half_width
        return g[0] if single else g


# ---------------------------------------------------------------------------
# dimensionless forms


def dimensionless_u_avg(Re, Ha, dP):
    Ha = np.asarray(Ha, dtype=float)
    if np.any(Ha <= 0) or np.any(np.asarray(Re) <= 0):
        raise DomainError("Re and Ha must be positive")
    phi, _ = coth_factor(Ha)
    return -dP * Re / Ha**2 * phi


def dimensionless_b_ind(Re, Ha, dP, mu0_star):
    Ha = np.asarray(Ha, dtype=float)
    if np.any(Ha <= 0) or np.any(np.asarray(Re) <= 0):
        raise DomainError("Re and Ha must be positive")
    chi, _ = tanh_factor(Ha)
    return dP * Re / Ha * mu0_star * chi


def mhd_pi_values(mu, rho, dpdx, eta, B0, l=1.0, v=1.0, p=None):
    """(Re, Ha, Pi_3) for characteristic velocity ``v`` and pressure ``p``.

    ``p`` defaults to ``l * |dpdx|``, the pressure drop over one length scale.
    """
    if p is None:
        p = l * np.abs(dpdx)
    _check_positive(mu=mu, rho=rho, eta=eta, B0=B0, l=l, v=v, p=p)
    re = rho * v * l / mu
    ha = hartmann_number(mu, eta, B0, l)
    return re, ha, p / (rho * v**2)


def magnetic_reynolds(mu0, v, l, eta):
    """mu0* in the scaled induction equation; ``eta`` here carries mu0 (diffusivity * mu0)."""
    return mu0 * v * l / eta


def characteristic_field(mu, eta, l=1.0):
    """sqrt(eta mu) / l, the field scale that makes B_ind = B_c * B*_ind / 2."""
    return np.sqrt(eta * mu) / l


# ---------------------------------------------------------------------------
# synthetic test functions


RIDGE_PROFILES: dict[str, tuple[Callable, Callable]] = {
    "square": (lambda t: np.sum(t**2, axis=1), lambda t: 2 * t),
    "linear": (lambda t: np.sum(t, axis=1), lambda t: np.ones_like(t)),
    "cubic": (lambda t: np.sum(t**3, axis=1) + np.sum(t, axis=1), lambda t: 3 * t**2 + 1),
    "exp": (lambda t: np.exp(np.sum(t, axis=1)), lambda t: np.exp(np.sum(t, axis=1))[:, None] * np.ones_like(t)),
    "sin": (lambda t: np.sin(np.sum(t, axis=1)) + 0.5 * np.sum(t**2, axis=1),
            lambda t: np.cos(np.sum(t, axis=1))[:, None] + t),
}


class RidgeModel(ModelFunction):
    """f(xi) = g(A^T xi) with an analytic gradient A grad g."""

    def __init__(self, A, profile="square", space: ParameterSpace | None = None, name: str = "ridge"):
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        m, r = A.shape
        if r > m or np.linalg.matrix_rank(A) < r:
            raise ValueError("ridge matrix A must have full column rank with r <= m")
        super().__init__(space if space is not None else ParameterSpace.normalized(m))
        if self.space.m != m:
            raise ValueError("space dimension does not match A")
        if isinstance(profile, str):
            try:
                self.g, self.dg = RIDGE_PROFILES[profile]
            except KeyError:
                raise ValueError(f"unknown ridge profile {profile!r}") from None
        else:
            self.g, self.dg = profile
        self.A = A
        self.name = name

    def value(self, xi):
        x, single = _as_points(xi, self.m)
        out = self.g(x @ self.A)
        return out[0] if single else out

    def gradient(self, xi):
        x, single = _as_points(xi, self.m)
        out = self.dg(x @ self.A) @ self.A.T
        return out[0] if single else out


def synthetic_ridge(A, profile="square", space: ParameterSpace | None = None) -> RidgeModel:
    return RidgeModel(A, profile, space)


class QuadraticModel(ModelFunction):
    """f = 1/2 xi^T H xi + b^T xi. Under the uniform density C = H^2/3 + b b^T exactly."""

    def __init__(self, H, b=None, space: ParameterSpace | None = None):
        H = np.asarray(H, dtype=float)
        H = (H + H.T) / 2
        super().__init__(space if space is not None else ParameterSpace.normalized(len(H)))
        self.H = H
        self.b = np.zeros(len(H)) if b is None else np.asarray(b, dtype=float)
        self.name = "quadratic"

    def exact_c(self) -> np.ndarray:
        return self.H @ self.H / 3 + np.outer(self.b, self.b)

    def value(self, xi):
        x, single = _as_points(xi, self.m)
        out = 0.5 * np.einsum("ij,jk,ik->i", x, self.H, x) + x @ self.b
        return out[0] if single else out

    def gradient(self, xi):
        x, single = _as_points(xi, self.m)
        out = x @ self.H + self.b
        return out[0] if single else out


class FunctionModel(ModelFunction):
    """Wrap plain callables. Without a gradient, finite differences are used."""

    def __init__(self, value: Callable, space: ParameterSpace, gradient: Callable | None = None,
                 name: str = "function", h: float = 1e-6):
        super().__init__(space)
        self._value = value
        self._gradient = gradient
        self.name = name
        self.h = h

    def value(self, xi):
        x, single = _as_points(xi, self.m)
        out = np.asarray(self._value(x), dtype=float)
        return out[0] if single else out

    def gradient(self, xi):
        x, single = _as_points(xi, self.m)
        if self._gradient is not None:
            out = np.asarray(self._gradient(x), dtype=float)
        else:
            out = finite_difference_gradient(self.value, x, self.h)
        return out[0] if single else out


def finite_difference_gradient(value: Callable, xi, h: float = 1e-6) -> np.ndarray:
    """Central differences in the interior, one-sided at the [-1, 1] faces.

    ``value`` must accept an ``(N, m)`` array. Never evaluates outside the box.
    """
    if not h > 0:
        raise ValueError("finite-difference step h must be positive")
    x, single = _as_points(xi, np.atleast_2d(np.asarray(xi)).shape[1])
    N, m = x.shape
    grad = np.empty((N, m))
    f0 = None
    for i in range(m):
        up_ok = x[:, i] + h <= 1.0
        dn_ok = x[:, i] - h >= -1.0
        xp = x.copy()
        xm = x.copy()
        xp[:, i] = np.where(up_ok, x[:, i] + h, x[:, i])
        xm[:, i] = np.where(dn_ok, x[:, i] - h, x[:, i])
        if not np.all(up_ok & dn_ok) and f0 is None:
            f0 = np.asarray(value(x), dtype=float)
        fp = np.asarray(value(xp), dtype=float)
        fm = np.asarray(value(xm), dtype=float)
        width = np.where(up_ok, h, 0.0) + np.where(dn_ok, h, 0.0)
        if f0 is not None:
            fp = np.where(up_ok, fp, f0)
            fm = np.where(dn_ok, fm, f0)
        grad[:, i] = (fp - fm) / width
    return grad[0] if single else grad


MODELS = {
    "hartmann_u_avg": lambda space=None: HartmannModel("u_avg", space),
    "hartmann_b_ind": lambda space=None: HartmannModel("b_ind", space),
}


def make_model(name: str, space: ParameterSpace | None = None) -> ModelFunction:
    try:
        return MODELS[name](space)
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


def evaluate(model: ModelFunction, xi) -> list[EvaluationRecord]:
    x = np.atleast_2d(np.asarray(xi, dtype=float))
    f = model.value(x)
    g = model.gradient(x)
    t = model.space.to_physical(x)
    return [EvaluationRecord(x[i], t[i], float(f[i]), g[i]) for i in range(len(x))]


@dataclass(frozen=True)
class GradientCheck:
    max_rel_error: float
    worst_point: int
    worst_component: int
    points: int
    h: float

    def passed(self, tol: float = 1e-6) -> bool:
        return bool(self.max_rel_error < tol)


def gradient_check(model: ModelFunction, xi, h: float = 1e-6) -> GradientCheck:
    """Analytic vs. central-difference gradients; error per point is |dg|_inf / |g|_inf."""
    x = np.atleast_2d(np.asarray(xi, dtype=float))
    g = np.atleast_2d(model.gradient(x))
    fd = finite_difference_gradient(model.value, x, h)
    diff = np.abs(g - fd)
    scale = np.max(np.abs(g), axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    rel = diff.max(axis=1) / scale
    worst = int(np.argmax(rel))
    return GradientCheck(float(rel[worst]), worst, int(np.argmax(diff[worst])), len(x), h)
