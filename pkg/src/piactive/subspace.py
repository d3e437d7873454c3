"""Estimation and analysis of the gradient outer-product matrix C.

``C = E[grad f grad f^T]`` under the uniform density on ``[-1, 1]^m``. It is
estimated by tensor Gauss-Legendre quadrature, by Monte Carlo, or from a
stored gradient sample set, then eigendecomposed to find the active subspace.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .models import ModelFunction, ParameterSpace

MAX_QUADRATURE_POINTS = 10**7
CHUNK = 1 << 14
ZERO_REL = 1e-12


class EstimationError(RuntimeError):
    pass


class ModelEvaluationError(EstimationError):
    def __init__(self, index: int, point: np.ndarray, what: str = "gradient"):
        super().__init__(f"non-finite {what} at point {index}: {np.array2string(point, precision=17)}")
        self.index = index
        self.point = point


class SelectionError(ValueError):
    pass


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Counter-style stream derivation: one independent generator per key path."""
    if seed is None:
        raise ValueError("a seed is required for stochastic estimators")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


# ---------------------------------------------------------------------------
# data containers


@dataclass(frozen=True)
class GradientSampleSet:
    """Gradient samples in normalized log coordinates."""

    x: np.ndarray  # (M, m) normalized points
    f: np.ndarray  # (M,)
    grad: np.ndarray  # (M, m) gradients w.r.t. normalized coordinates
    space: ParameterSpace
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        g = np.atleast_2d(np.asarray(self.grad, dtype=float))
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if x.shape != g.shape or x.shape[0] != f.shape[0] or x.shape[1] != self.space.m:
            raise ValueError(f"inconsistent sample shapes: x {x.shape}, f {f.shape}, grad {g.shape}, m={self.space.m}")
        bad = np.flatnonzero(~np.all(np.isfinite(g), axis=1))
        if bad.size:
            raise ValueError(f"non-finite gradient in sample {bad[0]}")
        for arr in (x, g, f):
            arr.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "grad", g)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def M(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]

    @property
    def space_id(self) -> str:
        return self.space.space_id

    @property
    def x_physical(self) -> np.ndarray:
        return self.space.to_physical(self.x)

    def records(self) -> Iterator:
        from .models import EvaluationRecord

        t = self.x_physical
        for i in range(self.M):
            yield EvaluationRecord(self.x[i], t[i], float(self.f[i]), self.grad[i])

    def subset(self, index) -> "GradientSampleSet":
        index = np.asarray(index)
        return GradientSampleSet(self.x[index], self.f[index], self.grad[index], self.space,
                                 {**self.provenance, "subset_of": self.M})

    @staticmethod
    def concatenate(sets: list["GradientSampleSet"]) -> "GradientSampleSet":
        first = sets[0]
        if any(s.space_id != first.space_id for s in sets):
            raise ValueError("cannot join sample sets over different parameter spaces")
        return GradientSampleSet(
            np.vstack([s.x for s in sets]), np.concatenate([s.f for s in sets]),
            np.vstack([s.grad for s in sets]), first.space, {"source": "concatenated"},
        )


@dataclass(frozen=True)
class CMatrixEstimate:
    C: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)
    space_id: str | None = None

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("C must be square")
        C = (C + C.T) / 2
        C.flags.writeable = False
        object.__setattr__(self, "C", C)

    @property
    def m(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class BootstrapResult:
    replicates: int
    seed: int
    level: float
    eig_min: np.ndarray
    eig_max: np.ndarray
    eig_lower: np.ndarray
    eig_upper: np.ndarray
    # per active dimension n = 1..m-1: distances of replicate W1(n) to the full-sample W1(n)
    dist_mean: np.ndarray
    dist_min: np.ndarray
    dist_max: np.ndarray
    dist_lower: np.ndarray
    dist_upper: np.ndarray
    eigenvalues: np.ndarray = field(repr=False, default=None)  # (replicates, m)

    def to_dict(self) -> dict:
        return {
            "replicates": self.replicates,
            "seed": self.seed,
            "level": self.level,
            "eigenvalue_min": self.eig_min.tolist(),
            "eigenvalue_max": self.eig_max.tolist(),
            "eigenvalue_lower": self.eig_lower.tolist(),
            "eigenvalue_upper": self.eig_upper.tolist(),
            "distance": [
                {"n": n + 1, "mean": float(self.dist_mean[n]), "min": float(self.dist_min[n]),
                 "max": float(self.dist_max[n]), "lower": float(self.dist_lower[n]),
                 "upper": float(self.dist_upper[n])}
                for n in range(len(self.dist_mean))
            ],
        }


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    bootstrap: BootstrapResult | None = None

    @property
    def m(self) -> int:
        return len(self.eigenvalues)

    def subspace(self, n: int, selection: str = "explicit") -> "ActiveSubspace":
        if not 1 <= n <= self.m:
            raise SelectionError(f"active dimension must be in [1, {self.m}], got {n}")
        return ActiveSubspace(n, self.eigenvectors[:, :n], self.eigenvectors[:, n:], selection,
                              self.eigenvalues)

    def numerical_rank(self, zero_tol: float = 1e-10) -> int:
        lam1 = self.eigenvalues[0]
        if lam1 <= 0:
            return 0
        return int(np.sum(self.eigenvalues > zero_tol * lam1))


@dataclass(frozen=True)
class ActiveSubspace:
    n: int
    W1: np.ndarray
    W2: np.ndarray
    selection: str
    eigenvalues: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.W1.shape[0]

    @property
    def W(self) -> np.ndarray:
        return np.hstack([self.W1, self.W2])

    def active(self, xi) -> np.ndarray:
        return np.atleast_2d(xi) @ self.W1

    def inactive(self, xi) -> np.ndarray:
        return np.atleast_2d(xi) @ self.W2


# ---------------------------------------------------------------------------
# estimators


def gauss_legendre_grid(points_per_dim: int, m: int, force: bool = False):
    """Tensor Gauss-Legendre nodes on [-1, 1]^m with weights summing to 1."""
    if points_per_dim < 1:
        raise ValueError("points_per_dim must be >= 1")
    total = points_per_dim**m
    if total > MAX_QUADRATURE_POINTS and not force:
        raise EstimationError(
            f"tensor rule needs {total} points (> {MAX_QUADRATURE_POINTS}); pass force=True to allow"
        )
    nodes, weights = np.polynomial.legendre.leggauss(points_per_dim)
    weights = weights / 2
    grids = np.meshgrid(*([nodes] * m), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([weights] * m), indexing="ij")
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return X, W


def _gradients(model: ModelFunction, X: np.ndarray, workers: int = 1) -> np.ndarray:
    chunks = [(s, X[s:s + CHUNK]) for s in range(0, len(X), CHUNK)]

    def run(item):
        start, block = item
        g = np.asarray(model.gradient(block), dtype=float).reshape(len(block), -1)
        bad = np.flatnonzero(~np.all(np.isfinite(g), axis=1))
        if bad.size:
            raise ModelEvaluationError(start + int(bad[0]), block[bad[0]])
        return g

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.vstack(parts) if parts else np.empty((0, model.m))


def _outer_sum(G: np.ndarray, w: np.ndarray) -> np.ndarray:
    """sum_i w_i g_i g_i^T, accumulated over fixed-size chunks in index order."""
    m = G.shape[1]
    C = np.zeros((m, m))
    for s in range(0, len(G), CHUNK):
        g = G[s:s + CHUNK]
        C += g.T @ (w[s:s + CHUNK, None] * g)
    return C


def estimate_c_quadrature(model: ModelFunction, space: ParameterSpace | None = None,
                          points_per_dim: int = 11, workers: int = 1, force: bool = False,
                          return_gradients: bool = False):
    space = model.space if space is None else space
    X, w = gauss_legendre_grid(points_per_dim, space.m, force)
    G = _gradients(model, X, workers)
    est = CMatrixEstimate(_outer_sum(G, w), "quadrature", {"points_per_dim": points_per_dim,
                                                            "points": len(X)}, space.space_id)
    if return_gradients:
        return est, (X, w, G)
    return est


def estimate_c_monte_carlo(model: ModelFunction, space: ParameterSpace | None = None, M: int = 100,
                           seed: int | None = None, workers: int = 1):
    """Monte Carlo estimate with ``M`` uniform draws from the seeded stream ``(seed, 0)``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    space = model.space if space is None else space
    X = space.sample(rng_for(seed, 0), M)
    G = _gradients(model, X, workers)
    f = np.asarray(model.value(X), dtype=float)
    samples = GradientSampleSet(X, f, G, space, {"source": "internal", "model": model.name,
                                                 "estimator": "monte_carlo", "seed": int(seed)})
    est = estimate_c_from_samples(samples)
    est = replace(est, method="monte_carlo", meta={"M": M, "seed": int(seed)})
    return est, samples


def estimate_c_from_samples(samples: GradientSampleSet) -> CMatrixEstimate:
    if samples.M == 0:
        raise ValueError("empty sample set")
    w = np.full(samples.M, 1.0 / samples.M)
    return CMatrixEstimate(_outer_sum(samples.grad, w), "from_samples", {"M": samples.M}, samples.space_id)


# ---------------------------------------------------------------------------
# spectra


def _sign_normalize(W: np.ndarray) -> np.ndarray:
    W = W.copy()
    for j in range(W.shape[1]):
        i = int(np.argmax(np.abs(W[:, j])))
        if W[i, j] < 0:
            W[:, j] = -W[:, j]
    return W


def eigendecompose(C) -> Spectrum:
    """Descending eigenpairs; each eigenvector's largest-magnitude entry is positive."""
    C = C.C if isinstance(C, CMatrixEstimate) else np.asarray(C, dtype=float)
    C = (C + C.T) / 2
    try:
        lam, W = np.linalg.eigh(C)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"eigensolver failed (cond ~ {np.linalg.cond(C):.3e}): {exc}") from exc
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    W = _sign_normalize(W[:, order])
    if lam[0] > 0 and lam[-1] < -ZERO_REL * lam[0]:
        warnings.warn(f"C is not positive semidefinite: min eigenvalue {lam[-1]:.3e}", RuntimeWarning)
    return Spectrum(lam, W)


def _gap_scores(lam: np.ndarray, max_n: int) -> np.ndarray:
    floor = ZERO_REL * lam[0]
    logs = np.log10(np.maximum(lam, floor))
    return np.array([logs[n - 1] - logs[n] for n in range(1, max_n + 1)])


def select_dimension(spectrum: Spectrum, strategy: str | int = "largest_gap", max_n: int | None = None) -> ActiveSubspace:
    """Pick the active dimension explicitly (an int) or at the largest eigenvalue gap.

    Gaps are measured between log10 eigenvalues; anything below 1e-12 * lambda_1
    is clamped to that floor, i.e. treated as zero.
    """
    lam = spectrum.eigenvalues
    m = len(lam)
    if isinstance(strategy, (int, np.integer)):
        n = int(strategy)
        if not 1 <= n < m:
            raise SelectionError(f"explicit dimension must satisfy 1 <= n < {m}, got {n}")
        return spectrum.subspace(n, "explicit")
    if strategy != "largest_gap":
        raise SelectionError(f"unknown selection strategy {strategy!r}")
    max_n = m - 1 if max_n is None else min(max_n, m - 1)
    if m < 2 or max_n < 1 or lam[0] <= 0 or np.all(lam == lam[0]):
        raise SelectionError("no gap: the eigenvalues are all equal")
    scores = _gap_scores(lam, max_n)
    if np.all(scores <= 0):
        raise SelectionError("no gap: the eigenvalues are all equal")
    n = int(np.argmax(scores)) + 1
    return spectrum.subspace(n, "largest_gap")


def largest_gap_index(spectrum: Spectrum) -> int:
    return select_dimension(spectrum, "largest_gap").n


def _check_orthonormal(W: np.ndarray, label: str):
    G = W.T @ W
    if np.max(np.abs(G - np.eye(G.shape[0]))) > 1e-8:
        raise ValueError(f"{label} does not have orthonormal columns")


def subspace_distance(W1a, W1b) -> float:
    """Spectral norm of the difference of the two orthogonal projectors."""
    A = np.atleast_2d(np.asarray(W1a, dtype=float))
    B = np.atleast_2d(np.asarray(W1b, dtype=float))
    if A.shape[0] == 1 and A.shape[1] > 1:
        A, B = A.T, B.T
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    _check_orthonormal(A, "first basis")
    _check_orthonormal(B, "second basis")
    return float(min(1.0, np.linalg.norm(A @ A.T - B @ B.T, 2)))


def gap_bound(eigenvalues, n: int, delta: float) -> float:
    """Upper bound 4 lambda_1 delta / (lambda_n - lambda_{n+1}) on the subspace error."""
    lam = np.asarray(eigenvalues, dtype=float)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    gap = lam[n - 1] - lam[n]
    if not gap > 0:
        raise ValueError(f"no gap between eigenvalues {n} and {n + 1}")
    return float(4 * lam[0] * delta / gap)


def sample_count_heuristic(k: int, m: int, alpha: float = 10.0) -> int:
    """Number of gradient samples ceil(alpha k ln m)."""
    if k < 1 or m < 2 or not alpha > 0:
        raise ValueError("need k >= 1, m >= 2 and alpha > 0")
    if not 2 <= alpha <= 10:
        warnings.warn(f"alpha = {alpha} outside the usual range [2, 10]")
    return math.ceil(alpha * k * math.log(m))


# ---------------------------------------------------------------------------
# bootstrap


def bootstrap_spectrum(samples: GradientSampleSet, replicates: int = 500, seed: int | None = None,
                       level: float = 0.95, workers: int = 1) -> BootstrapResult:
    """Nonparametric bootstrap over gradient samples; replicate r uses stream (seed, 1, r)."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    M, m = samples.M, samples.m
    if M < 2:
        raise ValueError("bootstrap needs at least two samples")
    full = eigendecompose(estimate_c_from_samples(samples))
    G = samples.grad
    w = np.full(M, 1.0 / M)

    def one(r: int):
        idx = rng_for(seed, 1, r).integers(0, M, size=M)
        spec = eigendecompose(_outer_sum(G[idx], w))
        dists = [subspace_distance(spec.eigenvectors[:, :n], full.eigenvectors[:, :n]) for n in range(1, m)]
        return spec.eigenvalues, dists

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(replicates)))
    else:
        results = [one(r) for r in range(replicates)]
    lam = np.array([r[0] for r in results])
    dist = np.array([r[1] for r in results]).reshape(replicates, m - 1)
    tail = (1 - level) / 2 * 100
    return BootstrapResult(
        replicates, int(seed), level,
        lam.min(axis=0), lam.max(axis=0),
        np.percentile(lam, tail, axis=0), np.percentile(lam, 100 - tail, axis=0),
        dist.mean(axis=0), dist.min(axis=0), dist.max(axis=0),
        np.percentile(dist, tail, axis=0), np.percentile(dist, 100 - tail, axis=0),
        lam,
    )


# ---------------------------------------------------------------------------
# activity identity


@dataclass(frozen=True)
class ActivityReport:
    n: int
    active_eigensum: float
    inactive_eigensum: float
    active_integral: float
    inactive_integral: float
    active_residual: float  # relative to lambda_1
    inactive_residual: float

    def passed(self, tol: float = 1e-10) -> bool:
        return bool(self.active_residual < tol and self.inactive_residual < tol)


def activity_identity_check(model: ModelFunction, space: ParameterSpace | None, spectrum: Spectrum,
                            n: int, quadrature_order: int = 11, gradients=None) -> ActivityReport:
    """Compare eigenvalue sums with quadrature integrals of |grad_y f|^2 and |grad_z f|^2."""
    space = model.space if space is None else space
    if gradients is None:
        X, w = gauss_legendre_grid(quadrature_order, space.m)
        G = _gradients(model, X)
    else:
        _, w, G = gradients
    W1 = spectrum.eigenvectors[:, :n]
    W2 = spectrum.eigenvectors[:, n:]
    act = float(np.sum(w * np.sum((G @ W1) ** 2, axis=1)))
    inact = float(np.sum(w * np.sum((G @ W2) ** 2, axis=1))) if W2.shape[1] else 0.0
    lam = spectrum.eigenvalues
    lam1 = lam[0] if lam[0] > 0 else 1.0
    s_act = float(np.sum(lam[:n]))
    s_inact = float(np.sum(lam[n:]))
    return ActivityReport(n, s_act, s_inact, act, inact, abs(s_act - act) / lam1, abs(s_inact - inact) / lam1)


# ---------------------------------------------------------------------------
# reports


def spectrum_report(spectrum: Spectrum, subspace: ActiveSubspace | None, estimate: CMatrixEstimate | None,
                    names=None) -> dict:
    lam = spectrum.eigenvalues
    out = {
        "m": spectrum.m,
        "parameters": list(names) if names is not None else None,
        "eigenvalues": lam.tolist(),
        "eigenvectors": spectrum.eigenvectors.tolist(),
        "eigenvalue_ratios": (lam / lam[0]).tolist() if lam[0] > 0 else None,
    }
    if subspace is not None:
        out["selected_n"] = subspace.n
        out["selection"] = subspace.selection
        if subspace.n < spectrum.m:
            out["gap"] = {"between": [subspace.n, subspace.n + 1],
                          "values": [float(lam[subspace.n - 1]), float(lam[subspace.n])]}
    if estimate is not None:
        out["estimator"] = {"method": estimate.method, **estimate.meta, "space_id": estimate.space_id}
    if spectrum.bootstrap is not None:
        out["bootstrap"] = spectrum.bootstrap.to_dict()
    return out


def eigenvalues_csv(spectrum: Spectrum) -> str:
    lines = ["index,eigenvalue" + (",lower,upper,min,max" if spectrum.bootstrap else "")]
    b = spectrum.bootstrap
    for i, lam in enumerate(spectrum.eigenvalues):
        row = f"{i + 1},{float(lam)!r}"
        if b is not None:
            row += "," + ",".join(repr(float(a[i])) for a in (b.eig_lower, b.eig_upper, b.eig_min, b.eig_max))
        lines.append(row)
    return "\n".join(lines) + "\n"
