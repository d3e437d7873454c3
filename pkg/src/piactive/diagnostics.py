"""Summary plots, sensitivities, ridge fits and the units/subspace cross-check."""

from __future__ import annotations

import html
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .models import ModelFunction, ParameterSpace
from .subspace import ActiveSubspace, GradientSampleSet, Spectrum, rng_for, subspace_distance
from .units import PiGroupSet, rank as rational_rank, transpose


class FitError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# summary data


@dataclass(frozen=True)
class SummaryData:
    y: np.ndarray  # (N, n) active variables
    f: np.ndarray
    x_normalized: np.ndarray
    x_physical: np.ndarray
    names: tuple[str, ...]
    provenance: str = ""

    @property
    def n(self) -> int:
        return self.y.shape[1]

    def to_csv(self) -> str:
        cols = [f"y{i + 1}" for i in range(self.n)] + ["f"] + list(self.names)
        out = [",".join(cols)]
        for yi, fi, ti in zip(self.y, self.f, self.x_physical):
            out.append(",".join(repr(float(v)) for v in (*yi, fi, *ti)))
        return "\n".join(out) + "\n"

    def to_svg(self, title: str = "") -> str:
        return scatter_svg(self, title)


def _source_points(source, count: int, seed):
    if isinstance(source, GradientSampleSet):
        take = min(count, source.M)
        return source.x[:take], source.f[:take], source.space, f"samples[:{take}]"
    if isinstance(source, ModelFunction):
        if seed is None:
            raise ValueError("a seed is required to draw fresh summary points")
        x = source.space.sample(rng_for(seed, 2), count)
        return x, np.asarray(source.value(x), dtype=float), source.space, f"draws(seed={seed}, count={count})"
    x, f, space = source
    return np.asarray(x)[:count], np.asarray(f)[:count], space, "points"


def _summary(source, W: np.ndarray, count: int, seed) -> SummaryData:
    x, f, space, prov = _source_points(source, count, seed)
    return SummaryData(x @ W, np.asarray(f, dtype=float), x, space.to_physical(x), space.names, prov)


def summary_1d(source, subspace: ActiveSubspace, count: int = 1000, seed=None) -> SummaryData:
    """Rows (w1^T xi, f). ``source`` is a sample set, a model (fresh seeded draws) or (x, f, space)."""
    return _summary(source, subspace.W[:, :1], count, seed)


def summary_2d(source, subspace: ActiveSubspace, count: int = 1000, seed=None) -> SummaryData:
    if subspace.n < 2:
        raise ValueError(f"a 2-D summary needs an active subspace of dimension >= 2, got n = {subspace.n}")
    return _summary(source, subspace.W1[:, :2], count, seed)


def spearman(summary: SummaryData, column: int = 0) -> float:
    return float(stats.spearmanr(summary.y[:, column], summary.f).statistic)


def neighbor_discrepancy(summary: SummaryData, radius: float = 1e-6) -> tuple[float, int]:
    """Largest |f - f'| / spread(f) over row pairs within ``radius`` in every active coordinate.

    Returns (discrepancy, number of pairs examined).
    """
    spread = float(np.ptp(summary.f)) or 1.0
    tree = cKDTree(summary.y)
    pairs = tree.query_pairs(radius, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return 0.0, 0
    diff = np.abs(summary.f[pairs[:, 0]] - summary.f[pairs[:, 1]])
    return float(diff.max() / spread), len(pairs)


def inactive_partners(x: np.ndarray, subspace: ActiveSubspace, seed) -> np.ndarray:
    """For each point, a random point in the box with identical active coordinates."""
    rng = rng_for(seed, 3)
    W2 = subspace.W2
    out = np.empty_like(x)
    for i, xi in enumerate(x):
        d = W2 @ rng.standard_normal(W2.shape[1])
        d /= np.linalg.norm(d)
        with np.errstate(divide="ignore"):
            t_hi = np.where(d > 0, (1 - xi) / d, np.where(d < 0, (-1 - xi) / d, np.inf))
            t_lo = np.where(d > 0, (-1 - xi) / d, np.where(d < 0, (1 - xi) / d, -np.inf))
        lo, hi = t_lo.max(), t_hi.min()
        out[i] = np.clip(xi + rng.uniform(lo, hi) * d, -1, 1)
    return out


def functional_dependence(model: ModelFunction, subspace: ActiveSubspace, summary: SummaryData,
                          seed, radius: float = 1e-6) -> tuple[float, int]:
    """Neighbor test on the summary rows augmented with inactive-direction partners.

    Each partner shares its original's active coordinates (to rounding) but
    differs along the inactive subspace, so the pair test is never vacuous.
    """
    W = subspace.W1[:, :summary.n]
    partners = inactive_partners(summary.x_normalized, subspace, seed)
    fp = np.asarray(model.value(partners), dtype=float)
    merged = SummaryData(
        np.vstack([summary.y, partners @ W]), np.concatenate([summary.f, fp]),
        np.vstack([summary.x_normalized, partners]), model.space.to_physical(np.vstack([summary.x_normalized, partners])),
        summary.names, summary.provenance + "+partners",
    )
    return neighbor_discrepancy(merged, radius)


# ---------------------------------------------------------------------------
# sensitivities


@dataclass(frozen=True)
class SensitivityReport:
    names: tuple[str, ...]
    n: int
    scores: np.ndarray  # activity scores, max-normalized
    raw_scores: np.ndarray
    first_eigenvector: np.ndarray

    def ranking(self) -> list[str]:
        return [self.names[i] for i in np.argsort(-self.scores, kind="stable")]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "parameters": list(self.names),
            "activity_scores": self.scores.tolist(),
            "raw_activity_scores": self.raw_scores.tolist(),
            "first_eigenvector": self.first_eigenvector.tolist(),
            "ranking": self.ranking(),
        }

    def to_text(self) -> str:
        width = max(9, *(len(n) for n in self.names))
        lines = [f"{'parameter':<{width}}  {'score':>12}  {'w1':>12}"]
        for name, s, w in zip(self.names, self.scores, self.first_eigenvector):
            lines.append(f"{name:<{width}}  {s:12.6e}  {w:+12.6e}")
        return "\n".join(lines) + "\n"


def eigenvector_sensitivities(spectrum: Spectrum, n: int, names=None) -> SensitivityReport:
    """Activity scores s_i = sum_{j<=n} lambda_j w_ij^2, scaled so the largest is 1."""
    if not 1 <= n <= spectrum.m:
        raise ValueError(f"n must be in [1, {spectrum.m}]")
    lam = np.maximum(spectrum.eigenvalues[:n], 0.0)
    W = spectrum.eigenvectors[:, :n]
    raw = (W**2) @ lam
    top = raw.max()
    scores = raw / top if top > 0 else raw
    names = tuple(names) if names is not None else tuple(f"x{i + 1}" for i in range(spectrum.m))
    return SensitivityReport(names, n, scores, raw, spectrum.eigenvectors[:, 0].copy())


# ---------------------------------------------------------------------------
# ridge approximation


@dataclass(frozen=True)
class RidgeFit:
    degree: int
    n: int
    train_error: float
    test_error: float
    coefficients: np.ndarray = field(repr=False)


def _design(y: np.ndarray, lo: np.ndarray, hi: np.ndarray, degree: int) -> np.ndarray:
    t = 2 * (y - lo) / np.where(hi > lo, hi - lo, 1.0) - 1
    if y.shape[1] == 1:
        return np.polynomial.legendre.legvander(t[:, 0], degree)
    return np.polynomial.legendre.legvander2d(t[:, 0], t[:, 1], [degree, degree])


def ridge_residual(model: ModelFunction, subspace: ActiveSubspace, fit_degree: int,
                   train_count: int = 2000, test_count: int = 2000, seed=0) -> RidgeFit:
    """Least-squares Legendre fit of f on the active variables; errors are RMS / spread(f)."""
    n = subspace.n
    if n not in (1, 2):
        raise ValueError("ridge fits support n in {1, 2}")
    if fit_degree < 1:
        raise ValueError("fit_degree must be >= 1")
    W = subspace.W1
    xtr = model.space.sample(rng_for(seed, 4), train_count)
    xte = model.space.sample(rng_for(seed, 5), test_count)
    ftr = np.asarray(model.value(xtr), dtype=float)
    fte = np.asarray(model.value(xte), dtype=float)
    ytr, yte = xtr @ W, xte @ W
    lo, hi = ytr.min(axis=0), ytr.max(axis=0)
    V = _design(ytr, lo, hi, fit_degree)
    if np.linalg.cond(V) > 1e12:
        raise FitError(f"design matrix is ill-conditioned at degree {fit_degree}; use a lower degree")
    coef, *_ = np.linalg.lstsq(V, ftr, rcond=None)
    spread = float(np.ptp(ftr)) or 1.0
    train = float(np.sqrt(np.mean((V @ coef - ftr) ** 2)) / spread)
    test = float(np.sqrt(np.mean((_design(yte, lo, hi, fit_degree) @ coef - fte) ** 2)) / spread)
    return RidgeFit(fit_degree, n, train, test, coef)


# ---------------------------------------------------------------------------
# dimensional analysis vs. active subspace


@dataclass(frozen=True)
class LogRidgeMatrix:
    A: np.ndarray
    A_exact: list  # rational m x (n+1)
    input_names: tuple[str, ...]

    @property
    def predicted_max_dim(self) -> int:
        return self.A.shape[1]

    def restrict(self, varied: list[str]) -> np.ndarray:
        """Rows of A for the varied inputs, in the given order (fixed inputs dropped)."""
        idx = [self.input_names.index(q) for q in varied]
        return self.A[idx]

    def restricted_rank(self, varied: list[str]) -> int:
        idx = [self.input_names.index(q) for q in varied]
        return rational_rank([self.A_exact[i] for i in idx])


def log_ridge_matrix(pi: PiGroupSet) -> LogRidgeMatrix:
    """A = [v | U]; the law is a ridge function of log inputs along col(A)."""
    exact = [[vi, *row] for vi, row in zip(pi.v, pi.U)]
    if rational_rank(transpose(exact)) != pi.n + 1:
        raise RuntimeError("log-ridge matrix is rank deficient; v lies in null(D)?")
    A = np.array([[float(x) for x in row] for row in exact], dtype=float).reshape(pi.m, pi.n + 1)
    return LogRidgeMatrix(A, exact, tuple(pi.input_names))


def _orth(M: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if M.size == 0:
        return M
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > tol * max(s[0], 1e-300)))
    return U[:, :r]


@dataclass(frozen=True)
class ConsistencyReport:
    numerical_rank: int
    restricted_rank: int
    rank_bound_holds: bool
    containment_distance: float
    contained: bool

    @property
    def passed(self) -> bool:
        return bool(self.rank_bound_holds and self.contained)

    def to_dict(self) -> dict:
        return {
            "numerical_rank_of_C": self.numerical_rank,
            "log_ridge_rank": self.restricted_rank,
            "rank_bound_holds": self.rank_bound_holds,
            "containment_distance": self.containment_distance,
            "contained": self.contained,
            "passed": self.passed,
        }


def consistency_check(spectrum: Spectrum, A_restricted: np.ndarray, space: ParameterSpace | None = None,
                      zero_tol: float = 1e-10, containment_tol: float = 1e-6) -> ConsistencyReport:
    """Check the active subspace against the column space of the log-ridge matrix.

    Eigenvectors live in normalized coordinates; component i is divided by the
    half-width of parameter i's log range to express the subspace in log
    coordinates before comparing with col(A_restricted).
    """
    A = np.asarray(A_restricted, dtype=float)
    if A.shape[0] != spectrum.m:
        raise ValueError(f"A_restricted has {A.shape[0]} rows, spectrum has m = {spectrum.m}")
    QA = _orth(A)
    r_A = QA.shape[1]
    k = spectrum.numerical_rank(zero_tol)
    W = spectrum.eigenvectors[:, :k]
    if space is not None:
        W = W / space.half_width[:, None]
    Wlog = _orth(W)
    if k == 0:
        dist = 0.0
    else:
        proj = QA @ (QA.T @ Wlog)
        Qp = _orth(proj)
        dist = 1.0 if Qp.shape[1] < Wlog.shape[1] else subspace_distance(Wlog, Qp)
    return ConsistencyReport(k, r_A, bool(k <= r_A), float(dist), bool(dist < containment_tol))


# ---------------------------------------------------------------------------
# SVG scatter

# 16-step ramp from dark blue through teal and yellow; index = floor(16 * (f - min) / spread)
RAMP = ("#30123b", "#3e378f", "#4659c9", "#467bf0", "#3b9bfe", "#22b9e5", "#1ad1c4", "#2de39a",
        "#5ff06d", "#95f843", "#c1f334", "#e2dc38", "#f8bb36", "#fe9029", "#f0621b", "#d23a0d")


def _ticks(lo: float, hi: float) -> list[float]:
    return list(np.linspace(lo, hi, 5))


def scatter_svg(summary: SummaryData, title: str = "", width: int = 480, height: int = 400) -> str:
    """Static SVG: y1 vs f for 1-D summaries, y1 vs y2 colored by f for 2-D."""
    margin_l, margin_r, margin_t, margin_b = 70, 20 + (60 if summary.n >= 2 else 0), 30, 50
    pw, ph = width - margin_l - margin_r, height - margin_t - margin_b
    xs = summary.y[:, 0]
    ys = summary.y[:, 1] if summary.n >= 2 else summary.f
    ylabel = "y2" if summary.n >= 2 else "f"

    def scale(v, lo, hi, size):
        return (v - lo) / (hi - lo) * size if hi > lo else np.full_like(v, size / 2)

    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    px = margin_l + scale(xs, x0, x1, pw)
    py = margin_t + ph - scale(ys, y0, y1, ph)
    f0, f1 = float(summary.f.min()), float(summary.f.max())
    out = io.StringIO()
    out.write('<?xml version="1.0" encoding="UTF-8"?>\n')
    out.write("<!-- piactive summary plot. ")
    if summary.n >= 2:
        out.write("Color ramp: 16 steps, step index = min(15, floor(16 * (f - fmin) / (fmax - fmin))), "
                  "colors " + " ".join(RAMP) + ". ")
    out.write(f"fmin={f0!r} fmax={f1!r} -->\n")
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
              f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n')
    out.write(f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n')
    if title:
        out.write(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{html.escape(title)}</text>\n')
    out.write(f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>\n')
    for t in _ticks(x0, x1):
        tx = margin_l + float(scale(np.array(t), x0, x1, pw))
        out.write(f'<text x="{tx:.1f}" y="{margin_t + ph + 15}" text-anchor="middle">{t:.3g}</text>\n')
    for t in _ticks(y0, y1):
        ty = margin_t + ph - float(scale(np.array(t), y0, y1, ph))
        out.write(f'<text x="{margin_l - 5}" y="{ty + 4:.1f}" text-anchor="end">{t:.3g}</text>\n')
    out.write(f'<text x="{margin_l + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">y1</text>\n')
    out.write(f'<text x="15" y="{margin_t + ph / 2:.1f}" text-anchor="middle" '
              f'transform="rotate(-90 15 {margin_t + ph / 2:.1f})">{ylabel}</text>\n')
    if summary.n >= 2:
        idx = np.minimum(15, np.floor(16 * scale(summary.f, f0, f1, 1.0)).astype(int))
        colors = [RAMP[i] for i in idx]
    else:
        colors = ["#1f4e9c"] * len(xs)
    for cx, cy, c in zip(px, py, colors):
        out.write(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2.5" fill="{c}" fill-opacity="0.8"/>\n')
    if summary.n >= 2:
        bx = width - margin_r + 15
        step = ph / 16
        for i, c in enumerate(RAMP):
            out.write(f'<rect x="{bx}" y="{margin_t + ph - (i + 1) * step:.2f}" width="14" '
                      f'height="{step + 0.5:.2f}" fill="{c}"/>\n')
        out.write(f'<text x="{bx}" y="{margin_t - 5}">{f1:.3g}</text>\n')
        out.write(f'<text x="{bx}" y="{margin_t + ph + 15}">{f0:.3g}</text>\n')
    out.write("</svg>\n")
    return out.getvalue()


def sensitivity_json(report: SensitivityReport) -> str:
    return json.dumps(report.to_dict(), indent=2)
