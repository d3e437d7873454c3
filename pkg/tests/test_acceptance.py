"""Acceptance criteria, one check per criterion at its stated tolerance.

Each check returns ``(passed, detail)``. Under pytest the verdicts are printed
as one line per criterion in the terminal summary; ``python tests/test_acceptance.py``
prints the same lines without pytest.
"""

from __future__ import annotations

import functools
import time
from fractions import Fraction as F

import numpy as np
import pytest

from piactive import diagnostics as dg
from piactive.models import (
    HartmannModel, RidgeModel, bundled_path, characteristic_field, dimensionless_b_ind, dimensionless_u_avg,
    gradient_check, hartmann_b_ind, hartmann_space, hartmann_u_avg, magnetic_reynolds, mhd_pi_values,
)
from piactive.subspace import (
    activity_identity_check, bootstrap_spectrum, eigendecompose, estimate_c_monte_carlo, estimate_c_quadrature,
    rng_for, sample_count_heuristic, select_dimension, subspace_distance,
)
from piactive.units import QuantitySystem, same_span, transpose

RESULTS: dict[str, tuple[bool, str]] = {}
QOIS = ("u_avg", "b_ind")
SYSTEMS = {"u_avg": "mhd_u_avg.json", "b_ind": "mhd_b_ind.json"}
RHO = 1


@functools.lru_cache(maxsize=None)
def quadrature_run(qoi: str, points: int = 11):
    model = HartmannModel(qoi)
    start = time.perf_counter()
    est, grid = estimate_c_quadrature(model, points_per_dim=points, workers=1, return_gradients=True)
    elapsed = time.perf_counter() - start
    return model, est, grid, eigendecompose(est), elapsed


def record(key: str, passed: bool, detail: str):
    RESULTS[key] = (bool(passed), detail)
    return bool(passed), detail


# --- checks -------------------------------------------------------------------------


def criterion_1():
    reference = transpose([[1, 1, -1, 1, 0, 0, 0], [1, 0, F(-1, 2), 0, 0, F(-1, 2), 1], [0, -2, 0, -1, 1, 0, 0]])
    start = time.perf_counter()
    pi = QuantitySystem.load(bundled_path("mhd_u_avg.json")).pi_groups()
    ok_span = same_span(pi.U, reference)
    elapsed = time.perf_counter() - start
    return record("1", pi.n == 3 and ok_span and elapsed < 1.0,
                  f"n={pi.n}, span equal={ok_span}, {elapsed:.3f}s")


def _spectrum_structure(qoi):
    model, est, _, spec, elapsed = quadrature_run(qoi)
    lam = spec.eigenvalues
    ratios = lam[2:] / lam[0]
    n = select_dimension(spec).n
    ok = bool(np.all(np.abs(ratios) < 1e-10)) and n == 2 and est.meta["points"] == 161051 and elapsed < 60
    return ok, f"lam3..5/lam1 max {np.abs(ratios).max():.1e}, n={n}, {elapsed:.2f}s"


def criterion_2():
    return record("2", *_spectrum_structure("u_avg"))


def criterion_3():
    return record("3", *_spectrum_structure("b_ind"))


def criterion_4():
    worst_vec, worst_score = 0.0, 0.0
    for qoi in QOIS:
        _, _, _, spec, _ = quadrature_run(qoi)
        worst_vec = max(worst_vec, float(np.abs(spec.eigenvectors[RHO, :2]).max()))
        worst_score = max(worst_score, float(dg.eigenvector_sensitivities(spec, 2).scores[RHO]))
    return record("4", worst_vec < 1e-12 and worst_score < 1e-12,
                  f"max |w_rho| {worst_vec:.1e}, max rho score {worst_score:.1e}")


def criterion_5():
    parts, ok = [], True
    for qoi in QOIS:
        model, _, _, spec, _ = quadrature_run(qoi)
        lr = dg.log_ridge_matrix(QuantitySystem.load(bundled_path(SYSTEMS[qoi])).pi_groups())
        rep = dg.consistency_check(spec, lr.restrict(list(model.space.quantities)), model.space)
        ok &= rep.numerical_rank <= 4 and rep.restricted_rank <= 4 and rep.containment_distance < 1e-6
        parts.append(f"{qoi}: rank {rep.numerical_rank}<={rep.restricted_rank}, dist {rep.containment_distance:.1e}")
    return record("5", ok, "; ".join(parts))


def criterion_6(qoi):
    lam11 = quadrature_run(qoi, 11)[3].eigenvalues[:2]
    lam13 = quadrature_run(qoi, 13)[3].eigenvalues[:2]
    rel = np.abs(lam11 - lam13) / np.abs(lam13)
    return record(f"6[{qoi}]", bool(np.all(rel <= 5e-10)),
                  f"relative differences {', '.join(f'{r:.1e}' for r in rel)} (need <= 5e-10)")


def criterion_7():
    parts, ok = [], True
    for qoi in QOIS:
        model = HartmannModel(qoi)
        gc = gradient_check(model, model.space.sample(rng_for(0, 6), 100), h=1e-6)
        ok &= gc.max_rel_error < 1e-6
        parts.append(f"{qoi} {gc.max_rel_error:.1e}")
    return record("7", ok, ", ".join(parts))


def criterion_8():
    parts, ok = [], True
    for qoi in QOIS:
        model, _, grid, spec, _ = quadrature_run(qoi)
        rep = activity_identity_check(model, None, spec, 2, 11, gradients=grid)
        ok &= rep.passed(1e-10)
        parts.append(f"{qoi} {rep.active_residual:.1e}/{rep.inactive_residual:.1e}")
    return record("8", ok, ", ".join(parts))


def criterion_9():
    M = sample_count_heuristic(2, 5, 10)
    rng = np.random.default_rng(2024)
    a = rng.standard_normal(5)
    A = rng.standard_normal((5, 2))
    est, _ = estimate_c_monte_carlo(RidgeModel(a, "exp"), M=M, seed=0)
    d1 = subspace_distance(eigendecompose(est).eigenvectors[:, :1], (a / np.linalg.norm(a))[:, None])
    qA, _ = np.linalg.qr(A)
    d2 = 0.0
    for seed in range(20):
        est, _ = estimate_c_monte_carlo(RidgeModel(A, "sin"), M=M, seed=seed)
        d2 = max(d2, subspace_distance(eigendecompose(est).eigenvectors[:, :2], qA))
    return record("9", M == 33 and d1 < 1e-8 and d2 < 1e-6, f"M={M}, rank-1 {d1:.1e}, rank-2 worst {d2:.1e}")


def criterion_10():
    space = hartmann_space()
    mu, rho, dpdx, eta, B0 = space.to_physical(space.sample(rng_for(10, 0), 100)).T
    v = rng_for(10, 1).uniform(0.1, 10.0, 100)
    re, ha, dp = mhd_pi_values(mu, rho, dpdx, eta, B0, v=v)
    err_u = np.abs(v * dimensionless_u_avg(re, ha, dp) / hartmann_u_avg(mu, rho, dpdx, eta, B0) - 1).max()
    star = dimensionless_b_ind(re, ha, dp, magnetic_reynolds(1.0, v, 1.0, eta))
    ratio = hartmann_b_ind(mu, rho, dpdx, eta, B0) / (characteristic_field(mu, eta) * star)
    err_b = np.abs(ratio / ratio[0] - 1).max()
    return record("10", err_u < 1e-12 and err_b < 1e-12,
                  f"u_avg {err_u:.1e}, B_ind constant {ratio[0]:.15g} spread {err_b:.1e}")


def _lam1_width(M, seed):
    model = RidgeModel(np.array([[1.0, 0.0], [0.3, 1.0], [0.0, 0.5], [0.2, 0.0], [0.0, 0.1]]), "sin")
    _, samples = estimate_c_monte_carlo(model, M=M, seed=seed)
    boot = bootstrap_spectrum(samples, 500, seed=seed)
    return boot.eig_upper[0] - boot.eig_lower[0], boot


def criterion_11():
    _, first = _lam1_width(483, 7)
    _, again = _lam1_width(483, 7)
    identical = np.array_equal(first.eigenvalues, again.eigenvalues) and first.to_dict() == again.to_dict()
    medians = [float(np.median([_lam1_width(M, s)[0] for s in range(5)])) for M in (50, 150, 483)]
    shrinking = medians[0] > medians[1] > medians[2]
    return record("11", identical and shrinking,
                  f"bit-identical={identical}, median lam1 widths {', '.join(f'{w:.3g}' for w in medians)}")


def criterion_12():
    model, _, _, spec, _ = quadrature_run("u_avg")
    sub = select_dimension(spec)
    s2 = dg.summary_2d(model, sub, count=1000, seed=0)
    disc, pairs = dg.functional_dependence(model, sub, s2, seed=0, radius=1e-6)
    rho_s = dg.spearman(dg.summary_1d(model, sub, count=1000, seed=0))
    return record("12", disc < 1e-4 and pairs > 0 and abs(rho_s) > 0.95,
                  f"2-D discrepancy {disc:.1e} over {pairs} pairs, Spearman {rho_s:.4f}")


CHECKS = [
    ("1", "Buckingham Pi reproduction", criterion_1),
    ("2", "u_avg spectrum", criterion_2),
    ("3", "B_ind spectrum", criterion_3),
    ("4", "density nullity", criterion_4),
    ("5", "upper-bound consistency", criterion_5),
    ("6[u_avg]", "quadrature stability, u_avg", functools.partial(criterion_6, "u_avg")),
    ("6[b_ind]", "quadrature stability, B_ind", functools.partial(criterion_6, "b_ind")),
    ("7", "gradient audit", criterion_7),
    ("8", "activity identity", criterion_8),
    ("9", "ridge recovery", criterion_9),
    ("10", "dimensional/dimensionless equivalence", criterion_10),
    ("11", "bootstrap determinism and shrinkage", criterion_11),
    ("12", "summary functional dependence", criterion_12),
]
TITLES = {key: title for key, title, _ in CHECKS}


@pytest.mark.parametrize("key,title,check", CHECKS, ids=[c[0] for c in CHECKS])
def test_criterion(key, title, check):
    passed, detail = check()
    assert passed, f"criterion {key} ({title}): {detail}"


def report_lines() -> list[str]:
    return [f"[{'PASS' if RESULTS[k][0] else 'FAIL'}] criterion {k:<8} {TITLES[k]}: {RESULTS[k][1]}"
            for k, _, _ in CHECKS if k in RESULTS]


if __name__ == "__main__":
    for _, _, check in CHECKS:
        check()
    print("\n".join(report_lines()))
