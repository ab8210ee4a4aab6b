"""Finite-state ground truth for the stationary formulas.

The infinite generator is cut at level N; upward jumps that would overshoot N
are lumped into N, so every truncated row stays conservative. The stationary
vector of the truncation is then a dense linear solve.
"""

import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np
import scipy.linalg
from loguru import logger

from core.errors import SingularSystem, TooSmall
from core.model import ProcessModel, embedded_transition, generator_row, total_rate
from core.models import ComparisonReport, ComparisonRow
from core.stationary import psi_stationary

NEGATIVE_CLAMP = 1e-12
NOISE_FLOOR = 1e-13


@dataclass(frozen=True)
class TruncatedGenerator:
    N: int
    matrix: np.ndarray
    boundary: str = "lump"

    def residual(self, psi: Sequence[float]) -> float:
        """||psi Q||_inf"""
        return float(np.max(np.abs(np.asarray(psi) @ self.matrix)))


def _check_level(model: ProcessModel, N: int) -> None:
    if N < model.R + 1:
        raise TooSmall(N, model.R + 1)


def truncate(model: ProcessModel, N: int) -> TruncatedGenerator:
    """Generator on {0..N}; rates into sites above N go to N."""
    _check_level(model, N)
    q = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        for j, rate in generator_row(model, i).entries.items():
            target = min(j, N)
            if target != i:
                q[i, target] += rate
        q[i, i] = -q[i].sum()
    return TruncatedGenerator(N, q)


def truncate_embedded(model: ProcessModel, N: int) -> np.ndarray:
    """Jump-chain transition matrix on {0..N}, overshoot lumped into N (a self-loop at N)."""
    _check_level(model, N)
    p = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        if i >= 1:
            p[i, i - 1] = embedded_transition(model, i, i - 1)
        for r in range(1, model.R + 1):
            p[i, min(i + r, N)] += embedded_transition(model, i, i + r)
    return p


def _solve_left_null(system: np.ndarray) -> np.ndarray:
    """x with x @ system = 0 and sum(x) = 1; the last equation is swapped for the normalization."""
    n = system.shape[0]
    a = system.T.copy()
    a[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        x = scipy.linalg.solve(a, rhs)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise SingularSystem(f"truncated system on {n} states is singular: {e}") from e
    if not np.all(np.isfinite(x)):
        raise SingularSystem(f"truncated system on {n} states produced non-finite values")
    if x.min() < -NEGATIVE_CLAMP:
        raise SingularSystem(f"stationary solve returned a negative entry {x.min():.3e}")
    return np.clip(x, 0.0, None)


def solve_stationary(q: TruncatedGenerator) -> List[float]:
    """psi Q = 0, sum psi = 1 on the truncated state space."""
    psi = _solve_left_null(q.matrix)
    logger.debug(f"Oracle solve N={q.N}: residual {q.residual(psi):.3e}")
    return psi.tolist()


def solve_embedded_stationary(model: ProcessModel, N: int) -> List[float]:
    """pi (P - I) = 0, sum pi = 1 for the truncated jump chain."""
    p = truncate_embedded(model, N)
    return _solve_left_null(p - np.eye(N + 1)).tolist()


def embedded_from_continuous(psi: Sequence[float], model: ProcessModel) -> List[float]:
    """pi_k proportional to psi_k times the total rate at k."""
    weighted = np.asarray(psi, dtype=float) * np.asarray([total_rate(model, k) for k in range(len(psi))])
    return (weighted / weighted.sum()).tolist()


def continuous_from_embedded(pi: Sequence[float], model: ProcessModel) -> List[float]:
    """psi_k proportional to pi_k divided by the total rate at k."""
    weighted = np.asarray(pi, dtype=float) / np.asarray([total_rate(model, k) for k in range(len(pi))])
    return (weighted / weighted.sum()).tolist()


def _distances(formula: Sequence[float], oracle: Sequence[float]) -> np.ndarray:
    return np.abs(np.asarray(formula) - np.asarray(oracle))


def compare(model: ProcessModel, N: int, kmax: Optional[int] = None,
            tol: Optional[float] = None) -> ComparisonReport:
    """
    Formula psi / pi against the truncated-generator solutions over 0..kmax.

    Raises:
        NotPositiveRecurrent: propagated from the stationary formulas.
        TooSmall: N < R + 1 or N < kmax.
    """
    start = time.time()
    q = truncate(model, N)
    stationary = psi_stationary(model, kmax=kmax, tol=tol)
    kmax = min(stationary.kmax, N) if kmax is None else kmax
    if kmax > N:
        raise TooSmall(N, kmax)

    psi_o = solve_stationary(q)
    pi_o = solve_embedded_stationary(model, N)
    psi_f = stationary.psi[: kmax + 1]
    pi_f = stationary.pi[: kmax + 1]

    psi_diff = _distances(psi_f, psi_o[: kmax + 1])
    pi_diff = _distances(pi_f, pi_o[: kmax + 1])
    rows = [
        ComparisonRow(k=k, psi_formula=psi_f[k], psi_oracle=psi_o[k], abs_diff=float(psi_diff[k]))
        for k in range(kmax + 1)
    ]
    report = ComparisonReport(
        N=N,
        kmax=kmax,
        rows=rows,
        sup_norm=float(psi_diff.max()),
        tv_distance=float(0.5 * psi_diff.sum()),
        pi_sup_norm=float(pi_diff.max()),
        pi_tv_distance=float(0.5 * pi_diff.sum()),
        oracle_residual=q.residual(psi_o),
    )
    logger.info(
        f"Oracle comparison N={N} kmax={kmax}: sup={report.sup_norm:.3e} "
        f"tv={report.tv_distance:.3e} pi_sup={report.pi_sup_norm:.3e} ({time.time() - start:.2f}s)"
    )
    return report


def is_monotone(reports: Sequence[ComparisonReport], floor: float = NOISE_FLOOR) -> bool:
    """Both sup-norms non-increasing in N, up to the noise floor."""
    for prev, cur in zip(reports, reports[1:]):
        if cur.sup_norm > prev.sup_norm + floor or cur.pi_sup_norm > prev.pi_sup_norm + floor:
            return False
    return True


def convergence_study(model: ProcessModel, Ns: Iterable[int] = (50, 100, 200, 400),
                      kmax: Optional[int] = None, tol: Optional[float] = None) -> List[ComparisonReport]:
    """One comparison per truncation level; logs a warning when the error is not monotone."""
    Ns = sorted(Ns)
    kmax = min(Ns) if kmax is None else kmax
    reports = [compare(model, N, kmax, tol) for N in Ns]
    if not is_monotone(reports):
        logger.warning(
            "Truncation error is not monotone in N: "
            + ", ".join(f"N={r.N}: {r.sup_norm:.3e}" for r in reports)
        )
    return reports
