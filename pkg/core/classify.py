"""Recurrence classification from the two sufficient conditions:

  - e_1 M_1 ... M_n e_1^T -> 0            => recurrent
  - sum_n (1/mu_n) e_1 M_1 ... M_(n-1) e_1^T < inf => positive recurrent

Both conditions are only sufficient, so the result is never "transient";
anything the tail spectrum cannot settle is reported as inconclusive.
"""

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from loguru import logger

from config.settings import settings
from core.errors import Diverged
from core.linalg import (
    ScaledVector,
    collatz_wielandt_bounds,
    ordered_product,
    perron_pair,
    site_matrices,
    unit_row,
)
from core.model import ProcessModel, rates_at
from core.models import ClassificationResult, SeriesResult, Verdict

Weight = Callable[[int], float]


@dataclass(frozen=True)
class TailSpectrum:
    """Perron data of one tail period B = M_L ... M_(L+p-1), L = prefix length."""
    start_site: int
    period: int
    block: np.ndarray
    rho: float
    h: np.ndarray
    rho_upper: Optional[float]
    gammas: Optional[List[float]]
    rho_lower: Optional[float] = None

    @property
    def rho_per_step(self) -> float:
        return self.rho ** (1.0 / self.period)

    @property
    def certifiable(self) -> bool:
        return self.rho_upper is not None and self.rho_upper < 1.0


def tail_spectrum(model: ProcessModel, tol: Optional[float] = None) -> TailSpectrum:
    L, p = model.prefix_len, model.period
    block = ordered_product(model, L, L + p - 1)
    rho, h = perron_pair(block, tol)

    rho_lower = rho_upper = None
    gammas = None
    if rho > 0.0 and h.min() > 0.0:
        rho_lower, rho_upper = collatz_wielandt_bounds(block, h)
        mats = site_matrices(model)
        gammas = []
        partial = np.eye(model.R)
        e1 = unit_row(model.R)
        for j in range(p):
            col = partial @ e1
            gammas.append(float(np.max(col / h)))
            partial = partial @ mats.m(L + j)

    logger.debug(f"Tail spectrum: rho={rho:.12g} (period {p}), Collatz-Wielandt bounds=[{rho_lower}, {rho_upper}]")
    return TailSpectrum(L, p, block, rho, h, rho_upper, gammas, rho_lower)


def inverse_death_rate(model: ProcessModel) -> Weight:
    return lambda n: 1.0 / rates_at(model, n)[0]


def rate_ratio(model: ProcessModel) -> Weight:
    """(mu_n + sum_r lambda_n^r) / mu_n"""
    def weight(n: int) -> float:
        row = rates_at(model, n)
        return sum(row) / row[0]
    return weight


def _certified_tail(state: ScaledVector, spectrum: TailSpectrum, weights: Sequence[float]) -> float:
    """Upper bound on all terms from the period boundary represented by `state` on."""
    mass = float(state.dot(spectrum.h))
    per_period = sum(w * g for w, g in zip(weights, spectrum.gammas))
    return mass * per_period / (1.0 - spectrum.rho_upper)


def series_from(
    model: ProcessModel,
    start: Optional[Sequence[float]] = None,
    weight: Optional[Weight] = None,
    tol: Optional[float] = None,
    n_max: Optional[int] = None,
    spectrum: Optional[TailSpectrum] = None,
    raise_on_divergence: bool = True,
) -> SeriesResult:
    """
    sum_{n>=1} weight(n) * start M_1 ... M_(n-1) e_1^T with a bound on the remainder.

    Summation stops at the first tail-period boundary where the remainder bound
    is below tol relative to the partial sum, or at n_max. With a positive
    Perron vector h of the tail period and rho_plus = max (B h)_i / h_i < 1 the
    bound is rigorous; otherwise a geometric extrapolation of the last period
    is reported with certified=False.

    Raises:
        Diverged: the tail spectral radius exceeds 1 or the partial sum passes
            the overflow guard (unless raise_on_divergence is False).
    """
    tol = settings.TOL if tol is None else tol
    L, p = model.prefix_len, model.period
    n_max = settings.default_n_max(L, p) if n_max is None else n_max
    weight = weight or inverse_death_rate(model)
    spectrum = spectrum or tail_spectrum(model, tol)
    mats = site_matrices(model)

    state = ScaledVector.from_array(unit_row(model.R) if start is None else start)
    total = 0.0
    last_term = 0.0
    recent = deque(maxlen=p)
    best: Optional[SeriesResult] = None

    def result(value: float, residual: float, certified: bool, n: int, phi_log2: float) -> SeriesResult:
        return SeriesResult(
            value=value, residual_bound=residual, certified=certified,
            n_terms=n, last_term=last_term, rho_tail=spectrum.rho,
            last_phi_log2=phi_log2,
        )

    n = 0
    for n in range(1, n_max + 1):
        last_term = weight(n) * float(state.component(0))
        total += last_term
        recent.append(last_term)
        if total > settings.OVERFLOW_GUARD:
            if raise_on_divergence:
                raise Diverged(total, n)
            logger.warning(f"Partial sum passed the overflow guard at n={n}")
            return result(total, math.inf, False, n, state.component(0).log2())

        state = state.row_step(mats.m(n))
        if state.is_zero:
            return result(total, 0.0, True, n, -math.inf)

        at_boundary = n + 1 >= L and (n + 1 - L) % p == 0
        if not at_boundary:
            continue
        phi_log2 = state.component(0).log2()
        if spectrum.certifiable:
            bound = _certified_tail(state, spectrum, [weight(n + 1 + j) for j in range(p)])
            best = result(total, bound, True, n, phi_log2)
            if bound <= tol * total:
                return best
        elif spectrum.rho < 1.0 and n >= L + p - 1:
            bound = sum(recent) * spectrum.rho / (1.0 - spectrum.rho)
            best = result(total, bound, False, n, phi_log2)
            if bound <= tol * total:
                logger.warning(
                    f"Series remainder not certified (no positive Perron vector); "
                    f"geometric estimate {bound:.3e}"
                )
                return best

    if spectrum.rho > 1.0 + tol and raise_on_divergence:
        raise Diverged(total, n)
    if best is not None:
        if not best.certified:
            logger.warning(f"Series remainder not certified at n_max={n_max}; estimate {best.residual_bound:.3e}")
        return best
    logger.warning(f"No geometric certificate (rho_tail={spectrum.rho:.6g}); residual is the last term")
    return result(total, last_term, False, n, state.component(0).log2())


def series_S(model: ProcessModel, tol: Optional[float] = None, n_max: Optional[int] = None) -> SeriesResult:
    """sum_{n>=1} (1/mu_n) phi_(n-1), the positive-recurrence series."""
    return series_from(model, None, inverse_death_rate(model), tol, n_max)


def classify(model: ProcessModel, tol: Optional[float] = None, n_max: Optional[int] = None) -> ClassificationResult:
    tol = settings.TOL if tol is None else tol
    L, p = model.prefix_len, model.period
    n_max = settings.default_n_max(L, p) if n_max is None else n_max
    spectrum = tail_spectrum(model, tol)
    rho = spectrum.rho

    # Boundary and supercritical cases must see the whole horizon.
    series_tol = tol if rho < 1.0 - tol else 0.0
    series = series_from(
        model, None, inverse_death_rate(model), series_tol, n_max,
        spectrum=spectrum, raise_on_divergence=False,
    )
    if series.last_phi_log2 <= -1075:
        last_phi = 0.0
    elif series.last_phi_log2 >= 1024:
        last_phi = math.inf
    else:
        last_phi = 2.0 ** series.last_phi_log2

    notes: List[str] = []
    numerically_decided = False
    if rho < 1.0 - tol:
        verdict = Verdict.POSITIVE_RECURRENT
        recurrence_certified = True
        if not series.certified:
            notes.append("remainder bound is a geometric estimate, not a certificate")
    elif rho <= 1.0 + tol:
        numerically_decided = True
        recurrence_certified = False
        if last_phi < tol:
            verdict = Verdict.RECURRENT
            notes.append(f"rho_tail = 1 within tol; phi_n fell below {tol:g} by n={series.n_terms}")
        else:
            verdict = Verdict.INCONCLUSIVE
            notes.append(f"rho_tail = 1 within tol and phi_n = {last_phi:.6g} did not fall below {tol:g}")
    else:
        verdict = Verdict.INCONCLUSIVE
        recurrence_certified = False
        notes.append("rho_tail > 1: the available criteria are only sufficient; no transience claim is made")

    result = ClassificationResult(
        verdict=verdict,
        rho_tail=rho,
        rho_tail_lower=spectrum.rho_lower,
        rho_tail_upper=spectrum.rho_upper,
        rho_per_step=spectrum.rho_per_step,
        period=p,
        last_phi=last_phi,
        last_phi_log2=series.last_phi_log2,
        partial_sum=series.value,
        tail_bound=series.residual_bound,
        n_used=series.n_terms,
        certified=series.certified and verdict == Verdict.POSITIVE_RECURRENT,
        recurrence_certified=recurrence_certified,
        numerically_decided=numerically_decided,
        notes=notes,
    )
    logger.info(f"Classification: {verdict.value} (rho_tail={rho:.10g}, n={series.n_terms})")
    return result
