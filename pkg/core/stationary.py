"""Closed-form quantities of the embedded chain and the continuous-time process:
exit and hitting probabilities, occupation means per excursion from 0, the
return times ET and E(eta), and the stationary laws pi (embedded) and psi
(continuous time).

Excursion quantities start from the entrance vector s of site 0
(s_k = sum_{l>=k} lambda_0^l / sum lambda_0) instead of e_1: the first
generation of the excursion is e_r with probability lambda_0^r / sum lambda_0.
When site 0 only jumps by +1, s = e_1 and every formula below reduces to
the e_1 M_1 ... M_(k-1) e_1^T form.
"""

from typing import List, Optional, Sequence

from loguru import logger

from config.settings import settings
from core.classify import classify, inverse_death_rate, rate_ratio, series_from, tail_spectrum
from core.errors import BadWindow, NotPositiveRecurrent
from core.linalg import ScaledScalar, entrance_vector, phi_trajectory, window_values
from core.model import ProcessModel, generator_row, rates_at
from core.models import ClassificationResult, SeriesResult, StationaryResult, Verdict


# --- Exit and hitting probabilities of the embedded chain ---

def _sum(values: Sequence[ScaledScalar]) -> ScaledScalar:
    total = ScaledScalar.zero()
    for v in values:
        total = total + v
    return total


def exit_up_probability(model: ProcessModel, a: int, b: int, k: int) -> float:
    """P(starting at k, the embedded chain leaves [a+1, b-1] into [b, inf))."""
    if not 0 <= a < k < b:
        raise BadWindow(f"need 0 <= a < k < b, got a={a}, k={k}, b={b}")
    w = window_values(model, a + 1, b)  # W(a+1, b) .. W(b, b)
    return _sum(w[: k - a]).ratio(_sum(w))


def exit_down_probability(model: ProcessModel, a: int, b: int, k: int) -> float:
    """P(starting at k, the embedded chain hits a before [b, inf)), from the complementary windows."""
    if not 0 <= a < k < b:
        raise BadWindow(f"need 0 <= a < k < b, got a={a}, k={k}, b={b}")
    w = window_values(model, a + 1, b)
    return _sum(w[k - a:]).ratio(_sum(w))


def hit_below_before(model: ProcessModel, k: int, b: int) -> float:
    """P(starting at k, the embedded chain hits k-1 before [b, inf))."""
    if not 1 <= k < b:
        raise BadWindow(f"need 1 <= k < b, got k={k}, b={b}")
    w = window_values(model, k, b)  # W(k, b) .. W(b, b) = 1
    return 1.0 - w[0].ratio(_sum(w))


# --- Excursion means ---

def _entrance_phi(model: ProcessModel, n: int) -> List[ScaledScalar]:
    """[s M_1 ... M_j e_1^T for j = 0..n]"""
    return phi_trajectory(model, n, entrance_vector(model))


def expected_occupation_embedded(model: ProcessModel, n: int) -> float:
    """Expected visits to n by the embedded chain before its first return to 0."""
    if n < 0:
        raise ValueError(f"site must be >= 0, got {n}")
    if n == 0:
        return 1.0
    row = rates_at(model, n)
    return sum(row) / row[0] * float(_entrance_phi(model, n - 1)[n - 1])


def expected_occupation_time(model: ProcessModel, n: int) -> float:
    """Expected time spent at n during one excursion from 0 (length eta)."""
    return expected_occupation_embedded(model, n) / sum(rates_at(model, n))


def nu_measure(model: ProcessModel, kmax: int) -> List[float]:
    """Unnormalized invariant measure nu_k, proportional to pi_k / (total rate at k)."""
    return [expected_occupation_time(model, k) for k in range(kmax + 1)]


def _require_positive_recurrent(model: ProcessModel, tol: Optional[float], n_max: Optional[int]) -> ClassificationResult:
    result = classify(model, tol, n_max)
    if result.verdict != Verdict.POSITIVE_RECURRENT:
        raise NotPositiveRecurrent(result.verdict.value)
    return result


def _series_tol(tol: Optional[float]) -> float:
    tol = settings.TOL if tol is None else tol
    return min(tol, settings.TAIL_MASS_TARGET)


def _eta_series(model: ProcessModel, tol: Optional[float], n_max: Optional[int]) -> SeriesResult:
    return series_from(model, entrance_vector(model), inverse_death_rate(model),
                       _series_tol(tol), n_max, spectrum=tail_spectrum(model, tol))


def _T_series(model: ProcessModel, tol: Optional[float], n_max: Optional[int]) -> SeriesResult:
    return series_from(model, entrance_vector(model), rate_ratio(model),
                       _series_tol(tol), n_max, spectrum=tail_spectrum(model, tol))


def embedded_return_time(model: ProcessModel, tol: Optional[float] = None, n_max: Optional[int] = None) -> float:
    """ET = 1 + sum_{n>=1} ((mu_n + sum lambda_n) / mu_n) s M_1 ... M_(n-1) e_1^T."""
    _require_positive_recurrent(model, tol, n_max)
    return 1.0 + _T_series(model, tol, n_max).value


def continuous_return_time(model: ProcessModel, tol: Optional[float] = None, n_max: Optional[int] = None) -> float:
    """E(eta) = (sum_r lambda_0^r)^-1 + sum_{n>=1} (1/mu_n) s M_1 ... M_(n-1) e_1^T."""
    _require_positive_recurrent(model, tol, n_max)
    return 1.0 / sum(rates_at(model, 0)) + _eta_series(model, tol, n_max).value


def _default_kmax(series: SeriesResult) -> int:
    return min(series.n_terms, settings.KMAX_CAP)


def _tail_mass(series: SeriesResult, head: float, normalizer: float) -> float:
    """Bound on the normalized mass of terms beyond the reported head."""
    return max(series.value + series.residual_bound - head, 0.0) / normalizer


def pi_embedded(model: ProcessModel, kmax: Optional[int] = None, tol: Optional[float] = None,
                n_max: Optional[int] = None) -> List[float]:
    """pi_0 = 1/ET, pi_k = ((mu_k + sum lambda_k)/mu_k) s M_1 ... M_(k-1) e_1^T / ET."""
    _require_positive_recurrent(model, tol, n_max)
    series = _T_series(model, tol, n_max)
    kmax = _default_kmax(series) if kmax is None else kmax
    ET = 1.0 + series.value
    return [expected_occupation_embedded(model, k) / ET for k in range(kmax + 1)]


def psi_stationary(model: ProcessModel, kmax: Optional[int] = None, tol: Optional[float] = None,
                   n_max: Optional[int] = None) -> StationaryResult:
    """
    Stationary distribution of the continuous-time process.

    psi_0 = (sum_r lambda_0^r)^-1 / D and psi_k = (1/mu_k) s M_1 ... M_(k-1) e_1^T / D,
    with D = E(eta). psi is reported with a bound on the mass beyond kmax
    rather than renormalized over 0..kmax.
    """
    classification = _require_positive_recurrent(model, tol, n_max)
    eta = _eta_series(model, tol, n_max)
    T = _T_series(model, tol, n_max)
    kmax = _default_kmax(eta) if kmax is None else kmax

    entry = 1.0 / sum(rates_at(model, 0))
    D = entry + eta.value
    ET = 1.0 + T.value

    phis = _entrance_phi(model, max(kmax - 1, 0))
    psi = [entry / D]
    pi = [1.0 / ET]
    head_eta = 0.0
    head_T = 0.0
    for k in range(1, kmax + 1):
        row = rates_at(model, k)
        phi_k = float(phis[k - 1])
        psi.append(phi_k / row[0] / D)
        pi.append(sum(row) / row[0] * phi_k / ET)
        head_eta += phi_k / row[0]
        head_T += sum(row) / row[0] * phi_k

    result = StationaryResult(
        psi=psi,
        pi=pi,
        ET=ET,
        Eeta=D,
        kmax=kmax,
        tail_mass_bound=_tail_mass(eta, head_eta, D),
        pi_tail_mass_bound=_tail_mass(T, head_T, ET),
        certified=eta.certified and T.certified and classification.verdict == Verdict.POSITIVE_RECURRENT,
    )
    logger.info(f"Stationary law to kmax={kmax}: E(eta)={D:.12g}, ET={ET:.12g}, tail mass <= {result.tail_mass_bound:.3e}")
    return result


def generator_residual(model: ProcessModel, psi: Sequence[float], k: int) -> float:
    """(psi Q)_k = sum_n psi_n q_(n,k); needs psi on max(0, k-R)..k+1."""
    if k + 1 >= len(psi):
        raise ValueError(f"psi must extend to site {k + 1}")
    total = psi[k] * generator_row(model, k).diagonal
    for n in range(max(0, k - model.R), k + 2):
        if n == k:
            continue
        total += psi[n] * generator_row(model, n).entries.get(k, 0.0)
    return total
