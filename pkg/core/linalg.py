"""Small dense matrix layer: the site matrices M_i and A_i, scaled products and
the Perron root of nonnegative matrices.

Products of hundreds of site matrices overflow or underflow doubles, so every
ordered product is evaluated as a row (or column) vector that is renormalized
by an exact power of two after each step. The running exponent is carried in
a ScaledScalar.
"""

import math
import threading
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from config.settings import settings
from core.errors import NoConvergence
from core.model import ProcessModel, rates_at
from utils.cache import matrix_cache, trajectory_cache

SmallMatrix = np.ndarray


@dataclass(frozen=True)
class ScaledScalar:
    """A nonnegative value stored as mantissa * 2**exponent, mantissa in [1, 2) or 0."""
    mantissa: float
    exponent: int

    @classmethod
    def zero(cls) -> "ScaledScalar":
        return cls(0.0, 0)

    @classmethod
    def one(cls) -> "ScaledScalar":
        return cls(1.0, 0)

    @classmethod
    def from_parts(cls, value: float, exponent: int = 0) -> "ScaledScalar":
        """Normalize value * 2**exponent."""
        if value < 0 or not math.isfinite(value):
            raise ValueError(f"ScaledScalar holds finite nonnegative values, got {value!r}")
        if value == 0:
            return cls.zero()
        m, e = math.frexp(value)  # m in [0.5, 1)
        return cls(2.0 * m, exponent + e - 1)

    @classmethod
    def from_float(cls, value: float) -> "ScaledScalar":
        return cls.from_parts(value, 0)

    @property
    def is_zero(self) -> bool:
        return self.mantissa == 0.0

    def log2(self) -> float:
        if self.is_zero:
            return -math.inf
        return math.log2(self.mantissa) + self.exponent

    def __float__(self) -> float:
        try:
            return math.ldexp(self.mantissa, self.exponent)
        except OverflowError:
            return math.inf

    def __mul__(self, other: Union["ScaledScalar", float]) -> "ScaledScalar":
        if not isinstance(other, ScaledScalar):
            other = ScaledScalar.from_float(float(other))
        if self.is_zero or other.is_zero:
            return ScaledScalar.zero()
        return ScaledScalar.from_parts(self.mantissa * other.mantissa, self.exponent + other.exponent)

    __rmul__ = __mul__

    def __truediv__(self, other: Union["ScaledScalar", float]) -> "ScaledScalar":
        if not isinstance(other, ScaledScalar):
            other = ScaledScalar.from_float(float(other))
        if other.is_zero:
            raise ZeroDivisionError("division by a zero ScaledScalar")
        if self.is_zero:
            return ScaledScalar.zero()
        return ScaledScalar.from_parts(self.mantissa / other.mantissa, self.exponent - other.exponent)

    def __add__(self, other: Union["ScaledScalar", float]) -> "ScaledScalar":
        if not isinstance(other, ScaledScalar):
            other = ScaledScalar.from_float(float(other))
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        hi, lo = (self, other) if self.exponent >= other.exponent else (other, self)
        shifted = math.ldexp(lo.mantissa, lo.exponent - hi.exponent)
        return ScaledScalar.from_parts(hi.mantissa + shifted, hi.exponent)

    __radd__ = __add__

    def ratio(self, other: "ScaledScalar") -> float:
        """self / other as a plain float (both may be far outside double range)."""
        return float(self / other)

    def __lt__(self, other: "ScaledScalar") -> bool:
        return self.log2() < other.log2()

    def __le__(self, other: "ScaledScalar") -> bool:
        return self.log2() <= other.log2()


@dataclass(frozen=True)
class ScaledVector:
    """vector = 2**exponent * direction, with max(direction) in [1/2, 1) unless zero."""
    direction: np.ndarray
    exponent: int

    @classmethod
    def from_array(cls, values: Sequence[float], exponent: int = 0) -> "ScaledVector":
        arr = np.asarray(values, dtype=float)
        peak = float(arr.max()) if arr.size else 0.0
        if peak <= 0.0:
            return cls(np.zeros_like(arr), 0)
        _, e = math.frexp(peak)
        return cls(np.ldexp(arr, -e), exponent + e)

    @property
    def is_zero(self) -> bool:
        return not self.direction.any()

    @property
    def scale(self) -> ScaledScalar:
        if self.is_zero:
            return ScaledScalar.zero()
        return ScaledScalar(1.0, self.exponent)

    def row_step(self, m: SmallMatrix) -> "ScaledVector":
        """v -> v @ m"""
        return ScaledVector.from_array(self.direction @ m, self.exponent)

    def col_step(self, m: SmallMatrix) -> "ScaledVector":
        """c -> m @ c"""
        return ScaledVector.from_array(m @ self.direction, self.exponent)

    def component(self, k: int) -> ScaledScalar:
        return ScaledScalar.from_parts(float(self.direction[k]), self.exponent)

    def dot(self, w: Sequence[float]) -> ScaledScalar:
        return ScaledScalar.from_parts(float(self.direction @ np.asarray(w, dtype=float)), self.exponent)

    def to_array(self) -> np.ndarray:
        """Plain float copy; entries may underflow to 0 or overflow to inf."""
        with np.errstate(over="ignore"):
            return np.ldexp(self.direction, self.exponent)


# --- Site matrices ---

def _build_M(row: Sequence[float], R: int) -> SmallMatrix:
    mu = row[0]
    lam = np.asarray(row[1:], dtype=float)
    m = np.zeros((R, R))
    # a^k = (lambda^k + ... + lambda^R) / mu
    m[0, :] = np.cumsum(lam[::-1])[::-1] / mu
    for l in range(1, R):
        m[l, l - 1] = 1.0
    return m


def _build_A(row: Sequence[float], R: int) -> SmallMatrix:
    mu = row[0]
    b = np.asarray(row[1:], dtype=float) / mu
    a = np.tile(b, (R, 1))
    for l in range(1, R):
        a[l, l - 1] += 1.0
    return a


class SiteMatrices:
    """M_i and A_i for every distinct row of a model, indexed like rates_at."""

    def __init__(self, model: ProcessModel):
        self.prefix_len = model.prefix_len
        self.period = model.period
        R = model.R
        prefix = model.profile.prefix
        # slot 0 (site 0) has no matrix; mu_0 = 0
        self.M: List[Optional[SmallMatrix]] = [None] + [_build_M(r, R) for r in prefix[1:]]
        self.A: List[Optional[SmallMatrix]] = [None] + [_build_A(r, R) for r in prefix[1:]]
        self.tail_M = [_build_M(r, R) for r in model.tail_rows]
        self.tail_A = [_build_A(r, R) for r in model.tail_rows]

    def m(self, i: int) -> SmallMatrix:
        if i < self.prefix_len:
            return self.M[i]
        return self.tail_M[(i - self.prefix_len) % self.period]

    def a(self, i: int) -> SmallMatrix:
        if i < self.prefix_len:
            return self.A[i]
        return self.tail_A[(i - self.prefix_len) % self.period]


def site_matrices(model: ProcessModel) -> SiteMatrices:
    return matrix_cache.get_or_create(model, lambda: SiteMatrices(model))


def matrix_M(model: ProcessModel, i: int) -> SmallMatrix:
    """M_i: first row (a_i^1..a_i^R), ones on the subdiagonal."""
    if i < 1:
        raise ValueError(f"M_i is defined for i >= 1, got {i}")
    return site_matrices(model).m(i).copy()


def matrix_A(model: ProcessModel, i: int) -> SmallMatrix:
    """A_i: every row (b_i^1..b_i^R), plus 1 at (l, l-1) for l >= 2."""
    if i < 1:
        raise ValueError(f"A_i is defined for i >= 1, got {i}")
    return site_matrices(model).a(i).copy()


def unit_row(R: int, k: int = 0) -> np.ndarray:
    e = np.zeros(R)
    e[k] = 1.0
    return e


def lower_ones(R: int) -> SmallMatrix:
    """L with L_ij = 1 for i >= j; A_i L = L M_i for every site."""
    return np.tril(np.ones((R, R)))


def entrance_distribution(model: ProcessModel) -> np.ndarray:
    """Law of the first jump out of 0: (lambda_0^r / sum lambda_0)_r."""
    lam = np.asarray(model.profile.prefix[0][1:], dtype=float)
    return lam / lam.sum()


def entrance_vector(model: ProcessModel) -> np.ndarray:
    """s_k = sum_{l>=k} lambda_0^l / sum lambda_0; equals e_1 iff site 0 only jumps by one."""
    return entrance_distribution(model) @ lower_ones(model.R)


def ordered_product(model: ProcessModel, first: int, last: int) -> SmallMatrix:
    """M_first M_(first+1) ... M_last (identity when last < first)."""
    mats = site_matrices(model)
    out = np.eye(model.R)
    for i in range(first, last + 1):
        out = out @ mats.m(i)
    return out


# --- Scalar sequences ---

class PhiTrajectory:
    """phi_0, phi_1, ... for start @ M_1 ... M_n @ e_1^T, grown on demand."""

    def __init__(self, model: ProcessModel, start: np.ndarray):
        self._mats = site_matrices(model)
        self._state = ScaledVector.from_array(start)
        self.values: List[ScaledScalar] = [self._state.component(0)]
        self._lock = threading.Lock()

    def extend_to(self, n: int) -> List[ScaledScalar]:
        with self._lock:
            while len(self.values) <= n:
                site = len(self.values)
                self._state = self._state.row_step(self._mats.m(site))
                self.values.append(self._state.component(0))
            return self.values[: n + 1]


def _start_key(start: Optional[Sequence[float]], R: int) -> Tuple[float, ...]:
    if start is None:
        return tuple(unit_row(R))
    return tuple(float(x) for x in start)


def phi_trajectory(model: ProcessModel, n: int, start: Optional[Sequence[float]] = None) -> List[ScaledScalar]:
    """[phi_0, ..., phi_n] for the given start row (default e_1)."""
    key = _start_key(start, model.R)
    traj = trajectory_cache.get_or_create(
        (model, key), lambda: PhiTrajectory(model, np.asarray(key))
    )
    return traj.extend_to(n)


def phi_from(model: ProcessModel, start: Sequence[float], n: int) -> ScaledScalar:
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return phi_trajectory(model, n, start)[n]


def phi(model: ProcessModel, n: int) -> ScaledScalar:
    """phi_n = e_1 M_1 ... M_n e_1^T, with phi_0 = 1."""
    return phi_from(model, unit_row(model.R), n)


def window_values(model: ProcessModel, lo: int, b: int) -> List[ScaledScalar]:
    """
    [W(lo, b), W(lo+1, b), ..., W(b, b)] with W(j, b) = e_1 M_j ... M_(b-1) e_1^T.

    One right-to-left pass shares the suffix products across j.
    """
    if not 1 <= lo <= b:
        raise ValueError(f"need 1 <= lo <= b, got lo={lo}, b={b}")
    mats = site_matrices(model)
    col = ScaledVector.from_array(unit_row(model.R))
    out = [col.component(0)]
    for j in range(b - 1, lo - 1, -1):
        col = col.col_step(mats.m(j))
        out.append(col.component(0))
    out.reverse()
    return out


def phi_window(model: ProcessModel, j: int, b: int) -> ScaledScalar:
    if not 1 <= j <= b:
        raise ValueError(f"need 1 <= j <= b, got j={j}, b={b}")
    return window_values(model, j, b)[0]


def phi_right_to_left(model: ProcessModel, n: int) -> ScaledScalar:
    """phi_n evaluated as e_1 (M_1 (M_2 ... (M_n e_1^T)))."""
    return phi_window(model, 1, n + 1)


def a_product_row(model: ProcessModel, n: int, start: Optional[Sequence[float]] = None) -> ScaledVector:
    """start @ A_1 ... A_(n-1) (start defaults to e_1)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    mats = site_matrices(model)
    state = ScaledVector.from_array(unit_row(model.R) if start is None else start)
    for i in range(1, n):
        state = state.row_step(mats.a(i))
    return state


def a_product_mass(model: ProcessModel, n: int) -> ScaledScalar:
    """e_1 A_1 ... A_(n-1) 1."""
    return a_product_row(model, n).dot(np.ones(model.R))


# --- Perron root ---

def _quotient(m: SmallMatrix, x: np.ndarray) -> Tuple[float, np.ndarray]:
    y = m @ x
    peak = float(y.max())
    if peak <= 0.0:
        return 0.0, y
    return peak / float(x.max()), y / peak


def perron_pair(m: SmallMatrix, tol: Optional[float] = None,
                max_iter: Optional[int] = None) -> Tuple[float, np.ndarray]:
    """
    Dominant eigenvalue and right eigenvector of a nonnegative matrix by power
    iteration from the all-ones vector.

    Periodic matrices make the one-step quotient oscillate; the geometric mean
    of the last w quotients (w = 1..order) is tracked as well and whichever
    window settles first is accepted. When the settled vector is strictly
    positive the estimate is clamped into its Collatz-Wielandt bounds, and
    replaced by their midpoint once they agree to within tol.

    Raises:
        NoConvergence: no window settled within max_iter iterations.
    """
    tol = settings.TOL if tol is None else tol
    max_iter = settings.POWER_ITER_CAP if max_iter is None else max_iter
    m = np.asarray(m, dtype=float)
    order = m.shape[0]
    x = np.ones(order)
    logs: List[float] = []
    previous = [math.nan] * (order + 1)

    for it in range(1, max_iter + 1):
        q, x_next = _quotient(m, x)
        if q == 0.0:
            logger.debug(f"power iteration hit the zero vector after {it} steps; rho = 0")
            return 0.0, x
        x = x_next
        logs.append(math.log(q))
        if len(logs) > order:
            logs.pop(0)
        for w in range(1, min(order, len(logs)) + 1):
            est = math.exp(sum(logs[-w:]) / w)
            if abs(est - previous[w]) <= tol * est:
                logger.debug(f"power iteration converged in {it} steps (window {w}): rho={est:.15g}")
                if w > 1:
                    # average the oscillating iterates into a fixed vector
                    acc = x.copy()
                    y = x
                    for _ in range(w - 1):
                        y = m @ y / est
                        acc += y
                    x = acc / float(acc.max())
                if x.min() > 0.0:
                    low, high = collatz_wielandt_bounds(m, x)
                    est = 0.5 * (low + high) if high - low <= tol * high else min(max(est, low), high)
                return est, x
            previous[w] = est

    raise NoConvergence(max_iter)


def spectral_radius(m: SmallMatrix, tol: Optional[float] = None,
                    max_iter: Optional[int] = None) -> float:
    return perron_pair(m, tol, max_iter)[0]


def collatz_wielandt_bounds(m: SmallMatrix, h: np.ndarray) -> Tuple[float, float]:
    """min_i and max_i of (m h)_i / h_i for h > 0; the Perron root of m lies between them."""
    h = np.asarray(h, dtype=float)
    if h.min() <= 0.0:
        raise ValueError("Collatz-Wielandt bound needs a strictly positive vector")
    ratios = (np.asarray(m, dtype=float) @ h) / h
    return float(ratios.min()), float(ratios.max())


def collatz_wielandt_upper(m: SmallMatrix, h: np.ndarray) -> float:
    """max_i (m h)_i / h_i for h > 0; then m h <= rho_plus * h and rho(m) <= rho_plus."""
    return collatz_wielandt_bounds(m, h)[1]
