"""The R-type branching process hidden in an excursion of the embedded chain.

U_i counts, for one excursion from 0, the jumps from below level i that land
at i + r - 1 (type r). Given U_i = e_l the next generation at level i+1 is a
multinomial-geometric litter (plus the deterministic e_(l-1) when l >= 2),
so E(U_i) is a product of the mean matrices A_1 ... A_(i-1).
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from core.errors import NotAnExcursion
from core.linalg import a_product_row, entrance_distribution, matrix_A
from core.model import ProcessModel, rates_at

OffspringVector = Tuple[int, ...]


def _litter_law(model: ProcessModel, i: int) -> Tuple[np.ndarray, float]:
    row = rates_at(model, i)
    total = sum(row)
    return np.asarray(row[1:], dtype=float) / total, row[0] / total


def offspring_pmf_checked(model: ProcessModel, i: int, parent_type: int,
                          children: Sequence[int]) -> Tuple[float, bool]:
    """
    P(U_(i+1) = children | U_i = e_parent_type) and whether the children
    vector lies outside the support because the mandatory e_(l-1) is missing.
    """
    R = model.R
    if i < 1:
        raise ValueError(f"offspring law is defined for sites i >= 1, got {i}")
    if not 1 <= parent_type <= R:
        raise ValueError(f"parent type must be in 1..{R}, got {parent_type}")
    if len(children) != R or any(c < 0 for c in children):
        raise ValueError(f"children must be {R} nonnegative counts, got {tuple(children)}")

    u = list(children)
    if parent_type >= 2:
        if u[parent_type - 2] < 1:
            return 0.0, True
        u[parent_type - 2] -= 1

    p, q = _litter_law(model, i)
    log_prob = gammaln(sum(u) + 1) - sum(gammaln(c + 1) for c in u) + math.log(q)
    for count, pr in zip(u, p):
        if count == 0:
            continue
        if pr == 0.0:
            return 0.0, False
        log_prob += count * math.log(pr)
    return float(math.exp(log_prob)), False


def offspring_pmf(model: ProcessModel, i: int, parent_type: int, children: Sequence[int]) -> float:
    return offspring_pmf_checked(model, i, parent_type, children)[0]


def offspring_mean_row(model: ProcessModel, i: int, parent_type: int) -> List[float]:
    """Row parent_type of A_i: the mean litter of a type-l individual at level i."""
    if not 1 <= parent_type <= model.R:
        raise ValueError(f"parent type must be in 1..{model.R}, got {parent_type}")
    return matrix_A(model, i)[parent_type - 1].tolist()


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """All nonnegative integer vectors of length `parts` summing to `total`."""
    for bars in combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 1 - prev - 1)
        yield tuple(out)


def litter_cap(model: ProcessModel, i: int, tail_target: float = 1e-12) -> int:
    """Smallest m with P(litter size > m) * (m + 2 + 1/q) below tail_target."""
    _, q = _litter_law(model, i)
    m = 0
    while (1.0 - q) ** (m + 1) * (m + 2 + 1.0 / q) >= tail_target:
        m += 1
    return m


def composition_count(m: int, R: int) -> int:
    """Number of offspring vectors with litter size <= m, i.e. C(m + R, R)."""
    return math.comb(m + R, R)


def _mandatory_child(R: int, parent_type: int) -> np.ndarray:
    shift = np.zeros(R, dtype=int)
    if parent_type >= 2:
        shift[parent_type - 2] = 1
    return shift


def litter_summary(model: ProcessModel, i: int, parent_type: int,
                   tail_target: float = 1e-12) -> Tuple[float, List[float], int]:
    """
    Captured mass and mean of the offspring law over litters of size <= m.

    The litter size S has P(S = s) = q (1 - q)^s and, given S = s, the split
    is multinomial with mean s p / (1 - q), so both sums run over s alone.
    Returns (captured probability mass, mean vector, m).
    """
    if i < 1:
        raise ValueError(f"offspring law is defined for sites i >= 1, got {i}")
    if not 1 <= parent_type <= model.R:
        raise ValueError(f"parent type must be in 1..{model.R}, got {parent_type}")
    p, q = _litter_law(model, i)
    m = litter_cap(model, i, tail_target)
    sizes = np.arange(m + 1, dtype=float)
    weights = q * (1.0 - q) ** sizes
    mass = float(weights.sum())
    mean = mass * _mandatory_child(model.R, parent_type).astype(float)
    if q < 1.0:
        mean = mean + float(np.dot(sizes, weights)) * p / (1.0 - q)
    return mass, mean.tolist(), m


def enumerate_offspring(model: ProcessModel, i: int, parent_type: int,
                        tail_target: float = 1e-12,
                        max_terms: Optional[int] = None) -> Tuple[float, List[float], int]:
    """
    Truncated enumeration of the offspring law over every offspring vector
    with litter size <= m, one pmf evaluation each.

    Returns (captured probability mass, mean vector, m). The omitted litter
    sizes are geometric, so the captured mass is >= 1 - tail_target.

    Raises:
        ValueError: more than max_terms vectors would be visited.
    """
    R = model.R
    m = litter_cap(model, i, tail_target)
    if max_terms is not None and composition_count(m, R) > max_terms:
        raise ValueError(f"{composition_count(m, R)} offspring vectors exceed the limit of {max_terms}")
    shift = _mandatory_child(R, parent_type)

    mass = 0.0
    mean = np.zeros(R)
    for size in range(m + 1):
        for u in _compositions(size, R):
            children = np.asarray(u) + shift
            prob = offspring_pmf(model, i, parent_type, children.tolist())
            mass += prob
            mean += prob * children
    return mass, mean.tolist(), m


def expected_type_counts(model: ProcessModel, i: int) -> List[float]:
    """E(U_i) = e_1 A_1 ... A_(i-1) when U_1 = e_1."""
    return a_product_row(model, i).to_array().tolist()


def entrance_type_counts(model: ProcessModel, i: int) -> List[float]:
    """E(U_i) when U_1 = e_r with probability lambda_0^r / sum lambda_0."""
    return a_product_row(model, i, entrance_distribution(model)).to_array().tolist()


@dataclass
class CrossingCounts:
    R: int
    levels: List[List[int]] = field(default_factory=list)  # levels[i-1] = U_i

    def U(self, i: int) -> OffspringVector:
        if 1 <= i <= len(self.levels):
            return tuple(self.levels[i - 1])
        return (0,) * self.R

    def add(self, level: int, r: int) -> None:
        while len(self.levels) < level:
            self.levels.append([0] * self.R)
        self.levels[level - 1][r - 1] += 1


def count_crossings(path: Sequence[int], R: int) -> CrossingCounts:
    """
    U_(i,r) = #{0 < k < T : X_(k-1) < i, X_k = i + r - 1} for one excursion.

    An up-jump from x to y crosses every level x+1..y and lands as type
    y - i + 1 at level i. U_1 comes out as e_(X_1), i.e. e_1 when the first
    jump is +1.

    Raises:
        NotAnExcursion: the path does not start and end at 0, revisits 0 in
            between, or contains a step outside {-1, +1, ..., +R}.
    """
    if len(path) < 2 or path[0] != 0 or path[-1] != 0:
        raise NotAnExcursion("an excursion starts at 0 and ends at its first return to 0")
    if any(x == 0 for x in path[1:-1]):
        raise NotAnExcursion("the path revisits 0 before its last step")

    counts = CrossingCounts(R)
    for k in range(1, len(path)):
        prev, cur = path[k - 1], path[k]
        step = cur - prev
        if step != -1 and not 1 <= step <= R:
            raise NotAnExcursion(f"step {prev} -> {cur} at index {k} is not a legal jump")
        if k == len(path) - 1:
            break
        for level in range(prev + 1, cur + 1):
            counts.add(level, cur - level + 1)
    return counts


def occupation_identity_holds(path: Sequence[int], counts: CrossingCounts) -> bool:
    """Visits to i before return = U_(i,1) + U_(i+1) . 1 for every i >= 1."""
    visits = Counter(path[:-1])
    if visits[0] != 1:
        return False
    top = max(path)
    for i in range(1, top + 1):
        if visits[i] != counts.U(i)[0] + sum(counts.U(i + 1)):
            return False
    return True
