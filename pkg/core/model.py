"""Process definition: rate rows for every site, the rate bounds, generator rows
and the embedded-chain transition law.

A site i >= 0 carries a rate row (mu_i, lambda_i^1, ..., lambda_i^R). The chain
waits at i for an Exp(mu_i + sum_r lambda_i^r) time, then steps to i-1 with
rate mu_i or to i+r with rate lambda_i^r. Infinitely many sites are described
by a finite prefix followed by a constant or periodic tail.
"""

import math
from typing import Dict, List, Literal, Optional, Tuple

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from config.settings import settings
from core.errors import (
    BadRowLength,
    EmptyPrefix,
    InputError,
    Mu0NotZero,
    NegativeRate,
    ZeroDeathRate,
    ZeroTotalRate,
)

RateRow = Tuple[float, ...]


class TailRule(BaseModel):
    """How rows are generated for sites beyond the prefix.

    constant: `block` is empty (the last prefix row repeats) or holds the
    single row that repeats. periodic: site i >= len(prefix) uses
    block[(i - len(prefix)) % len(block)].
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["constant", "periodic"] = "constant"
    block: Tuple[RateRow, ...] = ()


class RateProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    R: int = Field(ge=1)
    prefix: Tuple[RateRow, ...]
    tail: TailRule = Field(default_factory=TailRule)


class ProcessModel(BaseModel):
    """Validated profile plus the total-rate bounds.

    inf_rate / sup_rate are the exact extremes of the total rate over all
    sites; kappa / bigK are those extremes widened by settings.RATE_MARGIN so
    that kappa < total rate < bigK holds strictly.
    """
    model_config = ConfigDict(frozen=True)

    profile: RateProfile
    kappa: float
    bigK: float
    inf_rate: float
    sup_rate: float

    @property
    def R(self) -> int:
        return self.profile.R

    @property
    def prefix_len(self) -> int:
        return len(self.profile.prefix)

    @property
    def tail_rows(self) -> Tuple[RateRow, ...]:
        tail = self.profile.tail
        if tail.block:
            return tail.block
        return (self.profile.prefix[-1],)

    @property
    def period(self) -> int:
        return len(self.tail_rows)


class GeneratorRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    site: int
    diagonal: float
    entries: Dict[int, float]  # off-diagonal column -> rate

    def as_dense(self, width: int) -> List[float]:
        row = [0.0] * width
        row[self.site] = self.diagonal
        for j, q in self.entries.items():
            row[j] += q
        return row


def _field_name(k: int) -> str:
    return "mu" if k == 0 else f"lambda{k}"


def _check_row(row: RateRow, R: int, site: int, where: str) -> None:
    if len(row) != R + 1:
        raise BadRowLength(where, R + 1, len(row))
    for k, value in enumerate(row):
        if not math.isfinite(value) or value < 0:
            raise NegativeRate(site, _field_name(k), value)


def _tail_sites(profile: RateProfile) -> List[Tuple[int, RateRow]]:
    """(first site using the row, row) for one tail period."""
    start = len(profile.prefix)
    rows = profile.tail.block or (profile.prefix[-1],)
    return [(start + offset, row) for offset, row in enumerate(rows)]


def build_model(profile: RateProfile, margin: Optional[float] = None) -> ProcessModel:
    """
    Validate a rate profile and compute the total-rate bounds.

    The bounds are taken over prefix rows plus one tail period, which covers
    every site because the tail is periodic.

    Raises:
        EmptyPrefix, BadRowLength, NegativeRate, Mu0NotZero, ZeroDeathRate,
        ZeroTotalRate, InputError (malformed tail).
    """
    margin = settings.RATE_MARGIN if margin is None else margin
    if not profile.prefix:
        raise EmptyPrefix()

    R = profile.R
    tail = profile.tail
    if tail.kind == "periodic" and not tail.block:
        raise InputError("periodic tail needs a non-empty block")
    if tail.kind == "constant" and len(tail.block) > 1:
        raise InputError(f"constant tail takes at most one row, got {len(tail.block)}")

    for site, row in enumerate(profile.prefix):
        _check_row(row, R, site, f"prefix[{site}]")
    for offset, row in enumerate(tail.block):
        _check_row(row, R, len(profile.prefix) + offset, f"tail.block[{offset}]")

    if profile.prefix[0][0] != 0:
        raise Mu0NotZero(profile.prefix[0][0])

    sites = list(enumerate(profile.prefix)) + _tail_sites(profile)
    for site, row in sites:
        if site >= 1 and row[0] == 0:
            raise ZeroDeathRate(site)

    totals = [sum(row) for _, row in sites]
    for (site, _), total in zip(sites, totals):
        if total == 0:
            raise ZeroTotalRate(site)

    inf_rate, sup_rate = min(totals), max(totals)
    model = ProcessModel(
        profile=profile,
        kappa=inf_rate * (1.0 - margin),
        bigK=sup_rate * (1.0 + margin),
        inf_rate=inf_rate,
        sup_rate=sup_rate,
    )
    logger.debug(
        f"Built model R={R} prefix={len(profile.prefix)} tail={tail.kind}/{model.period} "
        f"total rate in [{inf_rate:.6g}, {sup_rate:.6g}]"
    )
    return model


def rates_at(model: ProcessModel, i: int) -> RateRow:
    """Rate row (mu_i, lambda_i^1..lambda_i^R) at site i."""
    if i < 0:
        raise ValueError(f"site index must be >= 0, got {i}")
    prefix = model.profile.prefix
    if i < len(prefix):
        return prefix[i]
    rows = model.tail_rows
    return rows[(i - len(prefix)) % len(rows)]


def total_rate(model: ProcessModel, i: int) -> float:
    return sum(rates_at(model, i))


def embedded_transition(model: ProcessModel, i: int, j: int) -> float:
    """One-step probability r_ij of the embedded jump chain."""
    row = rates_at(model, i)
    total = sum(row)
    if j == i - 1:
        return row[0] / total
    k = j - i
    if 1 <= k <= model.R:
        return row[k] / total
    return 0.0


def generator_row(model: ProcessModel, i: int) -> GeneratorRow:
    row = rates_at(model, i)
    entries: Dict[int, float] = {}
    if i >= 1:
        entries[i - 1] = row[0]
    for r in range(1, model.R + 1):
        entries[i + r] = row[r]
    return GeneratorRow(site=i, diagonal=-sum(row), entries=entries)
