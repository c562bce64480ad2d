"""Frequency-matrix model for r-valued univariate EDAs.

The probabilistic model is an n x r row-stochastic matrix: row i is the
sampling distribution of position i over the values 0..r-1. Rows live on a
clamped simplex [lower, upper]^r with upper = 1 - lower*(r-1), and every
update is pushed back onto it by :func:`restrict_row`.

Individuals are plain integer arrays of length n with entries in [0..r-1].
Populations are (n, count) arrays whose columns are individuals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Row sums are validated to this tolerance on input.
ROW_SUM_TOL = 1e-9
# Restriction output must sum to 1 within this tolerance.
RESTRICT_SUM_TOL = 1e-12
# Equality tolerance when comparing frequencies against a border.
BORDER_TOL = 1e-12


@dataclass(frozen=True)
class Borders:
    """Clamp interval for the r frequencies of one row.

    The two borders are linked: ``upper = 1 - lower*(r-1)``, so a fully
    converged row (upper, lower, ..., lower) still sums to 1. ``lower = 0``
    (hence ``upper = 1``) is the margin-free mode in which frequencies may
    absorb at 0 or 1.
    """

    lower: float
    upper: float
    r: int

    def __post_init__(self) -> None:
        if self.r < 2:
            raise ValueError(f"r must be at least 2, got {self.r}")
        if self.lower < 0.0:
            raise ValueError(f"lower border must be >= 0, got {self.lower}")
        if self.lower * self.r >= 1.0:
            raise ValueError(
                f"lower border {self.lower} is too large for r={self.r}: "
                f"lower * r must stay strictly below 1"
            )
        expected = 1.0 - self.lower * (self.r - 1)
        if abs(self.upper - expected) > BORDER_TOL:
            raise ValueError(
                f"upper border must equal 1 - lower*(r-1) = {expected!r}, "
                f"got {self.upper!r}"
            )
        # lower*r < 1 and the coupling above force lower <= 1/r <= upper
        assert self.lower <= 1.0 / self.r <= self.upper + BORDER_TOL

    @property
    def with_margins(self) -> bool:
        return self.lower > 0.0

    @property
    def margin_mode(self) -> str:
        return "with_margins" if self.with_margins else "without_margins"


def default_borders(n: int, r: int) -> Borders:
    """Standard margins for dimension n: lower 1/((r-1)n), upper 1 - 1/n.

    Rejects n < 2; the n=1 interval collapses. Degenerate combinations
    where lower * r reaches 1 (such as n=2, r=2) are rejected by
    :class:`Borders`.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2 for margined borders, got {n}")
    if r < 2:
        raise ValueError(f"r must be at least 2, got {r}")
    return Borders(lower=1.0 / ((r - 1) * n), upper=1.0 - 1.0 / n, r=r)


def no_margins(r: int) -> Borders:
    """Margin-free borders: frequencies may reach 0 and 1."""
    return Borders(lower=0.0, upper=1.0, r=r)


@dataclass
class FrequencyMatrix:
    """The n x r model; ``rows[i]`` is the distribution of position i."""

    rows: np.ndarray
    borders: Borders

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError(f"rows must be a 2-d array, got shape {rows.shape}")
        if rows.shape[0] < 1:
            raise ValueError("the model needs at least one position")
        if rows.shape[1] != self.borders.r:
            raise ValueError(
                f"rows have {rows.shape[1]} columns but borders expect r={self.borders.r}"
            )
        self.rows = rows
        self.validate()

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def r(self) -> int:
        return self.rows.shape[1]

    def validate(self) -> None:
        sums = self.rows.sum(axis=1)
        if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
            worst = int(np.abs(sums - 1.0).argmax())
            raise ValueError(
                f"row {worst} sums to {sums[worst]!r}, outside 1 +- {ROW_SUM_TOL}"
            )
        lo, hi = self.borders.lower, self.borders.upper
        if self.rows.min() < lo - BORDER_TOL or self.rows.max() > hi + BORDER_TOL:
            raise ValueError(
                f"entries must lie in [{lo}, {hi}], got range "
                f"[{self.rows.min()!r}, {self.rows.max()!r}]"
            )

    def copy(self) -> "FrequencyMatrix":
        return FrequencyMatrix(self.rows.copy(), self.borders)


def new_uniform(n: int, r: int, borders: Borders) -> FrequencyMatrix:
    """Fresh model with every frequency at 1/r."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if r < 2:
        raise ValueError(f"r must be at least 2, got {r}")
    if borders.r != r:
        raise ValueError(f"borders are for r={borders.r}, expected r={r}")
    return FrequencyMatrix(np.full((n, r), 1.0 / r), borders)


def restrict_matrix(updates: np.ndarray, borders: Borders) -> np.ndarray:
    """Push every row of ``updates`` back onto the clamped simplex.

    Each row is clamped entrywise to [lower, upper], then the mass above
    ``lower`` is rescaled by a common nonnegative factor so the row sums to
    1 again, and finally re-clamped. Rows that already lie inside the
    borders and sum to 1 within 1e-12 are returned bit-identically, which
    makes the operation exactly idempotent.

    Entries must be nonnegative (up to -1e-12 of noise, which is clipped)
    and each row must sum to 1 within 1e-9; both are asserted. A residual
    row-sum error in (1e-12, 1e-9] after the rescale is absorbed by the
    row's largest entry; anything larger aborts.
    """
    a, b, r = borders.lower, borders.upper, borders.r
    arr = np.array(updates, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.shape[1] != r:
        raise ValueError(f"expected shape (m, {r}), got {arr.shape}")

    if arr.min() < -1e-12:
        raise ValueError(
            f"pre-restriction entries must be nonnegative, got {arr.min()!r}"
        )
    np.clip(arr, 0.0, None, out=arr)
    sums = arr.sum(axis=1)
    if np.abs(sums - 1.0).max() > ROW_SUM_TOL:
        raise ValueError(
            f"pre-restriction rows must sum to 1 within {ROW_SUM_TOL}, "
            f"worst sum {sums[np.abs(sums - 1.0).argmax()]!r}"
        )

    clipped = np.clip(arr, a, b)
    # sum(clipped) >= 1 whenever the input sums to 1: if some entry exceeds
    # the upper border the other r-1 entries are raised to at least the
    # lower border, and upper + (r-1)*lower = 1; otherwise clamping only
    # adds mass. Hence the denominator stays positive and the scale <= 1.
    denom = clipped.sum(axis=1) - a * r
    assert denom.min() > 0.0, "restriction denominator vanished"
    scale = (1.0 - a * r) / denom
    out = (clipped - a) * scale[:, None] + a
    np.clip(out, a, b, out=out)

    inside = (
        ((arr >= a) & (arr <= b)).all(axis=1)
        & (np.abs(sums - 1.0) <= RESTRICT_SUM_TOL)
    )
    if inside.any():
        out[inside] = arr[inside]

    residual = 1.0 - out.sum(axis=1)
    needs_fix = np.abs(residual) > RESTRICT_SUM_TOL
    if needs_fix.any():
        assert np.abs(residual[needs_fix]).max() <= ROW_SUM_TOL, (
            "restriction accumulated more rounding error than the policy allows"
        )
        rows_ix = np.flatnonzero(needs_fix)
        cols_ix = out[rows_ix].argmax(axis=1)
        out[rows_ix, cols_ix] += residual[rows_ix]
    return out


def restrict_row(update: np.ndarray, borders: Borders) -> np.ndarray:
    """Restrict a single pre-restriction row; see :func:`restrict_matrix`."""
    row = np.asarray(update, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != borders.r:
        raise ValueError(f"expected a length-{borders.r} row, got shape {row.shape}")
    return restrict_matrix(row[None, :], borders)[0]


def check_individual(values: np.ndarray, n: int, r: int) -> None:
    """Validate one individual: length n, integer entries in [0..r-1]."""
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValueError(f"individual must have shape ({n},), got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"individual entries must be integers, got dtype {arr.dtype}")
    if arr.size and (arr.min() < 0 or arr.max() >= r):
        raise ValueError(f"individual entries must lie in [0..{r - 1}]")


def _row_cdfs(rows: np.ndarray) -> np.ndarray:
    cum = np.cumsum(rows, axis=1)
    # force an exact 1.0 tail so uniforms in [0, 1) can never fall past it
    cum[:, -1] = 1.0
    return cum


def sample_population(matrix: FrequencyMatrix, count: int, rng: np.random.Generator) -> np.ndarray:
    """Sample ``count`` individuals as the columns of an (n, count) array.

    Per position i, value j is drawn with probability ``rows[i, j]`` by
    inverse transform over the row's cumulative sums. The RNG budget is
    fixed and documented: n consecutive blocks of ``count`` uniforms, in
    position order. The dtype is the smallest unsigned type that holds r-1.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    cum = _row_cdfs(matrix.rows)
    pop = np.empty((matrix.n, count), dtype=np.min_scalar_type(matrix.r - 1))
    for i in range(matrix.n):
        u = rng.random(count)
        pop[i, :] = np.searchsorted(cum[i], u, side="right")
    return pop


def sample_individual(matrix: FrequencyMatrix, rng: np.random.Generator) -> np.ndarray:
    """Sample one individual, consuming exactly one uniform per position."""
    return sample_population(matrix, 1, rng)[:, 0]
