"""Finite-state distributions and polynomial nonlinear transition kernels.

A nonlinear chain here is one whose one-step matrix depends on the current
distribution through powers of the row coordinate's own mass:

    P_mu(x, y) = C1(x, y) + C2(x, y) * mu[x] + C3(x, y) * mu[x]**2 + ...

``C1`` is the linear part (an ordinary stochastic matrix); the higher
coefficient matrices encode the perturbation.  All state indices are
0-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    KernelInvalidError,
    ModelSpecError,
    NonconvergenceError,
)
from .rng import as_generator

SUM_TOL = 1e-12          # distribution / row-sum drift allowed at construction
EVAL_TOL = 1e-9          # kernel evaluation validity tolerance
_NEG_CLIP = 1e-15        # float noise clipped to zero by producers


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Distribution:
    """Probability vector on p >= 2 states."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.shape[0] < 2:
            raise DimensionMismatchError("distribution needs a 1-d vector with p >= 2")
        if not np.all(np.isfinite(probs)):
            raise ValueError("distribution entries must be finite")
        if probs.min() < 0.0:
            raise ValueError(f"negative probability {probs.min():.3e}")
        if abs(probs.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", _freeze(probs))

    @property
    def p(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def uniform(cls, p: int) -> "Distribution":
        return cls(np.full(p, 1.0 / p))

    @classmethod
    def point(cls, p: int, state: int) -> "Distribution":
        v = np.zeros(p)
        v[state] = 1.0
        return cls(v)


def _clean_probs(vec: np.ndarray) -> Distribution:
    """Build a Distribution from a vector carrying only float-level drift."""
    v = np.asarray(vec, dtype=np.float64)
    if v.min() < -_NEG_CLIP:
        raise ValueError(f"entry {v.min():.3e} too negative to be rounding noise")
    v = np.clip(v, 0.0, None)
    return Distribution(v / v.sum())


@dataclass(frozen=True)
class StochasticMatrix:
    """Row-stochastic p x p matrix."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise DimensionMismatchError("transition matrix must be square with p >= 2")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        if m.min() < 0.0 or m.max() > 1.0:
            raise ValueError("matrix entries must lie in [0, 1]")
        dev = np.abs(m.sum(axis=1) - 1.0).max()
        if dev > SUM_TOL:
            raise ValueError(f"row sums deviate from 1 by {dev:.3e}")
        object.__setattr__(self, "entries", _freeze(m))

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    def row(self, x: int) -> Distribution:
        return _clean_probs(self.entries[x])


@dataclass(frozen=True)
class PolynomialKernel:
    """Distribution-dependent kernel P_mu(x,y) = sum_j coeff[j](x,y) * mu[x]**j.

    ``coeff[0]`` must be a valid stochastic matrix (the linear part).  The
    optional ``nl_coord`` table generalizes the nonlinear terms to read an
    arbitrary coordinate of mu per entry (``nl_coord[x, y]`` instead of
    ``x``); the default ``None`` means the standard row-coordinate form.
    """

    coeff: tuple
    nl_coord: np.ndarray | None = field(default=None)

    def __post_init__(self):
        mats = tuple(_freeze(np.asarray(c, dtype=np.float64)) for c in self.coeff)
        if not mats:
            raise ValueError("kernel needs at least the linear coefficient matrix")
        p = mats[0].shape[0]
        for c in mats:
            if c.shape != (p, p):
                raise DimensionMismatchError("all coefficient matrices must be p x p")
            if not np.all(np.isfinite(c)):
                raise ValueError("coefficient entries must be finite")
        StochasticMatrix(mats[0])  # validates the linear part
        object.__setattr__(self, "coeff", mats)
        if self.nl_coord is not None:
            tab = np.asarray(self.nl_coord, dtype=np.intp)
            if tab.shape != (p, p):
                raise DimensionMismatchError("nl_coord table must be p x p")
            if tab.min() < 0 or tab.max() >= p:
                raise ValueError("nl_coord entries must be valid state indices")
            tab = tab.copy()
            tab.flags.writeable = False
            object.__setattr__(self, "nl_coord", tab)

    @property
    def p(self) -> int:
        return self.coeff[0].shape[0]

    @property
    def degree(self) -> int:
        return len(self.coeff)

    @property
    def linear_part(self) -> StochasticMatrix:
        return StochasticMatrix(self.coeff[0])

    @classmethod
    def linear(cls, matrix) -> "PolynomialKernel":
        entries = matrix.entries if isinstance(matrix, StochasticMatrix) else matrix
        return cls((np.asarray(entries, dtype=np.float64),))


def tv_distance(a: Distribution, b: Distribution) -> float:
    """Total variation distance sum_x |a(x) - b(x)|, in [0, 2]."""
    if a.p != b.p:
        raise DimensionMismatchError(f"dimension mismatch: {a.p} vs {b.p}")
    return float(np.abs(a.probs - b.probs).sum())


def _evaluate_entries(K: PolynomialKernel, mu: np.ndarray) -> np.ndarray:
    """Raw evaluated matrix, no validity checks."""
    if K.nl_coord is None:
        base = mu[:, None]          # row x reads mu[x]
    else:
        base = mu[K.nl_coord]       # generalized per-entry coordinate
    out = K.coeff[0].copy()
    power = np.ones_like(out)
    for c in K.coeff[1:]:
        power = power * base
        out += c * power
    return out


def evaluate_kernel(K: PolynomialKernel, mu: Distribution) -> StochasticMatrix:
    """Evaluate P_mu; raises KernelInvalidError if the result is not stochastic."""
    if mu.p != K.p:
        raise DimensionMismatchError(f"dimension mismatch: kernel p={K.p}, mu p={mu.p}")
    m = _evaluate_entries(K, mu.probs)
    worst_neg = float(m.min())
    row_dev = float(np.abs(m.sum(axis=1) - 1.0).max())
    if worst_neg < -EVAL_TOL or row_dev > EVAL_TOL:
        raise KernelInvalidError(
            f"kernel invalid at mu: worst entry {worst_neg:.3e}, "
            f"row-sum deviation {row_dev:.3e}",
            mu=mu, worst_entry=worst_neg, worst_row_sum_dev=row_dev,
        )
    m = np.clip(m, 0.0, None)
    m /= m.sum(axis=1, keepdims=True)
    return StochasticMatrix(m)


@dataclass(frozen=True)
class KernelValidationReport:
    ok: bool
    worst_negative_entry: float
    worst_row_sum_dev: float
    points_checked: int
    witness: np.ndarray | None    # a mu violating validity, if any


def validate_kernel(K: PolynomialKernel, grid: int = 1000, seed: int = 0) -> KernelValidationReport:
    """Probe the kernel at simplex vertices, the barycenter and random points.

    Entries are polynomials in single coordinates of mu, so vertices plus a
    dense sample bound violations well for low degrees.
    """
    if grid < 1:
        raise ValueError("grid must be >= 1")
    p = K.p
    rng = as_generator(seed)
    points = [np.full(p, 1.0 / p)]
    points.extend(np.eye(p))
    draws = rng.standard_exponential((grid, p))
    points.extend(draws / draws.sum(axis=1, keepdims=True))
    worst_neg = np.inf
    worst_dev = 0.0
    witness = None
    for mu in points:
        m = _evaluate_entries(K, mu)
        neg = float(m.min())
        dev = float(np.abs(m.sum(axis=1) - 1.0).max())
        if neg < worst_neg:
            worst_neg = neg
        if dev > worst_dev:
            worst_dev = dev
        if witness is None and (neg < -EVAL_TOL or dev > EVAL_TOL):
            witness = mu.copy()
    ok = worst_neg >= -EVAL_TOL and worst_dev <= EVAL_TOL
    return KernelValidationReport(ok, worst_neg, worst_dev, len(points), witness)


def _flow(K: PolynomialKernel, mu0: np.ndarray, n: int) -> np.ndarray:
    """Exact distribution flow as an (n+1, p) array."""
    out = np.empty((n + 1, K.p))
    out[0] = mu0
    for t in range(n):
        m = evaluate_kernel(K, _clean_probs(out[t]))
        out[t + 1] = out[t] @ m.entries
    return out


def _flow_batch(K: PolynomialKernel, mu0s: np.ndarray, n: int) -> np.ndarray:
    """Flows for a batch of starts, shape (n+1, B, p).

    Vectorizes the per-step kernel evaluation across the batch; only valid
    kernels should reach this path (callers validate once up front).
    """
    B, p = mu0s.shape
    out = np.empty((n + 1, B, p))
    out[0] = mu0s
    coeff = K.coeff
    for t in range(n):
        mu = out[t]
        if K.nl_coord is None:
            base = mu[:, :, None]
        else:
            base = mu[:, K.nl_coord]
        m = np.broadcast_to(coeff[0], (B, p, p)).copy()
        power = np.ones_like(m)
        for c in coeff[1:]:
            power = power * base
            m += c * power
        if m.min() < -EVAL_TOL:
            raise KernelInvalidError(
                f"kernel invalid along batched flow at step {t}: entry {m.min():.3e}")
        np.clip(m, 0.0, None, out=m)
        m /= m.sum(axis=2, keepdims=True)
        out[t + 1] = np.einsum("bx,bxy->by", mu, m)
    return out


def propagate(K: PolynomialKernel, mu0: Distribution, n: int) -> list[Distribution]:
    """Exact flow mu_0, mu_1, ..., mu_n with mu_{t+1} = mu_t^T P_{mu_t}."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if mu0.p != K.p:
        raise DimensionMismatchError("mu0 dimension does not match the kernel")
    flow = _flow(K, mu0.probs, n)
    return [_clean_probs(row) for row in flow]


@dataclass(frozen=True)
class StationaryResult:
    distribution: Distribution
    iterations: int
    residual: float


def stationary(K: PolynomialKernel, tol: float = 1e-10, max_iter: int = 10**6) -> StationaryResult:
    """Fixed point of mu -> mu^T P_mu by iteration from the barycenter."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    mu = np.full(K.p, 1.0 / K.p)
    residual = np.inf
    for it in range(1, max_iter + 1):
        nxt = mu @ evaluate_kernel(K, _clean_probs(mu)).entries
        residual = float(np.abs(nxt - mu).sum())
        if residual <= tol:
            return StationaryResult(_clean_probs(mu), it, residual)
        mu = nxt
    raise NonconvergenceError(
        f"no fixed point within {max_iter} iterations (residual {residual:.3e})",
        last_iterate=_clean_probs(mu), residual=residual, iterations=max_iter,
    )


def sample_trajectory(K: PolynomialKernel, mu0: Distribution, n: int, rng) -> np.ndarray:
    """One observed trajectory X_0..X_n of the nonlinear chain.

    The chain's law is driven by the exact distribution flow: step t uses
    row X_t of P_{mu_t}.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = as_generator(rng)
    flow = _flow(K, mu0.probs, n)
    states = np.empty(n + 1, dtype=np.intp)
    states[0] = rng.choice(K.p, p=mu0.probs)
    for t in range(n):
        row = evaluate_kernel(K, _clean_probs(flow[t])).entries[states[t]]
        states[t + 1] = rng.choice(K.p, p=row)
    return states


def random_distribution(p: int, rng) -> Distribution:
    """Uniform (flat Dirichlet) sample from the p-simplex."""
    if p < 2:
        raise ValueError("p must be >= 2")
    rng = as_generator(rng)
    draws = rng.standard_exponential(p)
    return Distribution(draws / draws.sum())


# ---------------------------------------------------------------------------
# model-spec files

_MODEL_KEYS = {"p", "degree", "coeff"}


def _reject_constant(name):
    raise ModelSpecError(f"non-finite number {name!r} in model file")


def load_model(path) -> PolynomialKernel:
    """Read a kernel from a strict JSON model file.

    Schema: {"p": int, "degree": int, "coeff": [degree flat row-major
    p*p arrays]}.  Unknown keys and non-finite numbers are rejected.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise ModelSpecError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelSpecError("model file must contain a JSON object")
    extra = set(doc) - _MODEL_KEYS
    if extra:
        raise ModelSpecError(f"unknown keys in model file: {sorted(extra)}")
    missing = _MODEL_KEYS - set(doc)
    if missing:
        raise ModelSpecError(f"missing keys in model file: {sorted(missing)}")
    p, degree = doc["p"], doc["degree"]
    if not isinstance(p, int) or isinstance(p, bool) or p < 2:
        raise ModelSpecError("'p' must be an integer >= 2")
    if not isinstance(degree, int) or isinstance(degree, bool) or degree < 1:
        raise ModelSpecError("'degree' must be an integer >= 1")
    coeff = doc["coeff"]
    if not isinstance(coeff, list) or len(coeff) != degree:
        raise ModelSpecError("'coeff' must list exactly 'degree' matrices")
    mats = []
    for i, flat in enumerate(coeff):
        if not isinstance(flat, list) or len(flat) != p * p:
            raise ModelSpecError(f"coeff[{i}] must be a flat row-major array of {p * p} numbers")
        for v in flat:
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ModelSpecError(f"coeff[{i}] contains a non-numeric or non-finite entry")
        mats.append(np.asarray(flat, dtype=np.float64).reshape(p, p))
    try:
        return PolynomialKernel(tuple(mats))
    except (ValueError, DimensionMismatchError) as exc:
        raise ModelSpecError(f"model file is not a valid kernel: {exc}") from exc
