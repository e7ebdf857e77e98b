"""Built-in example kernels, true-TV envelopes and bound-comparison tables.

The two built-in chains are small perturbed matrices (4 and 5 states) with
a single tunable nonlinearity strength kappa; the comparison table puts
the exact propagated TV distances next to every bound curve so the
domination claims can be checked as data.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundConfig, BoundReport, full_report
from .chain import Distribution, PolynomialKernel, _flow_batch, stationary
from .errors import NmcError
from .rng import as_generator

EXAMPLE1_P = np.array([
    [0.4, 0.2, 0.2, 0.2],
    [0.3, 0.4, 0.2, 0.1],
    [0.2, 0.2, 0.4, 0.2],
    [0.2, 0.1, 0.2, 0.5],
])

EXAMPLE2_P = np.array([
    [0.4, 0.3, 0.1, 0.1, 0.1],
    [0.2, 0.4, 0.2, 0.1, 0.1],
    [0.1, 0.2, 0.4, 0.2, 0.1],
    [0.1, 0.1, 0.2, 0.4, 0.2],
    [0.1, 0.1, 0.1, 0.3, 0.4],
])

KAPPA_MAX = 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    example_id: int = 1
    kappa: float = 0.1
    trials: int = 1000
    steps: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.example_id not in (1, 2):
            raise ValueError("example_id must be 1 or 2")
        if not 0.0 <= self.kappa <= KAPPA_MAX:
            raise ValueError(f"kappa must lie in [0, {KAPPA_MAX}] for built-in examples")
        if self.trials < 1 or self.steps < 1:
            raise ValueError("trials and steps must be >= 1")


def builtin_example(example_id: int, kappa: float, printed_mu4_variant: bool = False) -> PolynomialKernel:
    """Degree-2 kernel for one of the two built-in perturbed chains.

    Example 1 (4 states) moves kappa*mu[0] of mass within row 0; example 2
    (5 states) boosts each diagonal by kappa*mu[x] at the expense of one
    neighbor.  Row 2 of example 2 as printed reads its nonlinear term from
    coordinate 3 rather than its own; that variant does not define a
    stochastic kernel (row sums drift by kappa*(mu[2]-mu[3])) and is kept
    only behind ``printed_mu4_variant`` for inspection.
    """
    if example_id == 1:
        C1 = EXAMPLE1_P.copy()
        C2 = np.zeros((4, 4))
        C2[0, 0] = -kappa
        C2[0, 2] = +kappa
        return PolynomialKernel((C1, C2))
    if example_id == 2:
        C1 = EXAMPLE2_P.copy()
        C2 = np.zeros((5, 5))
        for x in range(5):
            C2[x, x] = +kappa
        C2[0, 1] = -kappa
        C2[1, 2] = -kappa
        C2[2, 3] = -kappa
        C2[3, 4] = -kappa
        C2[4, 3] = -kappa
        coord = None
        if printed_mu4_variant:
            coord = np.tile(np.arange(5, dtype=np.intp)[:, None], (1, 5))
            coord[2, 3] = 3     # the printed entry reads mu[3] in row 2
        return PolynomialKernel((C1, C2), nl_coord=coord)
    raise ValueError("example_id must be 1 or 2")


@dataclass(frozen=True)
class EnvelopeResult:
    """Per-step min/mean/max of the true TV distance to the fixed point.

    Index t runs 0..steps; row 0 is the spread of the initial draws.
    """

    tv_min: np.ndarray
    tv_mean: np.ndarray
    tv_max: np.ndarray
    trials: int
    pi: Distribution


def tv_envelope(K: PolynomialKernel, trials: int, steps: int, rng,
                mu0_override: Distribution | None = None) -> EnvelopeResult:
    """Envelope of exact ||mu_n - pi||_TV over random initial distributions."""
    rng = as_generator(rng)
    pi = stationary(K).distribution
    if mu0_override is not None:
        starts = np.tile(mu0_override.probs, (trials, 1))
    else:
        draws = rng.standard_exponential((trials, K.p))
        starts = draws / draws.sum(axis=1, keepdims=True)
    flows = _flow_batch(K, starts, steps)                    # (steps+1, B, p)
    tv = np.abs(flows - pi.probs[None, None, :]).sum(axis=2)  # (steps+1, B)
    return EnvelopeResult(tv.min(axis=1), tv.mean(axis=1), tv.max(axis=1), trials, pi)


@dataclass
class ComparisonTable:
    """Plain rectangular table plus run metadata, ready for CSV export."""

    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)


def compare_bounds(K: PolynomialKernel, steps: int, config: BoundConfig | None = None,
                   rng=None, trials: int = 1000, seed: int | None = None) -> tuple[ComparisonTable, BoundReport]:
    """True-TV envelope next to every bound curve, one row per step n."""
    rng = as_generator(rng if rng is not None else seed)
    report = full_report(K, steps, config, rng, seed=seed)
    env = tv_envelope(K, trials, steps, rng)
    columns = ["n", "tv_min", "tv_mean", "tv_max",
               "md", "spectral", "combined_small_n", "combined_large_n"]
    rows = []
    for i in range(steps):
        n = i + 1
        rows.append([
            n,
            float(env.tv_min[n]), float(env.tv_mean[n]), float(env.tv_max[n]),
            float(report.curves["md"][i]), float(report.curves["spectral"][i]),
            float(report.curves["combined_small_n"][i]),
            float(report.curves["combined_large_n"][i]),
        ])
    table = ComparisonTable(columns, rows, metadata={"trials": trials, "seed": seed})
    return table, report


def _format_cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".15g")


def export_report(table: ComparisonTable, path) -> None:
    """Write a table as UTF-8 CSV: header row, 15-significant-digit values,
    LF endings.  Writes via a temp file so failures leave nothing behind."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"directory does not exist: {directory}")
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(table.columns) + "\n")
            for row in table.rows:
                fh.write(",".join(_format_cell(v) for v in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_report(path) -> ComparisonTable:
    """Inverse of export_report (numbers parsed back to float/int)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if not lines or not lines[0]:
        raise NmcError("empty report file")
    columns = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        cells = []
        for cell in line.split(","):
            try:
                cells.append(int(cell))
            except ValueError:
                try:
                    cells.append(float(cell))
                except ValueError:
                    cells.append(cell)
        rows.append(cells)
    return ComparisonTable(columns, rows)
