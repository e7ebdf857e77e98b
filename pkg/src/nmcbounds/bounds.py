"""Convergence-bound coefficients and per-step bound curves.

Everything a bound needs is a handful of scalars: the worst-case k-step
row overlap alpha_k, the kernel's sensitivity lambda_k to its distribution
argument, the perturbation ratio gamma between the linear part and the
nonlinear kernel, the fixed-point discrepancy delta, and the spectral
radius r of the coupling matrix.  The curve builders then evaluate the
classic Markov-Dobrushin bound, its k-step refinement, the spectral-radius
bound and the combined perturbation bound, all clamped to the TV range
[0, 2].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .chain import (
    Distribution,
    PolynomialKernel,
    StochasticMatrix,
    _clean_probs,
    _flow,
    evaluate_kernel,
    stationary,
    tv_distance,
)
from .coupling import build_coupling_matrix, spectral_radius
from .errors import InfiniteGammaError
from .rng import as_generator


@dataclass(frozen=True)
class CoefficientEstimate:
    """A scalar obtained by sampling, tagged with its one-sided direction.

    ``direction`` is "upper-of-inf" or "lower-of-sup": simplex sampling can
    only overshoot an infimum and undershoot a supremum.  ``exact`` marks
    values computed without sampling (finite enumeration).
    """

    value: float
    exact: bool
    direction: str
    samples: int = 0


def _alpha_of_matrix(P: np.ndarray, k: int) -> float:
    Pk = np.linalg.matrix_power(P, k)
    p = P.shape[0]
    best = 1.0
    for x in range(p):
        for xp in range(x + 1, p):
            best = min(best, float(np.minimum(Pk[x], Pk[xp]).sum()))
    return best


def _kstep_matrix(K: PolynomialKernel, mu0: np.ndarray, k: int) -> np.ndarray:
    """Product P_{mu_0} P_{mu_1} ... P_{mu_{k-1}} along the exact flow."""
    flow = _flow(K, mu0, k - 1) if k > 1 else mu0[None, :]
    out = np.eye(K.p)
    for t in range(k):
        out = out @ evaluate_kernel(K, _clean_probs(flow[t])).entries
    return out


def _sample_pairs(p: int, samples: int, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    """Vertex pairs plus random simplex pairs, as raw vectors."""
    pts = list(np.eye(p))
    pairs = [(pts[i], pts[j]) for i in range(p) for j in range(p) if i != j]
    draws = rng.standard_exponential((samples, 2, p))
    draws /= draws.sum(axis=2, keepdims=True)
    pairs.extend((draws[s, 0], draws[s, 1]) for s in range(samples))
    return pairs


def md_alpha(model, k: int, samples: int = 2000, rng=None) -> CoefficientEstimate:
    """Markov-Dobrushin coefficient alpha_k.

    For a stochastic matrix this is the exact minimum over state pairs of
    the k-step row overlap.  For a nonlinear kernel the infimum also runs
    over the distribution arguments; it is probed at vertex pairs plus
    ``samples`` random simplex pairs and reported as an upper estimate.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(model, StochasticMatrix):
        return CoefficientEstimate(_alpha_of_matrix(model.entries, k), True, "exact")
    K: PolynomialKernel = model
    if K.degree == 1:
        return CoefficientEstimate(_alpha_of_matrix(K.coeff[0], k), True, "exact")
    rng = as_generator(rng)
    best = 1.0
    n_pairs = 0
    for mu, nu in _sample_pairs(K.p, samples, rng):
        A = _kstep_matrix(K, mu, k)
        B = _kstep_matrix(K, nu, k)
        for x in range(K.p):
            for xp in range(K.p):
                best = min(best, float(np.minimum(A[x], B[xp]).sum()))
        n_pairs += 1
    return CoefficientEstimate(best, False, "upper-of-inf", n_pairs)


def lipschitz_lambda(K: PolynomialKernel, k: int, samples: int = 2000, rng=None) -> CoefficientEstimate:
    """Sensitivity of the k-step kernel to its distribution argument.

    lambda_k = sup over x, mu, nu of ||P^k_mu(x,.) - P^k_nu(x,.)||_TV
    divided by ||mu - nu||_TV.  Zero exactly for linear kernels; otherwise
    a Monte-Carlo lower estimate of the supremum over vertex pairs plus
    random simplex pairs.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if K.degree == 1:
        return CoefficientEstimate(0.0, True, "exact")
    rng = as_generator(rng)
    best = 0.0
    n_pairs = 0
    for mu, nu in _sample_pairs(K.p, samples, rng):
        denom = float(np.abs(mu - nu).sum())
        if denom < 1e-12:
            continue
        A = _kstep_matrix(K, mu, k)
        B = _kstep_matrix(K, nu, k)
        ratio = float(np.abs(A - B).sum(axis=1).max()) / denom
        best = max(best, ratio)
        n_pairs += 1
    return CoefficientEstimate(best, False, "lower-of-sup", n_pairs)


def md_bound_curve(alpha: float, lam: float, n_max: int) -> np.ndarray:
    """Markov-Dobrushin bound 2(1 - alpha + lambda)^n for n = 1..n_max.

    The alpha == lambda > 0 case degrades to the linear-speed bound
    2/(lambda n); alpha == lambda == 0 carries no information and returns
    the constant 2 with a warning.
    """
    if not (0.0 <= alpha <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError("alpha and lambda must lie in [0, 1]")
    n = np.arange(1, n_max + 1, dtype=np.float64)
    if alpha == lam:
        if lam == 0.0:
            warnings.warn("alpha == lambda == 0: bound degenerates to the constant 2")
            return np.full(n_max, 2.0)
        return np.minimum(2.0 / (lam * n), 2.0)
    return np.minimum(2.0 * (1.0 - alpha + lam) ** n, 2.0)


def kstep_bound_curve(alpha_k: float, lambda_k: float, lambda_1: float,
                      d0: float, k: int, n_max: int) -> np.ndarray:
    """k-step bound d0 (1-alpha_k+lambda_k)^[n/k] (1+lambda_1)^(n mod k).

    When alpha_k == lambda_k > 0 the sharper harmonic form
    d0 / (2 + lambda_k n d0) replaces the geometric factor.
    """
    if not 0.0 <= d0 <= 2.0:
        raise ValueError("d0 must lie in [0, 2]")
    if k < 1:
        raise ValueError("k must be >= 1")
    n = np.arange(1, n_max + 1)
    tail = (1.0 + lambda_1) ** (n % k)
    if alpha_k == lambda_k and lambda_k > 0.0:
        core = d0 / (2.0 + lambda_k * n * d0)
    else:
        core = d0 * (1.0 - alpha_k + lambda_k) ** (n // k)
    return np.clip(core * tail, 0.0, 2.0)


@dataclass(frozen=True)
class GammaEstimate:
    value: float
    argmax_entry: tuple[int, int]
    argmax_mu: np.ndarray
    exact_for_degree_2: bool
    samples: int


def gamma_estimate(K: PolynomialKernel, samples: int = 2000, rng=None) -> GammaEstimate:
    """Perturbation size: sup of C1(x,y)/P_mu(x,y) - 1 over entries and mu.

    Probes simplex vertices, the barycenter and random points.  Kernel
    entries are polynomials in a single coordinate of mu, so for degree-2
    kernels the vertex sweep is exact.  Raises InfiniteGammaError when the
    linear part keeps mass on an entry the kernel can drive to zero.
    """
    rng = as_generator(rng)
    p = K.p
    C1 = K.coeff[0]
    if K.degree == 1:
        return GammaEstimate(0.0, (0, 0), np.full(p, 1.0 / p), True, 0)
    points = list(np.eye(p)) + [np.full(p, 1.0 / p)]
    draws = rng.standard_exponential((samples, p))
    points.extend(draws / draws.sum(axis=1, keepdims=True))
    best = 0.0
    arg_entry, arg_mu = (0, 0), points[0]
    for mu in points:
        Pm = evaluate_kernel(K, _clean_probs(mu)).entries
        dead = (Pm <= 0.0) & (C1 > 0.0)
        if dead.any():
            x, y = map(int, np.argwhere(dead)[0])
            raise InfiniteGammaError(
                f"linear entry ({x},{y}) = {C1[x, y]} has zero kernel mass at some mu: "
                "the perturbation ratio is unbounded",
                entry=(x, y), mu=mu.copy(),
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(Pm > 0.0, C1 / np.where(Pm > 0.0, Pm, 1.0), 0.0)
        val = float(ratio.max()) - 1.0
        if val > best:
            best = val
            arg_entry = tuple(int(v) for v in np.unravel_index(np.argmax(ratio), ratio.shape))
            arg_mu = mu.copy()
    return GammaEstimate(max(best, 0.0), arg_entry, np.asarray(arg_mu), K.degree <= 2, samples)


def initial_distance_bound(p: int) -> float:
    """Worst initial distance from the uniform start: 2(1 - 1/p)."""
    if p < 2:
        raise ValueError("p must be >= 2")
    return 2.0 * (1.0 - 1.0 / p)


def initial_distance_bruteforce(p: int, trials: int, rng) -> tuple[float, np.ndarray]:
    """Independent verifier: max TV(uniform, pi) over vertices and random pi."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = as_generator(rng)
    uniform = np.full(p, 1.0 / p)
    best = -1.0
    arg = uniform
    for v in np.eye(p):
        d = float(np.abs(uniform - v).sum())
        if d > best:
            best, arg = d, v
    draws = rng.standard_exponential((trials, p))
    draws /= draws.sum(axis=1, keepdims=True)
    dists = np.abs(uniform[None, :] - draws).sum(axis=1)
    i = int(np.argmax(dists))
    if dists[i] > best:
        best, arg = float(dists[i]), draws[i]
    return best, np.asarray(arg)


def perturbation_bound(gamma: float, n: int) -> float:
    """Perturbation-distance bound 2(e^{-(1+n gamma)} + n gamma)/(1 + n gamma)."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0 or gamma == 0.0:
        return 2.0 * math.exp(-1.0)
    if math.isinf(gamma):
        return 2.0
    x = n * gamma
    return min(2.0, 2.0 * (math.exp(-(1.0 + x)) + x) / (1.0 + x))


@dataclass(frozen=True)
class RatioMomentReport:
    mean: float
    std_error: float
    bound: float
    gamma: float
    passed: bool
    samples: int


def likelihood_ratio_moments(K: PolynomialKernel, n: int, k: int, samples: int, rng,
                     mu0: Distribution | None = None,
                     gamma: float | None = None) -> RatioMomentReport:
    """Monte-Carlo check of E(rho_n^k) <= (1+gamma)^{n(k-1)}.

    rho_n is the likelihood ratio of the linear part against the nonlinear
    kernel along a sampled trajectory.  For k = 1 the mean is exactly 1 in
    expectation (change of measure), which the caller can use as a
    calibration case.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    rng = as_generator(rng)
    if mu0 is None:
        mu0 = Distribution.uniform(K.p)
    if gamma is None:
        gamma = gamma_estimate(K).value
    C1 = K.coeff[0]
    flow = _flow(K, mu0.probs, n)
    states = rng.choice(K.p, size=samples, p=mu0.probs)
    rho = np.ones(samples)
    for t in range(n):
        Pm = evaluate_kernel(K, _clean_probs(flow[t])).entries
        cum = Pm.cumsum(axis=1)
        u = rng.random(samples)
        nxt = (cum[states] < u[:, None]).sum(axis=1)
        nxt = np.minimum(nxt, K.p - 1)
        step_prob = Pm[states, nxt]
        assert step_prob.min() > 0.0, "realized transition has zero probability"
        rho *= C1[states, nxt] / step_prob
        states = nxt
    vals = rho ** k
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(samples))
    bound = (1.0 + gamma) ** (n * (k - 1))
    return RatioMomentReport(mean, se, bound, gamma, mean <= bound + 3.0 * se, samples)


def delta_estimate(K: PolynomialKernel, tol: float = 1e-10, force_zero: bool = False) -> float:
    """TV distance between the nonlinear and linear fixed points.

    ``force_zero`` implements the coarse mode where the two limiting
    distributions are simply identified.
    """
    if force_zero:
        return 0.0
    pi = stationary(K, tol=tol).distribution
    pi_star = stationary(PolynomialKernel.linear(K.coeff[0]), tol=tol).distribution
    return tv_distance(pi, pi_star)


def combined_bound(r: float, eps: float, delta: float, p: int, n: int,
                   regime: str = "small-n") -> float:
    """Combined bound: perturbation floor + spectral-radius decay.

    small-n: 2/e + delta + 2 (r+eps)^n (1 - 1/p)
    large-n: 2 delta + 2 (r+eps)^n (1 - 1/p)
    """
    if regime not in ("small-n", "large-n"):
        raise ValueError("regime must be 'small-n' or 'large-n'")
    tail = 2.0 * (r + eps) ** n * (1.0 - 1.0 / p)
    if regime == "small-n":
        return min(2.0, 2.0 * math.exp(-1.0) + delta + tail)
    return min(2.0, 2.0 * delta + tail)


@dataclass
class BoundConfig:
    """Knobs for full_report; defaults mirror the published experiments."""

    k_range: tuple = (1, 2, 3, 4)
    mc_samples: int = 2000
    eps_override: float | None = None
    force_delta_zero: bool = False
    stationary_tol: float = 1e-10
    spectral_k_max: int = 2**20


@dataclass
class BoundReport:
    """All coefficients plus the named per-step bound curves."""

    p: int
    alpha: list          # exact, from the linear part, one per k
    alpha_nonlinear: list  # sampled upper estimates of the nonlinear infimum
    lam: list            # lambda_k estimates, one per k
    gamma: float         # may be inf when the ratio assumption fails
    delta: float
    r: float
    eps: float
    curves: dict = field(default_factory=dict)   # name -> array over n = 1..n_max
    k_range: tuple = (1, 2, 3, 4)
    n_max: int = 0
    seed: int | None = None
    mc_samples: int = 0
    flags: list = field(default_factory=list)

    def coefficients_dict(self) -> dict:
        return {
            "p": self.p,
            "alpha": [float(a) for a in self.alpha],
            "alpha_nonlinear": [None if a is None else float(a) for a in self.alpha_nonlinear],
            "lambda": [float(v) for v in self.lam],
            "gamma": None if math.isinf(self.gamma) else float(self.gamma),
            "gamma_infinite": bool(math.isinf(self.gamma)),
            "delta": float(self.delta),
            "spectral_radius": float(self.r),
            "eps": float(self.eps),
            "k_range": list(self.k_range),
            "n_max": int(self.n_max),
            "seed": self.seed,
            "mc_samples": int(self.mc_samples),
            "flags": list(self.flags),
        }

    def curve_table(self):
        """(column names, rows) with one row per step n."""
        names = ["n"] + sorted(self.curves)
        rows = []
        for i in range(self.n_max):
            rows.append([i + 1] + [float(self.curves[c][i]) for c in sorted(self.curves)])
        return names, rows

    def to_csv(self, path) -> None:
        """One row per step n, one column per curve (15 significant digits)."""
        from .experiments import ComparisonTable, export_report
        names, rows = self.curve_table()
        export_report(ComparisonTable(names, rows), path)

    def to_json(self, path) -> None:
        """Coefficients plus run metadata."""
        import json
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.coefficients_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def full_report(K: PolynomialKernel, n_max: int, config: BoundConfig | None = None,
                rng=None, seed: int | None = None) -> BoundReport:
    """Compute every coefficient and bound curve for one kernel.

    The alpha/lambda estimates target the linear part exactly (that is the
    published comparison) with the nonlinear infimum reported alongside;
    the spectral curve is built from the coupling matrix of the linear
    part.  Sub-errors (an unbounded gamma, say) become flags, not
    failures.
    """
    cfg = config or BoundConfig()
    rng = as_generator(rng if rng is not None else seed)
    p = K.p
    flags = []

    P_lin = StochasticMatrix(K.coeff[0])
    alpha = [md_alpha(P_lin, k).value for k in cfg.k_range]
    if K.degree > 1:
        alpha_nl = [md_alpha(K, k, cfg.mc_samples, rng).value for k in cfg.k_range]
    else:
        alpha_nl = [None for _ in cfg.k_range]
    lam = [lipschitz_lambda(K, k, cfg.mc_samples, rng).value for k in cfg.k_range]

    try:
        gamma = gamma_estimate(K, cfg.mc_samples, rng).value
    except InfiniteGammaError:
        gamma = math.inf
        flags.append("gamma_infinite: ratio assumption fails for this kernel")

    try:
        delta = delta_estimate(K, tol=cfg.stationary_tol, force_zero=cfg.force_delta_zero)
    except Exception as exc:  # nonconvergence keeps the rest of the report usable
        delta = math.nan
        flags.append(f"delta_unavailable: {exc}")

    M = build_coupling_matrix(P_lin)
    est = spectral_radius(M, cfg.spectral_k_max)
    eps = cfg.eps_override if cfg.eps_override is not None else est.eps

    n = np.arange(1, n_max + 1, dtype=np.float64)
    # "md" is the published bound of the mapping linear chain; the variant
    # with the kernel-sensitivity term rides alongside
    curves = {
        "md": md_bound_curve(alpha[0], 0.0, n_max),
        "md_lipschitz": md_bound_curve(alpha[0], lam[0], n_max),
        "spectral": np.clip(2.0 * (1.0 - 1.0 / p) * (est.r + eps) ** n, 0.0, 2.0),
    }
    d0 = initial_distance_bound(p)
    for i, k in enumerate(cfg.k_range):
        curves[f"kstep_k{k}"] = kstep_bound_curve(alpha[i], lam[i], lam[0], d0, k, n_max)
    delta_for_curve = 0.0 if math.isnan(delta) else delta
    curves["combined_small_n"] = np.array(
        [combined_bound(est.r, eps, delta_for_curve, p, int(i), "small-n") for i in n])
    curves["combined_large_n"] = np.array(
        [combined_bound(est.r, eps, delta_for_curve, p, int(i), "large-n") for i in n])

    return BoundReport(
        p=p, alpha=alpha, alpha_nonlinear=alpha_nl, lam=lam, gamma=gamma,
        delta=delta, r=est.r, eps=eps, curves=curves, k_range=tuple(cfg.k_range),
        n_max=n_max, seed=seed, mc_samples=cfg.mc_samples, flags=flags,
    )
