"""Exponent fits, the proven decay bounds in exact arithmetic, and replays of
both proof chains on concrete environments.
"""
from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import stats

from rclab import rng
from rclab.environment import (
    ModifiedEnvironment,
    alpha_threshold,
    box_min_conductance,
    min_conductance_statistic,
    sample_environment,
)
from rclab.exceptions import BudgetError, FitError, ParameterError
from rclab.isoperimetry import PowerProfile, threshold_time
from rclab.kernel import DEFAULT_TAU, heat_kernel, pi, return_series, spectral_sandwich, transition_row
from rclab.models.analysis import (
    AnnealedPoint,
    AnnealedSeries,
    BoundsReport,
    DecayFit,
    MinConductanceRow,
    PipelineReport,
    StandardRegimeReport,
)
from rclab.models.environment import LAW_CONSTANT, ConductanceLaw
from rclab.models.kernel import ReturnSeries, SeriesPoint
from rclab.models.lattice import LatticePoint, PlainBox
from rclab.traps import (
    collection_C,
    default_alpha,
    plant_trap,
    q_n,
    sampled_trap_rank,
)
from rclab.walker import per_jump_bound, sojourn_exact

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4
BOOTSTRAP_RESAMPLES = 2000
CONFIDENCE = 0.95
STANDARD_MAX_RADIUS = 512

Number = Union[int, float, Fraction]

NOT_DESK_REPRODUCIBLE = (
    "The anomalous regime needs d >= 5, where kernel supports reach about 1e9 sites "
    "at informative n; the slope is not fitted there. The trap pipeline checks the "
    "inequality chain on exact kernels instead."
)


def fit_exponent(
    series: ReturnSeries,
    n_min: Optional[int] = None,
    n_max: Optional[int] = None,
    *,
    resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = 0,
) -> DecayFit:
    """Slope of log P^{2n}(0,0) against log n with a bootstrap interval.

    Grid points are resampled with replacement; the interval is widened to
    contain the point estimate.
    """
    points = [
        p for p in series.points
        if (n_min is None or p.n >= n_min) and (n_max is None or p.n <= n_max)
    ]
    if len(points) < MIN_FIT_POINTS:
        raise FitError(
            f"A fit needs at least {MIN_FIT_POINTS} grid points in range, got {len(points)}."
        )
    for p in points:
        if p.value <= 0 or p.value <= p.err_bound:
            raise FitError(
                f"P^{2 * p.n}(0,0) = {p.value:.3g} is dominated by the truncation error "
                f"{p.err_bound:.3g}; lower tau or shrink the range."
            )
    x = np.log(np.array([p.n for p in points], dtype=np.float64))
    y = np.log(np.array([p.value for p in points], dtype=np.float64))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))

    gen = rng.generator(seed, rng.STREAM_BOOTSTRAP)
    idx = gen.integers(0, len(points), size=(resamples, len(points)))
    xs, ys = x[idx], y[idx]
    xc = xs - xs.mean(axis=1, keepdims=True)
    yc = ys - ys.mean(axis=1, keepdims=True)
    var = (xc ** 2).sum(axis=1)
    keep = var > 0
    slopes = (xc * yc).sum(axis=1)[keep] / var[keep]
    tail = 100 * (1 - CONFIDENCE) / 2
    lo, hi = np.percentile(slopes, [tail, 100 - tail]) if slopes.size else (slope, slope)
    fit = DecayFit(
        slope=float(slope),
        intercept=float(intercept),
        ci_low=float(min(lo, slope)),
        ci_high=float(max(hi, slope)),
        n_min=points[0].n,
        n_max=points[-1].n,
        residual=residual,
        points=len(points),
    )
    logger.info("Fitted slope %.4f [%.4f, %.4f] over n in [%d, %d]",
                fit.slope, fit.ci_low, fit.ci_high, fit.n_min, fit.n_max)
    return fit


def series_from_rows(
    rows: Iterable[Mapping[str, object]], d: int = 0, gamma: Optional[float] = None,
) -> ReturnSeries:
    """A series from rows with keys n, p2n and optionally err_bound."""
    series = ReturnSeries(d=d, gamma=gamma, seed=0)
    try:
        for row in rows:
            series.points.append(SeriesPoint(
                int(str(row["n"])),
                float(str(row["p2n"])),
                float(str(row.get("err_bound", 0.0) or 0.0)),
            ))
    except (KeyError, ValueError) as exc:
        raise FitError("Series rows need numeric 'n' and 'p2n' columns.") from exc
    series.points.sort(key=lambda p: p.n)
    return series


def exact(value: Number) -> Fraction:
    """The decimal a parameter was written as, as a fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(repr(float(value)))


def anomalous_delta(d: int, gamma: Number, epsilon: Number) -> Fraction:
    """d(4d-2)gamma/(1-eps)."""
    g, e = exact(gamma), exact(epsilon)
    if g <= 0 or not 0 <= e < 1:
        raise ParameterError("Need gamma > 0 and 0 <= epsilon < 1.")
    return d * (4 * d - 2) * g / (1 - e)


def standard_delta(d: int, gamma: Number) -> Fraction:
    """4d^2/gamma."""
    g = exact(gamma)
    if g <= 0:
        raise ParameterError("Need gamma > 0.")
    return Fraction(4 * d * d) / g


def in_standard_regime(d: int, gamma: Number, mu: Number) -> bool:
    g, m = exact(gamma), exact(mu)
    return g > 8 * d and 0 < m < Fraction(1, 8) - d / g


def bounds_report(
    fit: Optional[DecayFit],
    d: int,
    gamma: Number,
    epsilon: Number = 0,
    mu: Number = Fraction(1, 100),
) -> BoundsReport:
    """The proven exponents for (d, gamma) and where a fitted slope falls.

    Anomalous window [-2(1 + d(2d-1)gamma), -2], universal upper bound -d/2
    (d = 2, 3) or -2 (d >= 4), and large-gamma target -d/2 + 4d^2/gamma.
    """
    if d < 1:
        raise ParameterError(f"Dimension must be at least 1, got d={d}.")
    g, e, m = exact(gamma), exact(epsilon), exact(mu)
    report = BoundsReport(
        d=d,
        gamma=g,
        epsilon=e,
        mu=m,
        window_low=-2 * (1 + d * (2 * d - 1) * g),
        window_high=Fraction(-2),
        trans_bound=Fraction(-d, 2) if d <= 3 else Fraction(-2),
        standard_target=Fraction(-d, 2) + standard_delta(d, g),
        anomalous_delta=anomalous_delta(d, g, e),
        standard_delta=standard_delta(d, g),
        fit=fit,
    )
    if d >= 5:
        report.notes.append(NOT_DESK_REPRODUCIBLE)
    else:
        report.notes.append("The anomalous window is proven for d >= 5; it is listed for reference.")
    if not in_standard_regime(d, g, m):
        report.notes.append(
            f"gamma={g}, mu={m} lie outside gamma > 8d, 0 < mu < 1/8 - d/gamma; "
            "the standard target is indicative."
        )
    if fit is not None:
        report.verdicts = {
            "anomalous_window": fit.verdict(float(report.window_low), float(report.window_high)),
            "trans_bound": fit.verdict(-math.inf, float(report.trans_bound)),
            "standard_target": fit.verdict(-math.inf, float(report.standard_target)),
        }
    return report


def annealed_return(
    d: int,
    law: ConductanceLaw,
    n_grid: Sequence[int],
    replicas: int,
    seed: int,
    *,
    tau: float = DEFAULT_TAU,
    threads: int = 1,
) -> AnnealedSeries:
    """E_Q[P^{2n}(0,0)] over independent environments, one per replica."""
    if replicas < 1:
        raise ParameterError("At least one replica is needed.")
    grid = sorted(set(n_grid))
    if not grid or grid[0] < 1:
        raise ParameterError("The grid needs positive entries.")
    n_max = grid[-1]
    radius = 2 * n_max + 2
    values = np.empty((replicas, len(grid)))
    lost = np.empty((replicas, len(grid)))
    # a constant law has nothing to average
    distinct = 1 if law.kind == LAW_CONSTANT else replicas
    for r in range(distinct):
        env = sample_environment(d, radius, law, rng.derive_seed(seed, r), threads=threads)
        series = return_series(env, n_max, grid, tau)
        values[r] = series.values()
        lost[r] = [p.err_bound for p in series.points]
        logger.debug("annealed_return: replica %d/%d done", r + 1, distinct)
    values[distinct:] = values[0]
    lost[distinct:] = lost[0]

    out = AnnealedSeries(d=d, law=law.label(), seed=seed, replicas=replicas, tau=tau)
    mean = values.mean(axis=0)
    if replicas > 1:
        quantile = stats.t.ppf(0.5 + CONFIDENCE / 2, replicas - 1)
        half = quantile * values.std(axis=0, ddof=1) / math.sqrt(replicas)
    else:
        half = np.zeros(len(grid))
    median = np.median(values, axis=0)
    for i, n in enumerate(grid):
        out.points.append(AnnealedPoint(n, float(mean[i]), float(mean[i] - half[i]),
                                        float(mean[i] + half[i]), float(median[i])))
    out.lost_mass = [float(v) for v in lost.mean(axis=0)]
    return out


def annealed_as_series(annealed: AnnealedSeries, gamma: Optional[float] = None) -> ReturnSeries:
    series = ReturnSeries(d=annealed.d, gamma=gamma, seed=annealed.seed, law=annealed.law, tau=annealed.tau)
    series.points = [
        SeriesPoint(p.n, p.mean, lost) for p, lost in zip(annealed.points, annealed.lost_mass)
    ]
    return series


def anomalous_pipeline(
    d: int,
    gamma: float,
    xi: float,
    epsilon: float,
    N: int,
    seed: int,
    *,
    alpha: Optional[float] = None,
    plant: bool = False,
    threads: int = 1,
) -> PipelineReport:
    """Replay the trap lower-bound chain on one sampled environment.

    With n = floor(N^alpha) and the box B_M, M = floor(n^(1/alpha)), checks
    the Cauchy-Schwarz bound P^{2n}(0,0) >= pi(0) P_0(X_n in B_M)^2 / (2d #B_M)
    on exact kernels, the crossing floor at the first trap on the walk and
    the per-jump sojourn bound. With ``plant`` the trap sits at the origin,
    so the first trap rank is 0 and the whole chain can be assembled exactly.
    """
    if N < 1:
        raise ParameterError(f"N must be at least 1, got {N}.")
    a = alpha if alpha is not None else default_alpha(d, gamma, epsilon)
    if a <= 0:
        raise ParameterError(f"alpha must be positive, got {a}.")
    n = max(1, math.floor(float(N) ** a + 1e-12))
    M = min(N, max(1, math.floor(float(n) ** (1.0 / a) + 1e-9)))
    radius = max(3 * N + 1, 2 * n + 2)
    env = sample_environment(d, radius, ConductanceLaw.poly_tail(gamma), seed, threads=threads)
    origin = LatticePoint.origin(d)
    if plant:
        env = plant_trap(env, origin, N, a, xi)
        rank, site = 0, origin
    else:
        rank, site = sampled_trap_rank(env, N, a, xi, rng.derive_seed(seed, 1 << 32))

    sandwich = spectral_sandwich(env, n, 3 * M, tau=0.0)
    floor = 1.0 / (4 * d * float(N) ** a)
    bound = per_jump_bound(d, N, a, xi, n)
    crossing = sojourn = assembled = None
    notes: List[str] = []
    if site is not None:
        pattern = collection_C(site)
        crossing = env.conductance(pattern.weak_bond) / pi(env, site)
        sojourn = sojourn_exact(env, pattern, n)[0]
        if rank == 0:
            assembled = crossing * sojourn
        else:
            notes.append(
                f"First trap at hit {rank}: the assembled bound needs the probability of that rank, which one "
                "environment does not give exactly; the per-trap checks still run."
            )
    else:
        notes.append("No trap among the first N boundary hits.")

    report = PipelineReport(
        d=d,
        gamma=gamma,
        xi=xi,
        epsilon=epsilon,
        alpha=a,
        N=N,
        n=n,
        box_scale=M,
        seed=seed,
        planted=plant,
        trap_rank=rank,
        trap_site=site.coords if site is not None else None,
        return_probability=sandwich.return_probability,
        box_mass=sandwich.box_mass,
        box_size=sandwich.box_size,
        pi_origin=sandwich.pi_origin,
        sandwich_rhs=sandwich.rhs_counting_form,
        crossing=crossing,
        crossing_floor=floor,
        sojourn_exact=sojourn,
        sojourn_bound=bound,
        assembled_lower=assembled,
        no_trap_context=(1 - q_n(d, gamma, xi, a, N)) ** N,
        notes=notes,
    )
    if report.violations:
        logger.warning("anomalous_pipeline seed=%d: failed checks %s", seed, ", ".join(report.violations))
    return report


def _two_step_holding(modenv: ModifiedEnvironment, half: int) -> float:
    env = modenv.materialize(half + 2)
    best = 1.0
    for x in PlainBox(half, env.d).points():
        if not x.is_even():
            continue
        back = 0.0
        for y, pxy in transition_row(env, x).items():
            back += pxy * transition_row(env, y)[x]
        best = min(best, back)
    return best


def standard_regime_check(
    modenv: ModifiedEnvironment,
    N: int,
    mu: float,
    epsilon: float,
    kappa: Optional[float] = None,
    *,
    gamma: Optional[float] = None,
    alpha: Optional[float] = None,
    max_radius: int = STANDARD_MAX_RADIUS,
) -> StandardRegimeReport:
    """Run the upper-bound argument of the large-gamma regime on a small window.

    The profile lower bound Phi(r) >= c r^(-1/d) follows from the surface and
    volume bounds with c = alpha^2 kappa (2d alpha)^(1/d) / (4d^2); kappa
    defaults to 2d, the isoperimetric constant of the 2e_i edges of Z^d_e.
    The time threshold it gives is then checked against P^{2n}(0, x) <= eps pi(x)
    for every x, on exact kernels of the modified field.
    """
    d = modenv.d
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}.")
    g = gamma if gamma is not None else modenv.base.law.gamma
    box_min = box_min_conductance(modenv.base, N + 1)
    if alpha is not None:
        a = alpha
    elif g is not None:
        a = alpha_threshold(d, g, mu, N)
    else:
        a = box_min
    k = kappa if kappa is not None else 2.0 * d
    c = a ** 2 * k * (2 * d * a) ** (1.0 / d) / (4.0 * d * d)

    near = modenv.materialize(N + 3)
    interior = near.pi_array[tuple(slice(1, -1) for _ in range(d))]
    pi_min = min(float(interior.min()), 2.0 * d)
    sigma = min(0.5, _two_step_holding(modenv, N + 2), 1.0 / (2 * d))
    origin = LatticePoint.origin(d)
    n = threshold_time(PowerProfile(c, d), sigma, epsilon, pi(near, origin), pi_min)
    steps = 2 * n
    if steps + 2 > max_radius:
        raise BudgetError(
            f"The exact check needs {steps} steps, a stored radius of {steps + 2}; "
            f"the limit is {max_radius}. Raise epsilon or the limit."
        )
    env = modenv.materialize(steps + 2)
    dist = heat_kernel(env, steps, tau=0.0)
    region = tuple(
        slice(o + env.radius, o + env.radius + s) for o, s in zip(dist.origin, dist.values.shape)
    )
    ratio = float((dist.values / env.pi_array[region]).max())
    report = StandardRegimeReport(
        N=N,
        mu=mu,
        epsilon=epsilon,
        alpha=a,
        kappa=k,
        profile_c=c,
        sigma=sigma,
        sigma_analytic=a ** 2 / (2 * d),
        precondition=box_min >= a,
        n=n,
        max_ratio=ratio,
        in_regime=g is not None and in_standard_regime(d, g, mu),
    )
    if not report.in_regime:
        logger.warning("standard_regime_check: gamma=%s, mu=%s outside the proven regime", g, mu)
    return report


def min_conductance_study(
    d: int,
    law: ConductanceLaw,
    Ns: Sequence[int],
    replicas: int,
    seed: int,
    *,
    threads: int = 1,
) -> List[MinConductanceRow]:
    """Mean of log(min conductance in [-N, N]^d) / log N over seeded environments."""
    if replicas < 1:
        raise ParameterError("At least one replica is needed.")
    target = -d / law.gamma if law.gamma is not None else math.nan
    rows = []
    for N in Ns:
        values = np.array([
            min_conductance_statistic(
                sample_environment(d, N, law, rng.derive_seed(seed, N, r), threads=threads), N,
            )
            for r in range(replicas)
        ])
        sem = float(values.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
        rows.append(MinConductanceRow(N, float(values.mean()), sem, target, replicas))
        logger.info("N=%d: mean statistic %.4f (target %.4f)", N, values.mean(), target)
    return rows


def gap_shrinkage_p(rows: Sequence[MinConductanceRow]) -> float:
    """One-sided p-value for "|mean - target| does not shrink as N grows".

    Weighted least squares of the gap on log N with weights 1/sem^2; small
    values mean the gap decreases.
    """
    if len({r.N for r in rows}) < 2:
        raise ParameterError("A shrinking gap needs at least two distinct N.")
    if any(not r.sem > 0 for r in rows):
        raise ParameterError("Every row needs a positive standard error; use at least two replicas.")
    x = np.log([float(r.N) for r in rows])
    gap = np.abs([r.mean - r.target for r in rows])
    sem = np.array([r.sem for r in rows])
    coeffs, cov = np.polyfit(x, gap, 1, w=1.0 / sem, cov="unscaled")
    slope, se = float(coeffs[0]), math.sqrt(float(cov[0, 0]))
    logger.debug("gap slope %.4g +- %.3g per unit log N", slope, se)
    return float(stats.norm.cdf(slope / se))


__all__ = [
    "annealed_as_series",
    "annealed_return",
    "anomalous_delta",
    "anomalous_pipeline",
    "bounds_report",
    "fit_exponent",
    "gap_shrinkage_p",
    "min_conductance_study",
    "series_from_rows",
    "standard_delta",
    "standard_regime_check",
]
