"""Volatility-anomaly backtesting on sampled iso-volatility portfolios.

Quarterly loop: clean the panel, estimate a shrunk covariance from the
trailing 260 weekly returns, derive five variance targets from equal-weight
volatility-sorted buckets, sample long-only portfolios on each target's
variance level set, hold them buy-and-hold for a quarter, and concatenate
quarters into paths (randomly within a level, or rank-matched on trailing
in-sample returns for the momentum variant).  Descriptive statistics and
the Sharpe-ratio test run on monthly compounded returns.

Everything at rebalance date t is computed from data strictly before t;
estimation windows are slices that end before the date by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.spatial import ConvexHull, Delaunay
from scipy.stats import norm as normal_dist

from ._rng import stream
from .errors import (
    CoverageGap,
    DegenerateVariance,
    EmptyIntersection,
    MalformedCsv,
    NonMonotoneDates,
    NotPositiveDefinite,
    TooFewAssets,
    TooFewObservations,
    TooShortSeries,
)
from .geometry import build_transform, from_patch
from .topology import build_patch
from .volume import AnnealingParams, relative_volumes
from .walks import WalkParams, sample_patch

ESTIMATION_WEEKS = 260     # five years of weekly returns
HOLD_WEEKS = 13            # one quarter
MAX_WEEKLY_GAP = 2         # admitted history may not skip more than two weeks
N_LEVELS = 5
DEFAULT_LIQUIDITY = 1.5e6  # median traded volume threshold, currency units


# ---------------------------------------------------------------------------
# Panel loading and cleaning
# ---------------------------------------------------------------------------

@dataclass
class ReturnsPanel:
    """Dated asset-return matrix plus optional per-asset metadata.

    ``returns`` is a wide frame indexed by date (NaN marks missing data) at
    the panel's native frequency.  ``metadata`` may carry ``size``,
    ``sector`` and ``volume`` (median traded volume) columns per asset.
    """

    returns: pd.DataFrame
    frequency: str                      # "W" or "D"
    metadata: pd.DataFrame | None = None

    def __post_init__(self):
        if not self.returns.index.is_monotonic_increasing or self.returns.index.has_duplicates:
            raise NonMonotoneDates("panel dates must be strictly increasing")
        vals = self.returns.to_numpy()
        if np.nanmin(vals) <= -1.0:
            raise MalformedCsv("returns at or below -100% are not admissible")

    @property
    def assets(self) -> list[str]:
        return list(self.returns.columns)

    def weekly(self) -> pd.DataFrame:
        """Weekly returns: native frame, or daily compounded to W-WED."""
        if self.frequency == "W":
            return self.returns
        grouped = (1.0 + self.returns).resample("W-WED").prod(min_count=1) - 1.0
        return grouped

    def admissible(
        self,
        date,
        min_history: int = ESTIMATION_WEEKS,
        max_gap: int = MAX_WEEKLY_GAP,
        liquidity_threshold: float | None = DEFAULT_LIQUIDITY,
        use_liquidity: bool = True,
    ) -> list[str]:
        """Assets admitted at a rebalance date.

        Requires ``min_history`` weekly rows strictly before the date with
        no run of more than ``max_gap`` consecutive missing observations,
        and (when volume metadata exists and the filter is on) a median
        traded volume above the threshold.
        """
        weekly = self.weekly()
        pos = int(weekly.index.searchsorted(date))
        if pos < min_history:
            return []
        window = weekly.iloc[pos - min_history : pos]
        ok = ~_has_long_gap(window.isna().to_numpy(), max_gap)
        admitted = [a for a, good in zip(window.columns, ok) if good]
        if (
            use_liquidity
            and liquidity_threshold is not None
            and self.metadata is not None
            and "volume" in self.metadata.columns
        ):
            vol = self.metadata["volume"]
            admitted = [a for a in admitted if a in vol.index and vol[a] > liquidity_threshold]
        return admitted


def _has_long_gap(isnan: np.ndarray, max_gap: int) -> np.ndarray:
    """Column-wise: does any run of consecutive NaNs exceed max_gap?"""
    n, m = isnan.shape
    run = np.zeros(m, dtype=int)
    bad = np.zeros(m, dtype=bool)
    for i in range(n):
        run = np.where(isnan[i], run + 1, 0)
        bad |= run > max_gap
    return bad


def load_panel(
    path,
    prices: bool = False,
    metadata_path=None,
) -> ReturnsPanel:
    """Read a returns (or prices) CSV into a panel.

    Layout: a date column first, one column per asset.  With
    ``prices=True`` the series are converted to discrete returns.  The
    optional metadata CSV has an ``asset`` column plus any of ``size``,
    ``sector``, ``volume``.
    """
    try:
        raw = pd.read_csv(path)
    except Exception as exc:
        raise MalformedCsv(f"cannot read {path}: {exc}") from exc
    if raw.shape[1] < 2:
        raise MalformedCsv("need a date column plus at least one asset column")
    try:
        dates = pd.to_datetime(raw.iloc[:, 0])
    except Exception as exc:
        raise MalformedCsv(f"first column is not parseable as dates: {exc}") from exc
    if not dates.is_monotonic_increasing or dates.duplicated().any():
        raise NonMonotoneDates("dates must be strictly increasing")
    try:
        values = raw.iloc[:, 1:].astype(float)
    except ValueError as exc:
        raise MalformedCsv(f"non-numeric cell in asset columns: {exc}") from exc
    frame = values.set_axis(pd.DatetimeIndex(dates, name="date"), axis=0)

    if prices:
        if np.nanmin(frame.to_numpy()) <= 0.0:
            raise MalformedCsv("prices must be positive")
        frame = frame / frame.shift(1) - 1.0
        frame = frame.iloc[1:]

    diffs = np.diff(frame.index.to_numpy()).astype("timedelta64[D]").astype(int)
    freq = "W" if (len(diffs) == 0 or np.median(diffs) >= 6) else "D"

    meta = None
    if metadata_path is not None:
        meta = pd.read_csv(metadata_path)
        if "asset" not in meta.columns:
            raise MalformedCsv("metadata CSV needs an 'asset' column")
        meta = meta.set_index("asset")
    return ReturnsPanel(returns=frame, frequency=freq, metadata=meta)


# ---------------------------------------------------------------------------
# Covariance and variance targets
# ---------------------------------------------------------------------------

def estimate_covariance(window: np.ndarray) -> np.ndarray:
    """Linear shrinkage of the sample covariance toward a scaled identity.

    Analytic shrinkage intensity (Ledoit-Wolf style): the identity target is
    ``m I`` with m the average sample variance, and the intensity is the
    ratio of the estimation-noise norm to the dispersion norm, clipped to
    [0, 1].  Nonsingular for any window with genuine variation, including
    more assets than observations.
    """
    X = np.asarray(window, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise TooFewObservations("need a 2-d window with at least two assets")
    n, p = X.shape
    if n < 30:
        raise TooFewObservations(f"need >= 30 observations, got {n}")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / n
    m = float(np.trace(S)) / p
    if m <= 0.0:
        raise NotPositiveDefinite("window has no variance at all")
    d2 = float(np.sum((S - m * np.eye(p)) ** 2)) / p
    if d2 == 0.0:
        return m * np.eye(p)
    b2 = 0.0
    for t in range(n):
        diff = np.outer(Xc[t], Xc[t]) - S
        b2 += float(np.sum(diff * diff))
    b2 = min(b2 / (n * n) / p, d2)
    rho = b2 / d2
    sigma = rho * m * np.eye(p) + (1.0 - rho) * S
    return 0.5 * (sigma + sigma.T)


@dataclass(frozen=True)
class VolatilityLevels:
    """Five variance targets plus the bucket portfolios that defined them.

    Targets are reported in increasing order; ``permutation`` records how
    the raw volatility-sorted buckets were reordered when their portfolio
    variances came out non-monotone (correlations can do that).
    """

    targets: np.ndarray                 # (5,) increasing
    permutation: tuple                  # raw bucket index per sorted slot
    bucket_portfolios: np.ndarray       # (5, n_assets), rows follow `targets`

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=float)
        if np.any(np.diff(t) < 0.0):
            raise ValueError("targets must be sorted")
        object.__setattr__(self, "targets", t)


def quintile_targets(sigma: np.ndarray, vols: np.ndarray) -> VolatilityLevels:
    """Variance targets from equal-weight volatility-sorted quintiles.

    Assets are sorted by historical volatility and split into five groups
    (remainder spread over the lowest groups); each group's equal-weight
    portfolio variance is a target.  Correlations can make the raw targets
    non-monotone, in which case they are sorted and the permutation kept.
    """
    sigma = np.asarray(sigma, dtype=float)
    vols = np.asarray(vols, dtype=float)
    n = vols.shape[0]
    if n < N_LEVELS:
        raise TooFewAssets(f"need at least {N_LEVELS} assets, got {n}")
    order = np.argsort(vols, kind="stable")
    q, rem = divmod(n, N_LEVELS)
    sizes = [q + 1] * rem + [q] * (N_LEVELS - rem)
    raw = np.empty(N_LEVELS)
    ports = np.zeros((N_LEVELS, n))
    start = 0
    for g, size in enumerate(sizes):
        members = order[start : start + size]
        ports[g, members] = 1.0 / size
        raw[g] = float(ports[g] @ sigma @ ports[g])
        start += size
    perm = tuple(int(i) for i in np.argsort(raw, kind="stable"))
    return VolatilityLevels(
        targets=raw[list(perm)], permutation=perm, bucket_portfolios=ports[list(perm)]
    )


def sample_level(
    sigma: np.ndarray,
    target: float,
    n: int,
    rng: np.random.Generator,
    eps: float = 0.5,
    walk_params: WalkParams | None = None,
    annealing: AnnealingParams | None = None,
    burn_in: int = 64,
) -> np.ndarray:
    """n long-only portfolios with variance exactly ``target``.

    Chains the full machinery: variance level to sphere transform, patch
    components and weights, uniform patch sampling, inverse transform.
    Raises EmptyIntersection when the target is infeasible for the simplex.

    ``eps`` controls only the relative error of the component weights;
    portfolio selection cannot resolve weight differences below 1/n, so the
    default is loose.  Pass a tighter value when the weights matter.
    """
    d_assets = sigma.shape[0]
    try:
        transform = build_transform(sigma, target, d_assets)
    except Exception as exc:
        from .errors import DegenerateLevel

        if isinstance(exc, DegenerateLevel):
            raise EmptyIntersection(f"variance target {target} infeasible: {exc}") from exc
        raise
    body = build_patch(transform.simplex, transform=transform)
    if body.M == 0:
        raise EmptyIntersection(f"variance level {target} does not meet the simplex")
    relative_volumes(body, eps, rng.spawn(1)[0], annealing)
    points, _ = sample_patch(body, n, rng, params=walk_params, burn_in=burn_in)
    return from_patch(points, transform)


# ---------------------------------------------------------------------------
# Backtest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RebalanceSchedule:
    """Quarterly rebalance positions into the weekly index (no look-ahead)."""

    dates: tuple
    positions: tuple
    estimation_window: int = ESTIMATION_WEEKS
    holding_weeks: int = HOLD_WEEKS


def build_schedule(panel: ReturnsPanel) -> RebalanceSchedule:
    weekly = panel.weekly()
    n = len(weekly.index)
    positions = list(range(ESTIMATION_WEEKS, n - HOLD_WEEKS + 1, HOLD_WEEKS))
    if not positions:
        raise TooFewObservations("panel too short for one estimation window plus a quarter")
    return RebalanceSchedule(
        dates=tuple(weekly.index[p] for p in positions), positions=tuple(positions)
    )


@dataclass
class BacktestResult:
    """Concatenated paths and statistics per variance level."""

    mode: str
    seed: int
    n_samples: int
    level_targets: list            # per rebalance date: (5,) targets
    dates: list                    # rebalance dates
    weekly_paths: dict             # level -> (n, total_weeks)
    monthly_paths: dict            # level -> (n, n_months)
    stats: dict                    # level -> (n, 3): ann ret, ann std, sharpe
    hold_dates: pd.DatetimeIndex = field(default=None)

    def mean_sharpe(self, level: int) -> float:
        return float(np.mean(self.stats[level][:, 2]))


def _buy_and_hold(weights: np.ndarray, asset_returns: np.ndarray) -> np.ndarray:
    """Per-period portfolio returns with drifting weights.

    weights: (n_portfolios, n_assets); asset_returns: (T, n_assets);
    returns (n_portfolios, T).
    """
    W = np.array(weights, dtype=float)
    out = np.empty((W.shape[0], asset_returns.shape[0]))
    for t in range(asset_returns.shape[0]):
        r = asset_returns[t]
        port = W @ r
        out[:, t] = port
        W = W * (1.0 + r)[None, :] / (1.0 + port)[:, None]
    return out


def _level_task(args):
    """Worker for one (rebalance, level) sampling task; picklable and keyed."""
    sigma, target, n_samples, seed, k, m, eps, hold_X, insample_X = args
    rng = stream(seed, 1, k, m)
    ports = sample_level(sigma, target, n_samples, rng, eps=eps)
    seg = _buy_and_hold(ports, hold_X)
    ins = _buy_and_hold(ports, insample_X)
    return k, m, seg, (1.0 + ins).prod(axis=1) - 1.0


def backtest(
    panel: ReturnsPanel,
    n_samples: int = 1000,
    mode: str = "random",
    seed: int = 0,
    eps: float = 0.5,
    schedule: RebalanceSchedule | None = None,
    use_liquidity: bool = True,
    threads: int = 1,
) -> BacktestResult:
    """Run the iso-volatility backtest over every rebalance date.

    ``mode='random'`` concatenates quarters within a level by a fresh random
    pairing per date; ``mode='momentum'`` pairs by rank, matching each
    path's realized return over the just-ended quarter with the candidate
    portfolios' in-sample return over the same quarter.  Both modes consume
    identical sampling streams, so the multiset of quarter segments per
    level and date is the same; only the pairing differs.
    """
    if mode not in ("random", "momentum"):
        raise ValueError(f"unknown concatenation mode {mode!r}")
    weekly = panel.weekly()
    sched = schedule or build_schedule(panel)
    K = len(sched.positions)

    level_targets = []
    seg_returns: dict[int, list] = {m: [None] * K for m in range(N_LEVELS)}
    seg_insample: dict[int, list] = {m: [None] * K for m in range(N_LEVELS)}
    hold_dates: list = []
    tasks = []

    for k, pos in enumerate(sched.positions):
        date = weekly.index[pos]
        assets = panel.admissible(date, use_liquidity=use_liquidity)
        if len(assets) < N_LEVELS:
            raise TooFewAssets(f"only {len(assets)} admissible assets at {date}")
        window = weekly.iloc[pos - sched.estimation_window : pos][assets]
        X = window.fillna(0.0).to_numpy()
        sigma = estimate_covariance(X)
        vols = X.std(axis=0, ddof=1)
        levels = quintile_targets(sigma, vols)
        level_targets.append(levels.targets.copy())

        hold = weekly.iloc[pos : pos + sched.holding_weeks][assets]
        if hold.isna().to_numpy().any():
            raise CoverageGap(f"missing returns in the holding window after {date}")
        insample = weekly.iloc[pos - sched.holding_weeks : pos][assets].fillna(0.0)
        hold_dates.extend(hold.index)

        for m in range(N_LEVELS):
            tasks.append(
                (sigma, float(levels.targets[m]), n_samples, seed, k, m, eps,
                 hold.to_numpy(), insample.to_numpy())
            )

    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_level_task, tasks))
    else:
        results = [_level_task(t) for t in tasks]
    for k, m, seg, ins_total in results:
        seg_returns[m][k] = seg
        seg_insample[m][k] = ins_total

    weekly_paths: dict[int, np.ndarray] = {}
    for m in range(N_LEVELS):
        paths = None
        prev_total = None
        for k in range(len(sched.positions)):
            seg = seg_returns[m][k]
            if paths is None:
                assign = np.arange(n_samples)
            elif mode == "random":
                assign = stream(seed, 2, k, m).permutation(n_samples)
            else:
                path_rank = np.argsort(np.argsort(-prev_total, kind="stable"), kind="stable")
                cand_order = np.argsort(-seg_insample[m][k], kind="stable")
                assign = cand_order[path_rank]
            chosen = seg[assign]
            paths = chosen if paths is None else np.hstack([paths, chosen])
            prev_total = (1.0 + chosen).prod(axis=1) - 1.0
        weekly_paths[m] = paths

    idx = pd.DatetimeIndex(hold_dates)
    monthly_paths = {m: compound_monthly(idx, weekly_paths[m]) for m in range(N_LEVELS)}
    stats = {
        m: np.array([performance_stats(row) for row in monthly_paths[m]])
        for m in range(N_LEVELS)
    }
    return BacktestResult(
        mode=mode,
        seed=seed,
        n_samples=n_samples,
        level_targets=level_targets,
        dates=list(sched.dates),
        weekly_paths=weekly_paths,
        monthly_paths=monthly_paths,
        stats=stats,
        hold_dates=idx,
    )


def compound_monthly(dates: pd.DatetimeIndex, returns: np.ndarray) -> np.ndarray:
    """Compound per-period path returns into calendar-month returns."""
    frame = pd.DataFrame((1.0 + returns).T, index=dates)
    monthly = frame.groupby([dates.year, dates.month], sort=False).prod() - 1.0
    return monthly.to_numpy().T


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def performance_stats(
    monthly: np.ndarray,
    risk_free: float = 0.0,
    sharpe_convention: str = "arithmetic",
) -> tuple[float, float, float]:
    """(annualized return, annualized std, Sharpe) from monthly returns.

    Annualized return is geometric; the Sharpe numerator uses the
    arithmetic monthly mean times 12 by default (a ``geometric`` option
    uses the annualized return itself).  Zero-variance series map to a
    signed-infinity Sharpe sentinel (NaN when the excess mean is zero too).
    """
    r = np.asarray(monthly, dtype=float)
    if r.ndim != 1 or r.shape[0] < 12:
        raise TooShortSeries("need at least 12 monthly observations")
    T = r.shape[0]
    ann_ret = float(np.expm1(12.0 / T * np.sum(np.log1p(r))))
    ann_std = float(r.std(ddof=1) * math.sqrt(12.0))
    if sharpe_convention == "arithmetic":
        excess = float(np.mean(r) - risk_free) * 12.0
    elif sharpe_convention == "geometric":
        excess = ann_ret - risk_free * 12.0
    else:
        raise ValueError(f"unknown sharpe convention {sharpe_convention!r}")
    if ann_std <= 1e-12 * max(1.0, abs(excess)):
        # constant series: signed-infinity sentinel, NaN when flat at zero
        sharpe = math.nan if abs(excess) <= 1e-15 else math.copysign(math.inf, excess)
        ann_std = 0.0
    else:
        sharpe = excess / ann_std
    return ann_ret, ann_std, sharpe


def _parzen_weights(lags: np.ndarray, bandwidth: float) -> np.ndarray:
    x = lags / bandwidth
    w = np.zeros_like(x)
    small = x <= 0.5
    mid = (x > 0.5) & (x <= 1.0)
    w[small] = 1.0 - 6.0 * x[small] ** 2 + 6.0 * x[small] ** 3
    w[mid] = 2.0 * (1.0 - x[mid]) ** 3
    return w


def _andrews_bandwidth(V: np.ndarray) -> float:
    """Automatic Parzen-kernel bandwidth from per-column AR(1) fits."""
    T = V.shape[0]
    num = 0.0
    den = 0.0
    for j in range(V.shape[1]):
        x = V[:, j]
        denom = float(x[:-1] @ x[:-1])
        rho = 0.0 if denom == 0.0 else float(x[1:] @ x[:-1]) / denom
        rho = float(np.clip(rho, -0.97, 0.97))
        resid = x[1:] - rho * x[:-1]
        s2 = float(resid @ resid) / max(1, T - 1)
        num += 4.0 * rho**2 * s2**2 / (1.0 - rho) ** 8
        den += s2**2 / (1.0 - rho) ** 4
    alpha2 = num / den if den > 0.0 else 0.0
    return max(1.0, 2.6614 * (alpha2 * T) ** 0.2)


def hac_covariance(V: np.ndarray, bandwidth: float | None = None) -> np.ndarray:
    """Parzen-kernel long-run covariance of a demeaned multivariate series."""
    T = V.shape[0]
    if bandwidth is None:
        bandwidth = _andrews_bandwidth(V)
    psi = V.T @ V / T
    max_lag = min(T - 1, int(math.floor(bandwidth)))
    weights = _parzen_weights(np.arange(1, max_lag + 1, dtype=float), bandwidth)
    for lag, w in zip(range(1, max_lag + 1), weights):
        gamma = V[lag:].T @ V[:-lag] / T
        psi += w * (gamma + gamma.T)
    return psi


def sharpe_test(series_a: np.ndarray, series_b: np.ndarray, bandwidth: float | None = None):
    """Two-sided test of equal Sharpe ratios with HAC standard errors.

    Delta method on the joint first and second moments of the two series,
    with a Parzen-kernel long-run covariance (automatic bandwidth).  Returns
    (statistic, p-value); the statistic is asymptotically standard normal
    under the null.
    """
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise TooShortSeries("series must be one-dimensional and equal length")
    T = a.shape[0]
    if T < 24:
        raise TooShortSeries(f"need at least 24 observations, got {T}")

    mu_a, mu_b = float(a.mean()), float(b.mean())
    g_a, g_b = float(np.mean(a * a)), float(np.mean(b * b))
    var_a, var_b = g_a - mu_a**2, g_b - mu_b**2
    if var_a <= 1e-30 or var_b <= 1e-30:
        raise DegenerateVariance("a series has (near) zero variance")
    sr_a = mu_a / math.sqrt(var_a)
    sr_b = mu_b / math.sqrt(var_b)
    delta = sr_a - sr_b
    if np.array_equal(a, b):
        return 0.0, 1.0

    Y = np.column_stack([a, b, a * a, b * b])
    V = Y - Y.mean(axis=0)
    psi = hac_covariance(V, bandwidth)
    grad = np.array(
        [
            g_a / var_a**1.5,
            -g_b / var_b**1.5,
            -0.5 * mu_a / var_a**1.5,
            0.5 * mu_b / var_b**1.5,
        ]
    )
    avar = float(grad @ psi @ grad)
    if avar <= 0.0:
        return (0.0, 1.0) if delta == 0.0 else (math.copysign(math.inf, delta), 0.0)
    z = delta / math.sqrt(avar / T)
    p = 2.0 * float(normal_dist.sf(abs(z)))
    return float(z), p


@dataclass(frozen=True)
class ClusterSummary:
    """Location/shape summary of a level's (ann std, ann return) cloud."""

    mean: np.ndarray
    covariance: np.ndarray
    risk_return_correlation: float
    hull_vertices: np.ndarray | None

    def contains(self, point) -> bool:
        """Convex-hull membership of a (std, return) pair."""
        if self.hull_vertices is None:
            return bool(np.allclose(point, self.mean))
        tri = Delaunay(self.hull_vertices)
        return bool(tri.find_simplex(np.asarray(point)[None, :])[0] >= 0)


def cluster_summary(result: BacktestResult, level: int) -> ClusterSummary:
    """Summarize one level's realized risk-return cloud.

    Reports the mean, covariance and risk-return correlation of the
    (annualized std, annualized return) pairs plus the convex hull for
    membership queries (None when the cloud is degenerate).
    """
    stats = result.stats[level]
    if stats.shape[0] < 30:
        raise ValueError("need at least 30 paths for a cluster summary")
    pairs = stats[:, [1, 0]]  # (ann std, ann return)
    mean = pairs.mean(axis=0)
    cov = np.cov(pairs.T, ddof=1)
    sx, sy = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
    corr = float(cov[0, 1] / (sx * sy)) if sx > 0.0 and sy > 0.0 else math.nan
    hull = None
    if np.linalg.matrix_rank(pairs - mean, tol=1e-12) >= 2:
        hull = pairs[ConvexHull(pairs).vertices]
    return ClusterSummary(
        mean=mean, covariance=cov, risk_return_correlation=corr, hull_vertices=hull
    )
