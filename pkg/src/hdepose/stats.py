"""Small, self-contained statistics kernel.

Only the tests the toolkit needs: Mann-Whitney U, Shapiro-Wilk W, paired t,
Pearson correlation and linear-interpolation quantiles. Distribution
functions are computed from ``math`` (erfc, lgamma) so that scipy can serve
as an independent oracle in the test-suite.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np

ALTERNATIVES = ("less", "greater", "two-sided")
EXACT_MAX_N = 16

_STD_NORMAL = NormalDist()


class StatsError(ValueError):
    pass


@dataclass
class TestReport:
    statistic: float
    p_value: float
    alternative: str
    n: tuple[int, ...]
    method: str = ""
    extra: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not math.isfinite(self.statistic):
            raise StatsError("test statistic is not finite")
        self.p_value = min(1.0, max(0.0, float(self.p_value)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"] = list(self.n)
        return d


def _check_alternative(alternative: str) -> None:
    if alternative not in ALTERNATIVES:
        raise StatsError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")


# ---- distribution functions -------------------------------------------

def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def norm_ppf(p: float) -> float:
    return _STD_NORMAL.inv_cdf(p)


def _betacf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-15) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise StatsError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise StatsError("betainc requires a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    bt = math.exp(lbt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise StatsError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * betainc(0.5 * df, 0.5, df / (df + t * t))
    return tail if t >= 0 else 1.0 - tail


def t_cdf(t: float, df: float) -> float:
    return t_sf(-t, df)


def t_pvalue(t: float, df: float, alternative: str) -> float:
    _check_alternative(alternative)
    if alternative == "less":
        return t_cdf(t, df)
    if alternative == "greater":
        return t_sf(t, df)
    return min(1.0, 2.0 * t_sf(abs(t), df))


# ---- ranks and quantiles ----------------------------------------------

def rankdata(x) -> np.ndarray:
    """1-based ranks with ties given the mean of their positions."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def quantile(x, p: float) -> float:
    """Linear interpolation between closest ranks, position (n - 1) * p."""
    xs = np.sort(np.asarray(x, dtype=float).ravel())
    if xs.size == 0:
        raise StatsError("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise StatsError("quantile probability outside [0, 1]")
    h = (xs.size - 1) * p
    lo = int(math.floor(h))
    hi = min(lo + 1, xs.size - 1)
    return float(xs[lo] + (h - lo) * (xs[hi] - xs[lo]))


def quartiles(x) -> tuple[float, float, float]:
    return quantile(x, 0.25), quantile(x, 0.5), quantile(x, 0.75)


def iqr(x) -> float:
    q1, _, q3 = quartiles(x)
    return q3 - q1


# ---- Mann-Whitney U ---------------------------------------------------

def _exact_u_cdf(ranks: np.ndarray, n1: int) -> dict[int, int]:
    """Counts of the doubled rank-sum over all size-n1 subsets of ``ranks``."""
    r2 = np.rint(2 * ranks).astype(int)
    # dp[k] maps doubled sum -> number of subsets of size k
    dp: list[dict[int, int]] = [dict() for _ in range(n1 + 1)]
    dp[0][0] = 1
    for r in r2:
        for k in range(min(n1, len(r2)), 0, -1):
            prev = dp[k - 1]
            cur = dp[k]
            for s, c in prev.items():
                cur[s + r] = cur.get(s + r, 0) + c
    return dp[n1]


def mann_whitney_p(u: float, n1: int, n2: int, alternative: str = "two-sided",
                   tie_term: float = 0.0, continuity: bool = True) -> tuple[float, float]:
    """Normal-approximation p-value for U of sample 1; returns (p, z).

    ``tie_term`` is sum(t^3 - t) over tie groups of the pooled sample.
    """
    _check_alternative(alternative)
    n = n1 + n2
    mu = n1 * n2 / 2.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 1.0, 0.0
    sd = math.sqrt(var)
    cc = 0.5 if continuity else 0.0
    if alternative == "less":
        z = (u - mu + cc) / sd
        return norm_cdf(z), z
    if alternative == "greater":
        z = (u - mu - cc) / sd
        return norm_sf(z), z
    z = max(abs(u - mu) - cc, 0.0) / sd
    return min(1.0, 2.0 * norm_sf(z)), z


def mann_whitney_u(a, b, alternative: str = "two-sided", method: str = "auto") -> TestReport:
    """Mann-Whitney U test of sample ``a`` against ``b``.

    The statistic is U for ``a`` (number of pairs with a > b, ties counted
    one half). ``alternative="less"`` tests whether ``a`` tends to be smaller.
    ``method`` is "exact", "normal" or "auto" (exact when n1 + n2 <= 16).
    """
    _check_alternative(alternative)
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size < 1 or b.size < 1:
        raise StatsError("Mann-Whitney U needs two non-empty samples")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise StatsError("samples must be finite")
    n1, n2 = a.size, b.size
    ranks = rankdata(np.concatenate([a, b]))
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    if method == "auto":
        method = "exact" if n1 + n2 <= EXACT_MAX_N else "normal"

    if method == "exact":
        counts = _exact_u_cdf(ranks, n1)
        total = sum(counts.values())
        offset = n1 * (n1 + 1)  # doubled minimum rank-sum
        u2 = int(round(2 * u)) + offset
        p_le = sum(c for s, c in counts.items() if s <= u2) / total
        p_ge = sum(c for s, c in counts.items() if s >= u2) / total
        p = {"less": p_le, "greater": p_ge, "two-sided": min(1.0, 2 * min(p_le, p_ge))}[alternative]
        extra = {}
    elif method == "normal":
        _, tcounts = np.unique(ranks, return_counts=True)
        tie_term = float(np.sum(tcounts ** 3 - tcounts))
        p, z = mann_whitney_p(u, n1, n2, alternative, tie_term)
        extra = {"z": z}
    else:
        raise StatsError(f"unknown method {method!r}")
    return TestReport(u, p, alternative, (n1, n2), f"mann-whitney-{method}", extra)


# ---- Shapiro-Wilk -----------------------------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(c, x: float) -> float:
    return sum(ci * x ** i for i, ci in enumerate(c))


def shapiro_wilk_coefficients(n: int) -> np.ndarray:
    """Half-vector of W-test weights for the lower order statistics (positive)."""
    nn2 = n // 2
    a = np.zeros(nn2)
    if n == 3:
        a[0] = math.sqrt(0.5)
        return a
    an25 = n + 0.25
    m = np.array([norm_ppf((i - 0.375) / an25) for i in range(1, nn2 + 1)])
    summ2 = 2.0 * float(np.sum(m ** 2))
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        first = 2
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1 ** 2 - 2 * a2 ** 2))
        a[1] = a2
    else:
        first = 1
        fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1 ** 2))
    a[0] = a1
    a[first:] = -m[first:] / fac
    return a


def shapiro_wilk(x) -> TestReport:
    """Shapiro-Wilk W test of normality (Royston's approximation, 3 <= n <= 5000)."""
    xs = np.sort(np.asarray(x, dtype=float).ravel())
    n = xs.size
    if n < 3 or n > 5000:
        raise StatsError(f"Shapiro-Wilk needs 3 <= n <= 5000, got {n}")
    if not np.all(np.isfinite(xs)):
        raise StatsError("sample must be finite")
    if xs[-1] - xs[0] <= 1e-19 * max(1.0, abs(xs[0])):
        raise StatsError("Shapiro-Wilk undefined for zero-variance data")
    a = shapiro_wilk_coefficients(n)
    nn2 = n // 2
    num = float(np.dot(a, xs[::-1][:nn2] - xs[:nn2])) ** 2
    den = float(np.sum((xs - xs.mean()) ** 2))
    w = min(num / den, 1.0)

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        return TestReport(w, max(p, 0.0), "two-sided", (n,), "shapiro-wilk")
    if w >= 1.0:
        return TestReport(w, 1.0, "two-sided", (n,), "shapiro-wilk")
    y = math.log(1.0 - w)
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return TestReport(w, 1e-99, "two-sided", (n,), "shapiro-wilk")
        y = -math.log(gamma - y)
        mean = _poly(_C3, n)
        sd = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mean = _poly(_C5, ln)
        sd = math.exp(_poly(_C6, ln))
    return TestReport(w, norm_sf((y - mean) / sd), "two-sided", (n,), "shapiro-wilk")


# ---- t-tests and correlation -----------------------------------------

def paired_t(a, b, alternative: str = "two-sided") -> TestReport:
    """Paired t-test on d = a - b with n - 1 degrees of freedom."""
    _check_alternative(alternative)
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise StatsError("paired samples must have equal length")
    if a.size < 2:
        raise StatsError("paired t-test needs at least two pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    n = d.size
    if sd == 0.0:
        if mean == 0.0:
            return TestReport(0.0, 0.5 if alternative != "two-sided" else 1.0, alternative, (n,), "paired-t",
                              {"df": n - 1})
        raise StatsError("differences have zero variance")
    t = mean / (sd / math.sqrt(n))
    return TestReport(t, t_pvalue(t, n - 1, alternative), alternative, (n,), "paired-t", {"df": n - 1})


def one_sample_t(x, mu: float = 0.0, alternative: str = "two-sided") -> TestReport:
    x = np.asarray(x, dtype=float).ravel()
    return paired_t(x, np.full_like(x, mu), alternative)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size < 2:
        raise StatsError("pearson needs two equal-length samples of size >= 2")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("pearson correlation undefined for zero variance")
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
