"""Nonparametric test battery: KS normality gate, Friedman, pairwise Wilcoxon
signed-rank with a Bonferroni-corrected threshold.

Ranks with ties are averages, so they are multiples of 1/2; internally they
are doubled to integers, which keeps the Friedman statistic and the exact
Wilcoxon counts free of rounding error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import special
from scipy import stats as sps

from .errors import ArityError, ConfigError, DegenerateError, InsufficientDataError, ShapeError, TeleopError

EXACT_MAX_N = 12


@dataclass(frozen=True)
class TestResult:
    test: str
    statistic: float
    p_value: float
    n: int
    significant: bool
    alpha: float
    method: str = ""

    __test__ = False  # not a pytest class


def _result(test, statistic, p, n, alpha, method=""):
    p = min(1.0, max(0.0, float(p)))
    return TestResult(test, float(statistic), p, int(n), p < alpha, float(alpha), method)


@dataclass(frozen=True, eq=False)
class PairedData:
    """Blocks x treatments matrix with one label per treatment (column)."""

    labels: tuple
    values: np.ndarray

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        try:
            vals = np.array(self.values, dtype=float)
        except ValueError as exc:
            raise ShapeError("paired data is not rectangular") from exc
        if vals.ndim != 2:
            raise ShapeError(f"paired data must be 2-D (blocks x treatments), got {vals.ndim}-D")
        if vals.shape[1] != len(labels):
            raise ShapeError(f"{vals.shape[1]} treatment columns but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise ShapeError("treatment labels must be unique")
        missing = np.argwhere(np.isnan(vals))
        if missing.size:
            cells = ", ".join(f"(block {i}, {labels[j]})" for i, j in missing[:10])
            raise ShapeError(f"missing cells: {cells}")
        vals.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_columns(cls, columns: dict) -> "PairedData":
        lengths = {k: len(v) for k, v in columns.items()}
        if len(set(lengths.values())) > 1:
            raise ShapeError(f"non-rectangular data, column lengths {lengths}")
        return cls(tuple(columns), np.column_stack([np.asarray(v, float) for v in columns.values()]))

    @property
    def n_blocks(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def column(self, label) -> np.ndarray:
        return self.values[:, self.labels.index(label)]


def _doubled_ranks(x) -> np.ndarray:
    return np.rint(2.0 * sps.rankdata(x, method="average")).astype(np.int64)


# ----------------------------------------------------------------- KS

def ks_normality(samples, alpha: float = 0.05) -> TestResult:
    """One-sample KS against a normal with the sample's own mean and standard
    deviation; p from the asymptotic Kolmogorov distribution (no Lilliefors
    correction)."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 5:
        raise InsufficientDataError(f"KS normality needs at least 5 samples, got {n}")
    sd = x.std(ddof=1)
    # the mean of equal values can carry rounding error, so test spread directly
    if x.max() == x.min() or not sd > 0:
        raise DegenerateError("KS normality on a zero-variance sample")
    z = np.sort((x - x.mean()) / sd)
    cdf = special.ndtr(z)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n))
    p = special.kolmogorov(math.sqrt(n) * d)
    return _result("ks_normality", d, p, n, alpha, "asymptotic")


# ----------------------------------------------------------------- Friedman

def friedman_statistic(values) -> Fraction:
    """Tie-corrected Friedman chi-square as an exact fraction."""
    vals = np.asarray(values, dtype=float)
    n, k = vals.shape
    ranks2 = np.vstack([_doubled_ranks(row) for row in vals])
    col_sums = ranks2.sum(axis=0)
    chi2 = Fraction(3 * int(np.sum(col_sums * col_sums)), n * k * (k + 1)) - 3 * n * (k + 1)
    ties = 0
    for row in vals:
        _, counts = np.unique(row, return_counts=True)
        ties += int(np.sum(counts ** 3 - counts))
    correction = 1 - Fraction(ties, n * (k ** 3 - k))
    if correction == 0:
        return Fraction(0)
    return chi2 / correction


def friedman(data: PairedData, alpha: float = 0.05) -> TestResult:
    if not isinstance(data, PairedData):
        data = PairedData(tuple(range(np.asarray(data).shape[1])), data)
    n, k = data.values.shape
    if k < 2 or n < 2:
        raise InsufficientDataError(f"Friedman needs >= 2 treatments and >= 2 blocks, got k={k}, n={n}")
    chi2 = friedman_statistic(data.values)
    p = 1.0 if chi2 == 0 else sps.chi2.sf(float(chi2), k - 1)
    return _result("friedman", float(chi2), p, n, alpha, "chi2")


# ----------------------------------------------------------------- Wilcoxon

def _signed_rank_parts(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"paired samples differ in length ({a.size} vs {b.size})")
    d = a - b
    d = d[d != 0]
    if d.size == 0:
        raise DegenerateError("all paired differences are zero")
    ranks2 = _doubled_ranks(np.abs(d))
    return d, ranks2


def exact_p_counts(ranks2, w2: int) -> float:
    """Two-sided exact p by counting sign assignments with a rank-sum DP.

    ``ranks2`` are doubled ranks, ``w2`` the doubled observed min(W+, W-).
    """
    ranks2 = [int(r) for r in ranks2]
    total = sum(ranks2)
    counts = [0] * (total + 1)
    counts[0] = 1
    reach = 0
    for r in ranks2:
        for s in range(reach, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        reach += r
    extreme = sum(c for s, c in enumerate(counts) if min(s, total - s) <= w2)
    return extreme / 2 ** len(ranks2)


def enumeration_p(ranks2, w2: int) -> float:
    """Two-sided exact p by visiting every one of the 2^n sign assignments."""
    ranks2 = [int(r) for r in ranks2]
    total = sum(ranks2)
    extreme = 0
    for signs in itertools.product((0, 1), repeat=len(ranks2)):
        wp = sum(r for r, s in zip(ranks2, signs) if s)
        if min(wp, total - wp) <= w2:
            extreme += 1
    return extreme / 2 ** len(ranks2)


def wilcoxon_signed_rank(a, b, alpha: float = 0.05, exact_max_n: int = EXACT_MAX_N) -> TestResult:
    """Paired signed-rank test, zero differences discarded before ranking.

    The statistic is Z = (W+ - n(n+1)/4) / sqrt(n(n+1)(2n+1)/24), so its sign
    says which of W+ and W- is the smaller. For n <= 12 the p value is exact,
    otherwise from the normal approximation.
    """
    d, ranks2 = _signed_rank_parts(a, b)
    n = d.size
    if n < 5:
        raise InsufficientDataError(f"Wilcoxon needs at least 5 nonzero differences, got {n}")
    wp2 = int(ranks2[d > 0].sum())
    wm2 = int(ranks2[d < 0].sum())
    mu = n * (n + 1) / 4.0
    sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0)
    z = (wp2 / 2.0 - mu) / sigma
    if n <= exact_max_n:
        p = exact_p_counts(ranks2, min(wp2, wm2))
        method = "exact"
    else:
        p = 2.0 * special.ndtr(-abs(z))
        method = "normal"
    return _result("wilcoxon", z, p, n, alpha, method)


def bonferroni(alpha_family: float, m: int) -> float:
    if m < 1:
        raise ArityError(f"Bonferroni needs at least one comparison, got m={m}")
    if not 0 < alpha_family <= 1:
        raise ConfigError(f"family alpha must lie in (0, 1], got {alpha_family}")
    return alpha_family / m


# ----------------------------------------------------------------- pipeline

@dataclass
class ReportRow:
    metric: str
    test: str
    condition_a: str
    condition_b: str
    statistic: float
    p: float
    alpha_used: float
    significant: bool
    n: int
    method: str
    note: str = ""


@dataclass
class AnalysisReport:
    alpha: float
    per_comparison_alpha: float
    n_comparisons: int
    rows: list = field(default_factory=list)

    def by_test(self, test: str, metric: str | None = None) -> list:
        return [r for r in self.rows if r.test == test and (metric is None or r.metric == metric)]


REPORT_COLUMNS = ["test", "condition_a", "condition_b", "statistic", "p", "alpha_used", "significant",
                  "metric", "n", "method", "note"]


def compare_conditions(data: PairedData, alpha: float = 0.05, metric: str = "") -> AnalysisReport:
    """KS per condition, then Friedman, then every pairwise Wilcoxon at the
    Bonferroni-corrected threshold, in that order.

    Degenerate or undersized sub-tests are recorded as non-significant rows
    with a note instead of aborting the analysis.
    """
    if data.k < 2:
        raise ShapeError(f"comparison needs at least 2 conditions, got {data.k}")
    pairs = list(itertools.combinations(data.labels, 2))
    per_pair = bonferroni(alpha, len(pairs))
    report = AnalysisReport(alpha, per_pair, len(pairs))
    nan = float("nan")

    for label in data.labels:
        try:
            r = ks_normality(data.column(label), alpha)
            report.rows.append(ReportRow(metric, "ks_normality", label, "", r.statistic, r.p_value, alpha,
                                         r.significant, r.n, r.method,
                                         "fitted-parameter normal, no Lilliefors correction"))
        except (DegenerateError, InsufficientDataError) as exc:
            report.rows.append(ReportRow(metric, "ks_normality", label, "", nan, nan, alpha, False,
                                         data.n_blocks, "skipped", f"ks stage: {exc}"))

    try:
        r = friedman(data, alpha)
        report.rows.append(ReportRow(metric, "friedman", "all", "", r.statistic, r.p_value, alpha,
                                     r.significant, r.n, r.method))
    except InsufficientDataError as exc:
        report.rows.append(ReportRow(metric, "friedman", "all", "", nan, nan, alpha, False,
                                     data.n_blocks, "skipped", f"friedman stage: {exc}"))

    for a, b in pairs:
        try:
            r = wilcoxon_signed_rank(data.column(a), data.column(b), per_pair)
            report.rows.append(ReportRow(metric, "wilcoxon", a, b, r.statistic, r.p_value, per_pair,
                                         r.significant, r.n, r.method))
        except DegenerateError:
            report.rows.append(ReportRow(metric, "wilcoxon", a, b, 0.0, 1.0, per_pair, False, 0,
                                         "degenerate", "all paired differences are zero"))
        except InsufficientDataError as exc:
            report.rows.append(ReportRow(metric, "wilcoxon", a, b, nan, nan, per_pair, False,
                                         data.n_blocks, "skipped", f"wilcoxon stage: {exc}"))
    return report


def _fmt_num(x: float, digits: int = 4) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.{digits}g}" if abs(x) >= 1e-3 or x == 0 else f"{x:.3e}"


def report_csv_rows(report: AnalysisReport) -> list[list[str]]:
    rows = []
    for r in report.rows:
        rows.append([r.test, r.condition_a, r.condition_b, repr(float(r.statistic)), repr(float(r.p)),
                     f"{r.alpha_used:.4f}", "true" if r.significant else "false", r.metric, str(r.n),
                     r.method, r.note])
    return rows


def format_p(p: float) -> str:
    if math.isnan(p):
        return "n/a"
    return "< 0.001" if p < 0.001 else f"{p:.3f}"


def report_text(reports: dict[str, AnalysisReport]) -> str:
    """Aligned plain-text rendering: one significance table per metric group,
    pairs as columns and Z / p as rows."""
    if not reports:
        return ""
    first = next(iter(reports.values()))
    lines = [
        f"Family alpha = {first.alpha:g}; Bonferroni per-comparison threshold "
        f"(m = {first.n_comparisons}) = {first.per_comparison_alpha:.4f}",
        "",
        "Normality (Kolmogorov-Smirnov, fitted normal, asymptotic p):",
    ]
    for metric, rep in reports.items():
        for r in rep.by_test("ks_normality"):
            status = "normal not rejected" if not r.significant and not math.isnan(r.p) else (
                "non-normal" if r.significant else r.note)
            lines.append(f"  {metric:<16} {r.condition_a:<12} D = {_fmt_num(r.statistic)}  p = {format_p(r.p)}  ({status})")
    lines += ["", "Friedman:"]
    for metric, rep in reports.items():
        for r in rep.by_test("friedman"):
            sig = "significant" if r.significant else "not significant"
            lines.append(f"  {metric:<16} chi2 = {_fmt_num(r.statistic)}  p = {format_p(r.p)}  n = {r.n}  ({sig})")
    lines += ["", "Pairwise Wilcoxon signed-rank:"]
    metrics = list(reports)
    pairs = [(r.condition_a, r.condition_b) for r in reports[metrics[0]].by_test("wilcoxon")]
    header = ["", *[f"{a}/{b}" for a, b in pairs for _ in metrics]]
    sub = ["", *[m for _ in pairs for m in metrics]]
    zrow, prow = ["Z"], ["p"]
    for a, b in pairs:
        for m in metrics:
            row = next(r for r in reports[m].by_test("wilcoxon") if (r.condition_a, r.condition_b) == (a, b))
            zrow.append(_fmt_num(row.statistic))
            prow.append(format_p(row.p) + ("*" if row.significant else ""))
    table = [header, sub, zrow, prow]
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    for r in table:
        lines.append("  " + " | ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
    lines.append(f"  (* significant at p < {first.per_comparison_alpha:.4f})")
    return "\n".join(lines) + "\n"


__all__ = [
    "TestResult", "PairedData", "ks_normality", "friedman", "friedman_statistic", "wilcoxon_signed_rank",
    "exact_p_counts", "enumeration_p", "bonferroni", "compare_conditions", "AnalysisReport", "ReportRow",
    "REPORT_COLUMNS", "report_csv_rows", "report_text", "TeleopError",
]
