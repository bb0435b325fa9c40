"""Welch's t-test, Fréchet distance, and the feature-alignment workflow.

The t-distribution tail is evaluated through the regularized incomplete
beta function (continued fraction, absolute accuracy ~1e-10) rather than
through an external statistics package, so tests can hold it against an
independent reference.

The alignment workflow reproduces a before/after comparison: features
whose distributions differ significantly between two groups before an
intervention form the set R; the subset Z of R that no longer differs
afterwards measures how much of the original mismatch was removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .radiomics import FeatureTable

_BETA_EPS = 1e-12
_BETA_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("incomplete beta needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, dof: float) -> float:
    """P(|T| >= |t|) for T ~ Student-t with dof degrees of freedom."""
    if dof <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t))


@dataclass(frozen=True)
class WelchResult:
    t_stat: float
    dof: float
    p_value: float

    def __post_init__(self):
        if not self.dof > 0:
            raise ValueError(f"dof must be positive, got {self.dof}")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value must be in [0, 1], got {self.p_value}")


def welch_test(a, b) -> WelchResult:
    """Two-sided Welch's t-test (unequal variances, Welch-Satterthwaite dof).

    Degenerate samples with zero variance on both sides fall back to the
    documented conventions: p = 1 for equal means, p = 0 otherwise.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError(f"each sample needs at least 2 values, got {na} and {nb}")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    if va == 0.0 and vb == 0.0:
        dof = float(na + nb - 2)
        if ma == mb:
            return WelchResult(0.0, dof, 1.0)
        return WelchResult(math.copysign(math.inf, ma - mb), dof, 0.0)
    se2 = va / na + vb / nb
    t = (ma - mb) / math.sqrt(se2)
    dof = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    p = min(1.0, max(0.0, student_t_two_sided_p(t, dof)))
    return WelchResult(t, dof, p)


def frechet_distance(mu_r, cov_r, mu_g, cov_g) -> float:
    """Fréchet distance between two Gaussians (squared, as used for FID).

    ||mu_r - mu_g||^2 + Tr(C_r + C_g - 2 (C_r C_g)^{1/2}), with the cross
    term evaluated exactly through the symmetric PSD form
    C_r^{1/2} C_g C_r^{1/2}; eigenvalues are clamped at zero to absorb
    numerical dust.
    """
    mu_r = np.atleast_1d(np.asarray(mu_r, dtype=np.float64))
    mu_g = np.atleast_1d(np.asarray(mu_g, dtype=np.float64))
    cov_r = np.atleast_2d(np.asarray(cov_r, dtype=np.float64))
    cov_g = np.atleast_2d(np.asarray(cov_g, dtype=np.float64))
    k = mu_r.size
    if mu_g.size != k or cov_r.shape != (k, k) or cov_g.shape != (k, k):
        raise ValueError(
            f"dimension mismatch: means {mu_r.size}/{mu_g.size}, "
            f"covariances {cov_r.shape}/{cov_g.shape}")
    for name, cov in (("cov_r", cov_r), ("cov_g", cov_g)):
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > 1e-8 * scale:
            raise ValueError(f"{name} is not symmetric within tolerance")

    def psd_sqrt(mat):
        vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
        return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T

    root_r = psd_sqrt(cov_r)
    inner = root_r @ cov_g @ root_r
    vals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    tr_sqrt = float(np.sqrt(np.clip(vals, 0.0, None)).sum())
    diff = mu_r - mu_g
    return float(diff @ diff + np.trace(cov_r) + np.trace(cov_g) - 2.0 * tr_sqrt)


@dataclass
class AlignmentReport:
    """Per-feature Welch results with the sets R and Z.

    ``after`` holds results only for features in R (the after-phase is run
    on the previously misaligned subset). ``percentage`` is None when R is
    empty, in which case the alignment rate is undefined.
    """

    features: list[str]
    alpha: float
    before: dict[str, WelchResult]
    after: dict[str, WelchResult]
    r_features: list[str]
    z_features: list[str]
    percentage: float | None

    def __post_init__(self):
        if not set(self.z_features) <= set(self.r_features) <= set(self.features):
            raise ValueError("expected Z within R within the feature set")

    def summary_text(self) -> str:
        lines = [f"features tested: {len(self.features)}",
                 f"significance threshold: p < {self.alpha:g}",
                 f"misaligned before (R): {len(self.r_features)}"
                 + (f" [{', '.join(self.r_features)}]" if self.r_features else ""),
                 f"aligned after (Z): {len(self.z_features)}"
                 + (f" [{', '.join(self.z_features)}]" if self.z_features else "")]
        if self.percentage is None:
            lines.append("alignment percentage: undefined (R is empty)")
        else:
            lines.append(f"alignment percentage: {self.percentage:.2f}")
        return "\n".join(lines)


def alignment_workflow(before: tuple[FeatureTable, FeatureTable],
                       after: tuple[FeatureTable, FeatureTable],
                       alpha: float = 0.01) -> AlignmentReport:
    """Welch-test every feature before and after; report R, Z, and the rate.

    ``before`` compares the two original groups; ``after`` compares the
    intervention output against the target group. The after tables must
    cover at least the features found misaligned before.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    ba, bb = before
    aa, ab = after
    if ba.features != bb.features:
        raise ValueError("before-tables disagree on feature names")
    if aa.features != ab.features:
        raise ValueError("after-tables disagree on feature names")
    features = list(ba.features)

    before_results = {f: welch_test(ba.column(f), bb.column(f)) for f in features}
    r_features = [f for f in features if before_results[f].p_value < alpha]
    missing = [f for f in r_features if f not in aa.features]
    if missing:
        raise ValueError(f"after-tables are missing misaligned features: {missing}")

    after_results = {f: welch_test(aa.column(f), ab.column(f)) for f in r_features}
    z_features = [f for f in r_features if after_results[f].p_value >= alpha]
    percentage = 100.0 * len(z_features) / len(r_features) if r_features else None
    return AlignmentReport(features, alpha, before_results, after_results,
                           r_features, z_features, percentage)
