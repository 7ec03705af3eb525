# app/utils/oracle.py
"""
Exact combinatorics behind the variance identities, closed-form kernel
profiles, and brute-force complete-U estimators used as ground truth.

Coefficients are Fractions built from big-integer binomials; they only turn
into floats when multiplied by float inputs.
"""
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from numbers import Rational, Real
from typing import Sequence

import numpy as np

from app.core.dataset import Dataset, TargetPoint, as_target
from app.core.errors import CombinatorialBlowup, IndexOutOfRange, KTooLarge, KTooLargeForVh
from app.core.random_stream import RandomStream
from app.utils.kernels import Kernel, MeanKernel, OneNNKernel

logger = logging.getLogger(__name__)

MAX_COMPLETE_SUBSETS = 100_000
MAX_DISJOINT_PAIRS = 50_000_000
MAX_PAIRWISE_SUBSETS = 5_000


def _exact(value: Real) -> Real:
    return Fraction(value) if isinstance(value, Rational) else value


@dataclass(frozen=True)
class XiProfile:
    """
    xi[d] = covariance of two kernels sharing d samples (xi[0] = 0),
    xi_tilde[d] = v_h - xi[d] = expected conditional variance, v_h = xi[k].
    """

    xi: tuple
    xi_tilde: tuple
    v_h: Real

    def __post_init__(self):
        if len(self.xi) < 2 or len(self.xi) != len(self.xi_tilde):
            raise ValueError("profile needs xi and xi_tilde of equal length k+1 >= 2")
        if self.xi[0] != 0:
            raise ValueError(f"xi[0] must be 0, got {self.xi[0]}")
        if self.v_h != self.xi[-1]:
            raise ValueError("v_h must equal xi[k]")
        tol = 1e-12 * max(1.0, abs(float(self.v_h)))
        for d, (x, xt) in enumerate(zip(self.xi, self.xi_tilde)):
            if abs(float(self.v_h - x - xt)) > tol or float(xt) < -tol:
                raise ValueError(f"xi_tilde[{d}] must equal v_h - xi[{d}] and be non-negative")

    @property
    def k(self) -> int:
        return len(self.xi) - 1

    @classmethod
    def from_xi(cls, xi: Sequence[Real]) -> "XiProfile":
        xi = tuple(_exact(v) for v in xi)
        v_h = xi[-1]
        return cls(xi=xi, xi_tilde=tuple(v_h - v for v in xi), v_h=v_h)


def gamma_coeff(n: int, k: int, d: int) -> Fraction:
    """P(|S ∩ S'| = d) for two independent uniform size-k subsets of n (hypergeometric mass)."""
    if not 0 <= d <= k <= n:
        raise IndexOutOfRange(f"need 0 <= d <= k <= n, got n={n}, k={k}, d={d}")
    return Fraction(comb(k, d) * comb(n - k, k - d), comb(n, k))


def gammas(n: int, k: int) -> list[Fraction]:
    return [gamma_coeff(n, k, d) for d in range(k + 1)]


def _check_profile(k: int, xi: XiProfile) -> None:
    if xi.k != k:
        raise IndexOutOfRange(f"profile has order {xi.k}, expected k={k}")


def hoeffding_variance(n: int, k: int, xi: XiProfile) -> Real:
    """Var(U_n) = sum_{d>=1} gamma_d xi_d."""
    _check_profile(k, xi)
    return sum((gamma_coeff(n, k, d) * xi.xi[d] for d in range(1, k + 1)), Fraction(0))


def vs_from_profile(n: int, k: int, xi: XiProfile) -> Real:
    """V_s = sum_{d>=0} gamma_d xi_tilde_d."""
    _check_profile(k, xi)
    return sum((gamma_coeff(n, k, d) * xi.xi_tilde[d] for d in range(k + 1)), Fraction(0))


def vh_minus_vs_identity(n: int, k: int, xi: XiProfile) -> Real:
    """Var(U_n) through the tree-variance route: v_h - V_s."""
    return xi.v_h - vs_from_profile(n, k, xi)


def delta_bm(m: int, b: int) -> Fraction:
    return Fraction(m - 1, m * b - 1)


def matched_variance_closed_form(n: int, k: int, m: int, b: int, xi: XiProfile) -> Real:
    """Var(U_match) = (1 - 1/B) Var(U_n) + V_h / (MB); M = 1 gives the independent-subset law."""
    return (1 - Fraction(1, b)) * hoeffding_variance(n, k, xi) + Fraction(1, m * b) * xi.v_h


def expected_vs_matched(n: int, k: int, m: int, b: int, xi: XiProfile) -> Real:
    """E[V̂s_B] = (1 - δ) V_s + δ V_h."""
    delta = delta_bm(m, b)
    return (1 - delta) * vs_from_profile(n, k, xi) + delta * xi.v_h


def double_u_weights(n: int, k: int) -> list[Fraction]:
    """Weights w_0..w_k of the variance estimator written as a weighted average of U-statistics."""
    if k < 1 or 2 * k > n:
        raise KTooLarge(f"double-U weights need 1 <= k <= n/2, got n={n}, k={k}")
    c_nk = comb(n, k)
    lead = Fraction(comb(n, 2 * k), c_nk * c_nk)
    weights = [
        (Fraction(1, c_nk) - Fraction(1, comb(n - k, k))) * Fraction(comb(n, 2 * k) * comb(2 * k, k), c_nk)
    ]
    for d in range(1, k + 1):
        pairs_in_2k = comb(2 * k, d) * comb(2 * k - d, d) * comb(2 * k - 2 * d, k - d)
        weights.append(lead * Fraction(pairs_in_2k, comb(n - 2 * k + d, d)))
    return weights


def mean_kernel_profile(n: int, k: int, sigma2: Real = 1) -> XiProfile:
    if not 1 <= k <= n:
        raise IndexOutOfRange(f"need 1 <= k <= n, got n={n}, k={k}")
    sigma2 = _exact(sigma2)
    return XiProfile.from_xi([sigma2 * Fraction(d, k * k) for d in range(k + 1)])


def one_nn_weights(n: int, k: int) -> list[Fraction]:
    """a_i = P(the i-th closest row is the closest row of a random size-k subset), i = 1..n-k+1."""
    if not 1 <= k <= n:
        raise IndexOutOfRange(f"need 1 <= k <= n, got n={n}, k={k}")
    c_nk = comb(n, k)
    return [Fraction(comb(n - i, k - 1), c_nk) for i in range(1, n - k + 2)]


def one_nn_profile(n: int, k: int, sigma2: Real = 1) -> XiProfile:
    """
    Profile of the 1-NN kernel with fixed, distance-ordered x and independent
    responses of variance sigma2: xi_d is sigma2 times the share of overlap-d
    pairs whose closest rows coincide.
    """
    if not 1 <= k <= n:
        raise IndexOutOfRange(f"need 1 <= k <= n, got n={n}, k={k}")
    sigma2 = _exact(sigma2)
    c_nk = comb(n, k)
    xi = [sigma2 * 0]
    for d in range(1, k + 1):
        shared_min = sum(
            comb(n - i, k - 1) * comb(k - 1, d - 1) * comb(n - i - (k - 1), k - d) for i in range(1, n - k + 2)
        )
        n_pairs = c_nk * comb(k, d) * comb(n - k, k - d)
        xi.append(sigma2 * Fraction(shared_min, n_pairs) if n_pairs else sigma2 * 0)
    return XiProfile.from_xi(xi)


# --- brute force over all subsets --------------------------------------------------


def _default_target(data: Dataset, x) -> TargetPoint:
    return as_target(data.features.mean(axis=0) if x is None else x)


def _all_subsets(n: int, k: int) -> np.ndarray:
    count = comb(n, k)
    if count > MAX_COMPLETE_SUBSETS:
        raise CombinatorialBlowup(f"C({n},{k}) = {count} exceeds the enumeration cap {MAX_COMPLETE_SUBSETS}")
    return np.array(list(itertools.combinations(range(n), k)), dtype=np.int64).reshape(count, k)


def complete_kernel_values(
    data: Dataset, kernel: Kernel, k: int, x=None, rs: RandomStream | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """All C(n,k) subsets in lexicographic order and the kernel value on each."""
    subsets = _all_subsets(data.n, k)
    x = _default_target(data, x)
    rs = rs or RandomStream(0)
    values = np.array([kernel.evaluate(data, s, x, rs.split([r])) for r, s in enumerate(subsets)])
    return subsets, values


def complete_vs_bruteforce(data: Dataset, kernel: Kernel, k: int, x=None, rs: RandomStream | None = None) -> float:
    """V̂s = C(n,k)^-1 sum_i (h(S_i) - U_n)^2."""
    _, values = complete_kernel_values(data, kernel, k, x, rs)
    centered = values - values.mean()
    return float(np.mean(centered * centered))


def _colex_table(n: int, k: int) -> np.ndarray:
    return np.array([[comb(c, j) for j in range(k + 1)] for c in range(n)], dtype=np.int64)


def _vh_from_values(n: int, k: int, subsets: np.ndarray, values: np.ndarray) -> float:
    if 2 * k > n:
        raise KTooLargeForVh(f"disjoint pairs need k <= n/2, got n={n}, k={k}")
    partners_per_subset = comb(n - k, k)
    if len(subsets) * partners_per_subset > MAX_DISJOINT_PAIRS:
        raise CombinatorialBlowup(f"{len(subsets) * partners_per_subset} disjoint pairs exceed {MAX_DISJOINT_PAIRS}")

    table = _colex_table(n, k)
    cols = np.arange(1, k + 1)
    by_rank = np.empty_like(values)
    by_rank[table[subsets, cols].sum(axis=1)] = values

    partner_pos = np.array(list(itertools.combinations(range(n - k), k)), dtype=np.int64)
    everyone = np.arange(n)
    total = 0.0
    for s, h in zip(subsets, values):
        partners = np.setdiff1d(everyone, s, assume_unique=True)[partner_pos]
        diffs = h - by_rank[table[partners, cols].sum(axis=1)]
        total += float(np.dot(diffs, diffs)) / 2.0
    return total / (len(subsets) * partners_per_subset)


def complete_vh_bruteforce(data: Dataset, kernel: Kernel, k: int, x=None, rs: RandomStream | None = None) -> float:
    """V̂h = average of (h(S_i) - h(S_j))^2 / 2 over ordered disjoint pairs."""
    if 2 * k > data.n:
        raise KTooLargeForVh(f"disjoint pairs need k <= n/2, got n={data.n}, k={k}")
    subsets, values = complete_kernel_values(data, kernel, k, x, rs)
    return _vh_from_values(data.n, k, subsets, values)


def complete_variance_bruteforce(data: Dataset, kernel: Kernel, k: int, x=None, rs: RandomStream | None = None) -> float:
    """Unbiased complete-U estimate V̂h - V̂s."""
    if 2 * k > data.n:
        raise KTooLargeForVh(f"disjoint pairs need k <= n/2, got n={data.n}, k={k}")
    subsets, values = complete_kernel_values(data, kernel, k, x, rs)
    centered = values - values.mean()
    return _vh_from_values(data.n, k, subsets, values) - float(np.mean(centered * centered))


@dataclass(frozen=True)
class PairwiseEstimates:
    xi_tilde_hat: np.ndarray  # indexed by overlap d; NaN where no pair exists
    pair_counts: np.ndarray   # ordered pairs with overlap d


def complete_xi_tilde_bruteforce(
    data: Dataset, kernel: Kernel, k: int, x=None, rs: RandomStream | None = None
) -> PairwiseEstimates:
    """ξ̂̃_d = N_d^-1 sum over ordered pairs with |S_i ∩ S_j| = d of (h(S_i) - h(S_j))^2 / 2."""
    if comb(data.n, k) > MAX_PAIRWISE_SUBSETS:
        raise CombinatorialBlowup(f"C({data.n},{k}) exceeds the pairwise cap {MAX_PAIRWISE_SUBSETS}")
    subsets, values = complete_kernel_values(data, kernel, k, x, rs)

    membership = np.zeros((len(subsets), data.n), dtype=np.float64)
    np.put_along_axis(membership, subsets, 1.0, axis=1)

    sums = np.zeros(k + 1)
    counts = np.zeros(k + 1, dtype=np.int64)
    chunk = max(1, 2_000_000 // len(subsets))
    for start in range(0, len(subsets), chunk):
        rows = slice(start, start + chunk)
        overlap = np.rint(membership[rows] @ membership.T).astype(np.int64)
        half_sq = (values[rows, None] - values[None, :]) ** 2 / 2.0
        sums += np.bincount(overlap.ravel(), weights=half_sq.ravel(), minlength=k + 1)
        counts += np.bincount(overlap.ravel(), minlength=k + 1)

    with np.errstate(invalid="ignore", divide="ignore"):
        xi_tilde_hat = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return PairwiseEstimates(xi_tilde_hat=xi_tilde_hat, pair_counts=counts)


# --- identity report ---------------------------------------------------------------


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    passed: bool
    detail: str = ""


def _check(name: str, failures: list[str]) -> IdentityCheck:
    return IdentityCheck(name, not failures, "; ".join(failures[:3]))


def run_identity_checks(max_n: int = 24) -> list[IdentityCheck]:
    checks: list[IdentityCheck] = []

    failures = [f"n={n},k={k}" for n in range(1, max_n + 1) for k in range(1, n + 1) if sum(gammas(n, k)) != 1]
    checks.append(_check("hypergeometric weights sum to one", failures))

    failures = [
        f"n={n},k={k},d={d}"
        for n in range(1, max_n + 1)
        for k in range(1, n + 1)
        for d in range(0, min(k + 1, max(0, 2 * k - n)))
        if gamma_coeff(n, k, d) != 0
    ]
    checks.append(_check("overlaps below 2k-n have zero weight", failures))

    sum_failures, sign_failures, gamma_failures = [], [], []
    for n in range(2, max_n + 1):
        for k in range(1, n // 2 + 1):
            w = double_u_weights(n, k)
            if sum(w) != 0:
                sum_failures.append(f"n={n},k={k}")
            if any(wd <= 0 for wd in w[1:]):
                sign_failures.append(f"n={n},k={k}")
            if any(w[d] != gamma_coeff(n, k, d) for d in range(1, k + 1)):
                gamma_failures.append(f"n={n},k={k}")
    checks.append(_check("double-U weights sum to zero", sum_failures))
    checks.append(_check("double-U weights positive for d >= 1", sign_failures))
    checks.append(_check("double-U weights equal overlap weights for d >= 1", gamma_failures))

    failures = []
    for n in range(1, max_n + 1):
        for k in range(1, n + 1):
            profile = mean_kernel_profile(n, k)
            if hoeffding_variance(n, k, profile) != Fraction(1, n) or vh_minus_vs_identity(n, k, profile) != Fraction(1, n):
                failures.append(f"n={n},k={k}")
    checks.append(_check("mean kernel variance is sigma^2/n by both routes", failures))

    failures = []
    for n in range(1, max_n + 1):
        for k in range(1, n + 1):
            a = one_nn_weights(n, k)
            if sum(a) != 1 or hoeffding_variance(n, k, one_nn_profile(n, k)) != sum(ai * ai for ai in a):
                failures.append(f"n={n},k={k}")
    checks.append(_check("1-NN weights sum to one and give sigma^2 sum a_i^2", failures))

    golden = Dataset(features=[[0.0], [1.0], [2.0], [3.0]], response=[1.0, 2.0, 3.0, 4.0])
    mean_kernel = MeanKernel()
    vh = complete_vh_bruteforce(golden, mean_kernel, 2)
    vs = complete_vs_bruteforce(golden, mean_kernel, 2)
    failures = []
    if abs(vh - 5 / 6) > 1e-12 or abs(vs - 5 / 12) > 1e-12 or abs((vh - vs) - (5 / 3) / 4) > 1e-12:
        failures.append(f"vh={vh!r}, vs={vs!r}")
    checks.append(_check("complete estimator on y=(1,2,3,4), k=2 equals s^2/n", failures))

    rng = RandomStream(2024).generator()
    sample = Dataset(features=rng.uniform(size=(7, 1)), response=rng.normal(size=7))
    failures = []
    for kernel in (mean_kernel, OneNNKernel()):
        pairwise = complete_xi_tilde_bruteforce(sample, kernel, 3, x=[0.5])
        regrouped = sum(
            float(gamma_coeff(7, 3, d)) * pairwise.xi_tilde_hat[d] for d in range(4) if pairwise.pair_counts[d]
        )
        direct = complete_vs_bruteforce(sample, kernel, 3, x=[0.5])
        if abs(regrouped - direct) > 1e-12 * max(1.0, abs(direct)):
            failures.append(f"{kernel.name}: {regrouped!r} vs {direct!r}")
    checks.append(_check("sample variance of all kernels regroups into overlap estimators", failures))

    logger.info("oracle identities: %d/%d passed", sum(c.passed for c in checks), len(checks))
    return checks


def format_tap(checks: list[IdentityCheck]) -> str:
    lines = ["TAP version 13", f"1..{len(checks)}"]
    for i, check in enumerate(checks, start=1):
        status = "ok" if check.passed else "not ok"
        suffix = f" # {check.detail}" if check.detail and not check.passed else ""
        lines.append(f"{status} {i} - {check.name}{suffix}")
    return "\n".join(lines)
