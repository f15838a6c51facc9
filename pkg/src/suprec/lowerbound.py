"""Lower-bound numerics: Gram spectra, Gaussian KL chain, Wishart moments, sample counts."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .datagen import SupportSet
from .errors import DegenerateInputError, InvalidConfigError, InvalidInputError
from .jacobi import jacobi_eigenvalues, min_eig_symmetric

CHAIN_RTOL = 1e-9
PD_RTOL = 1e-12
DEFAULT_C_LOWER = 1 / 8


@dataclass(frozen=True, eq=False)
class EigenSpectrum:
    eigenvalues: np.ndarray  # descending

    def __post_init__(self):
        ev = self.eigenvalues
        if np.any(np.diff(ev) > 0):
            raise InvalidInputError("eigenvalues must be sorted in descending order")


def gram_spectrum(phi_s: np.ndarray) -> EigenSpectrum:
    """Spectrum of ``phi_s @ phi_s.T``, descending (length ``m``)."""
    phi_s = np.asarray(phi_s, dtype=float)
    if not np.all(np.isfinite(phi_s)):
        raise InvalidInputError("matrix has non-finite entries")
    gram = phi_s @ phi_s.T
    gram = 0.5 * (gram + gram.T)
    ev = jacobi_eigenvalues(gram)
    tol = 1e-10 * max(np.abs(gram).max(initial=0.0), np.finfo(float).tiny)
    if ev[-1] < -tol:
        raise InvalidInputError("Gram spectrum has a negative eigenvalue beyond tolerance")
    return EigenSpectrum(ev)


def _pd_threshold(mats: np.ndarray) -> np.ndarray:
    m = mats.shape[-1]
    return PD_RTOL * np.einsum("...ii->...", mats) / m


def _logdet_chol(mats: np.ndarray) -> np.ndarray:
    chol = np.linalg.cholesky(mats)
    return 2.0 * np.log(np.einsum("...ii->...i", chol)).sum(axis=-1)


def gaussian_kl(cov_p: np.ndarray, cov_q: np.ndarray) -> np.ndarray:
    """``KL(N(0, cov_p) || N(0, cov_q))`` (batched over leading axes)."""
    m = cov_p.shape[-1]
    trace = np.einsum("...ii->...", np.linalg.solve(cov_q, cov_p))
    return 0.5 * (_logdet_chol(cov_q) - _logdet_chol(cov_p) + trace - m)


def exact_gaussian_kl(phi: np.ndarray, s_u: SupportSet, s_0: SupportSet) -> float:
    """KL divergence between the measurement laws under supports ``s_u`` and ``s_0``.

    With the matrix fixed, ``y ~ N(0, A_S)`` where ``A_S = phi_S phi_S^T``.
    """
    a_u = phi[:, list(s_u.indices)] @ phi[:, list(s_u.indices)].T
    a_0 = phi[:, list(s_0.indices)] @ phi[:, list(s_0.indices)].T
    for a in (a_u, a_0):
        if min_eig_symmetric(0.5 * (a + a.T)) <= _pd_threshold(a):
            raise DegenerateInputError("Gram matrix is not positive definite")
    return float(gaussian_kl(a_u, a_0))


@dataclass(frozen=True)
class KLChainReport:
    exact_kl: float
    eig_bound: float
    ratio_bound: float
    hw_lhs: float
    hw_rhs: float
    # Valid upper bound on exact_kl: the trace inequality pairs the largest
    # eigenvalue of one matrix with the smallest of the other.
    reversed_pairing_bound: float

    @property
    def kl_le_eig(self) -> bool:
        return bool(_le(self.exact_kl, self.eig_bound))

    @property
    def eig_le_ratio(self) -> bool:
        return bool(_le(self.eig_bound, self.ratio_bound))

    @property
    def hw_holds(self) -> bool:
        return bool(_le(self.hw_lhs, self.hw_rhs))

    @property
    def violations(self) -> list[str]:
        names = ("kl_le_eig", "eig_le_ratio", "hw_holds")
        return [name for name in names if not getattr(self, name)]

    def to_json(self) -> dict:
        out = asdict(self)
        out.update(kl_le_eig=self.kl_le_eig, eig_le_ratio=self.eig_le_ratio,
                   hw_holds=self.hw_holds)
        return out


def _le(x, y, rtol: float = CHAIN_RTOL):
    return x <= y + rtol * np.maximum(np.abs(x), np.abs(y)) + 1e-300


def _swap_supports(k: int) -> tuple[list[int], list[int]]:
    """``S_0 = {0..k-1}`` and ``S_u`` with coordinate 0 swapped for coordinate ``k``."""
    s0 = list(range(k))
    return s0, [k] + s0[1:]


def kl_chain_arrays(phi: np.ndarray, k: int) -> dict[str, np.ndarray]:
    """Every quantity of the KL chain for a batch ``phi`` of shape ``(T, m, d)``."""
    s0, su = _swap_supports(k)
    a_0 = np.einsum("tmi,tni->tmn", phi[:, :, s0], phi[:, :, s0])
    a_u = np.einsum("tmi,tni->tmn", phi[:, :, su], phi[:, :, su])
    b = jacobi_eigenvalues(a_0)  # descending
    a = jacobi_eigenvalues(a_u)
    thr = _pd_threshold(a_0)
    if np.any(b[:, -1] <= thr) or np.any(a[:, -1] <= _pd_threshold(a_u)):
        raise DegenerateInputError("Gram matrix is not positive definite")
    exact = gaussian_kl(a_u, a_0)
    eig_bound = 0.5 * (np.log(b / a) - (1 - a / b)).sum(axis=-1)
    ratio_bound = 0.5 * ((a - b) ** 2 / (a * b)).sum(axis=-1)
    hw_lhs = ((a - b) ** 2).sum(axis=-1)
    diff = a_0 - a_u
    hw_rhs = np.einsum("tij,tij->t", diff, diff)
    b_rev = b[:, ::-1]
    reversed_bound = 0.5 * (np.log(b / a).sum(axis=-1) + (a / b_rev).sum(axis=-1) - a.shape[-1])
    return dict(exact_kl=exact, eig_bound=eig_bound, ratio_bound=ratio_bound,
                hw_lhs=hw_lhs, hw_rhs=hw_rhs, reversed_pairing_bound=reversed_bound)


def kl_chain(phi: np.ndarray, k: int) -> KLChainReport:
    """The KL chain for one ``m x d`` matrix with ``S_0 = {0..k-1}``, ``u = (0, k)``."""
    phi = np.asarray(phi, dtype=float)
    m, d = phi.shape
    if k + 1 > d:
        raise InvalidInputError(f"need d > k, got k={k}, d={d}")
    if m >= k:
        warnings.warn(f"m={m} >= k={k}: outside the measurement-starved regime", stacklevel=2)
    vals = kl_chain_arrays(phi[None], k)
    return KLChainReport(**{key: float(v[0]) for key, v in vals.items()})


def frobenius_swap_direct(phi: np.ndarray, k: int) -> float:
    """``||phi_0 phi_0^T - phi_k phi_k^T||_F^2`` by explicit entrywise sums."""
    u, v = phi[:, 0], phi[:, k]
    m = phi.shape[0]
    total = 0.0
    for r in range(m):
        for c in range(m):
            total += (u[r] * u[c] - v[r] * v[c]) ** 2
    return total


@dataclass(frozen=True)
class KLChainSuiteReport:
    m: int
    k: int
    d: int
    trials: int
    violations: dict[str, int]
    rejected: int
    max_exact_minus_eig: float
    max_exact_minus_reversed: float

    @property
    def passed(self) -> bool:
        return not any(self.violations.values())

    def to_json(self) -> dict:
        return {**asdict(self), "pass": self.passed}


def kl_chain_suite(m: int, k: int, d: int, trials: int, rng: np.random.Generator,
                   chunk: int = 20_000) -> KLChainSuiteReport:
    """Count chain violations over ``trials`` Gaussian ``N(0, 1/m)`` matrices."""
    if d <= k:
        raise InvalidInputError(f"need d > k, got k={k}, d={d}")
    counts = {"kl_le_eig": 0, "eig_le_ratio": 0, "hw_holds": 0, "kl_le_reversed": 0}
    worst_eig = worst_rev = -math.inf
    rejected = done = 0
    while done < trials:
        size = min(chunk, trials - done)
        phi = rng.standard_normal((size, m, d)) / math.sqrt(m)
        s0, su = _swap_supports(k)
        keep = _pd_mask(phi[:, :, s0]) & _pd_mask(phi[:, :, su])
        rejected += int((~keep).sum())
        phi = phi[keep]
        if phi.shape[0] == 0:
            continue
        v = kl_chain_arrays(phi, k)
        counts["kl_le_eig"] += int((~_le(v["exact_kl"], v["eig_bound"])).sum())
        counts["eig_le_ratio"] += int((~_le(v["eig_bound"], v["ratio_bound"])).sum())
        counts["hw_holds"] += int((~_le(v["hw_lhs"], v["hw_rhs"])).sum())
        counts["kl_le_reversed"] += int((~_le(v["exact_kl"], v["reversed_pairing_bound"])).sum())
        worst_eig = max(worst_eig, float((v["exact_kl"] - v["eig_bound"]).max()))
        worst_rev = max(worst_rev, float((v["exact_kl"] - v["reversed_pairing_bound"]).max()))
        done += phi.shape[0]
    return KLChainSuiteReport(m, k, d, trials, counts, rejected, worst_eig, worst_rev)


def _pd_mask(phi_s: np.ndarray) -> np.ndarray:
    gram = np.einsum("tmi,tni->tmn", phi_s, phi_s)
    return np.linalg.eigvalsh(gram)[:, 0] > _pd_threshold(gram)


def inverse_chi2_fourth_moment(k: int) -> float:
    """``E[X^-4]`` for ``X ~ chi-squared(k)``, finite for ``k > 8``."""
    if k <= 8:
        return math.inf
    return 1.0 / ((k - 2) * (k - 4) * (k - 6) * (k - 8))


@dataclass(frozen=True)
class WishartReport:
    k: int
    m: int
    trials: int
    estimate: float
    std_error: float
    bound_ratio: float
    status: str = "ok"
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def wishart_min_eig_inv4(k: int, m: int, trials: int, rng: np.random.Generator,
                         chunk: int = 20_000) -> WishartReport:
    """Monte Carlo ``E[lambda_min(Phi Phi^T)^-4]`` for ``m x k`` standard Gaussian ``Phi``."""
    if m < 1 or k < m or trials < 2:
        raise InvalidInputError(f"need 1 <= m <= k and trials >= 2, got m={m}, k={k}")
    notes = []
    if k - m <= 7:
        notes.append(f"k - m = {k - m} <= 7: the fourth inverse moment bound does not apply")
    values = np.empty(trials)
    for start in range(0, trials, chunk):
        size = min(chunk, trials - start)
        phi = rng.standard_normal((size, m, k))
        if m == 1:
            zmin = np.einsum("tmk,tmk->t", phi, phi)
        else:
            zmin = min_eig_symmetric(np.einsum("tik,tjk->tij", phi, phi))
        values[start:start + size] = zmin**-4.0
    est = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(trials))
    ratio = est * k**4 * (1 - m / k) ** 8
    return WishartReport(k, m, trials, est, se, ratio, "warning" if notes else "ok", notes)


@dataclass(frozen=True)
class SampleBoundResult:
    n_upper: float
    n_lower: float
    n_norm: float
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def sample_bounds(m: int, k: int, d: int, sigma2: float = 0.0, delta: float = 1 / 3,
                  c_upper: float = 1.0, lambda_min: float = 1.0, lambda_max: float = 1.0,
                  c_lower: float = DEFAULT_C_LOWER) -> SampleBoundResult:
    """Sufficient, necessary, and plotting-normalization sample counts (natural logs)."""
    if not 1 <= k <= d - 1:
        raise InvalidConfigError(f"need 1 <= k <= d - 1, got k={k}, d={d}")
    if m < 1:
        raise InvalidConfigError(f"need m >= 1, got {m}")
    if not 0 < delta < 1:
        raise InvalidConfigError(f"delta must lie in (0, 1), got {delta}")
    if not 0 < lambda_min <= lambda_max:
        raise InvalidConfigError("need 0 < lambda_min <= lambda_max")
    ratio2 = (lambda_max / lambda_min) ** 2
    n_upper = c_upper * ratio2 * (k / m + 1 + sigma2 / lambda_max) ** 2 * math.log(k * (d - k) / delta)
    n_norm = fano_normalization(m, k, d)
    n_lower = c_lower * ratio2 * (k / m) ** 2 * math.log(d - k + 1)
    flags = []
    if m >= k / 2:
        flags.append("n_lower: outside lower-bound regime (requires m < k/2)")
    if m < math.log(k) ** 2:
        flags.append("n_upper: m < (log k)^2, below the regime the sufficiency proof covers")
    if sigma2 > 0:
        flags.append("n_lower: noiseless bound; sigma2 is ignored")
    return SampleBoundResult(n_upper, n_lower, n_norm, flags)


def fano_normalization(m: int, k: int, d: int) -> float:
    """``k^2 (1 - m/k)^4 / m^2 * log(k (d - k))``."""
    if not 1 <= k <= d - 1:
        raise InvalidConfigError(f"need 1 <= k <= d - 1, got k={k}, d={d}")
    return k**2 * (1 - m / k) ** 4 / m**2 * math.log(k * (d - k))


def trace_product_bound(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """``(Tr(AB), sum_i a_i b_i)`` with both spectra sorted descending."""
    ea = jacobi_eigenvalues(a)
    eb = jacobi_eigenvalues(b)
    return float(np.trace(a @ b)), float((ea * eb).sum())


def nonbinary_domination(phi: np.ndarray, k: int, lambda_min: float,
                         lambda_max: float) -> tuple[float, float]:
    """Minimum eigenvalue of ``Phi K Phi^T`` versus its domination bound.

    ``K`` puts ``lambda_max`` on the first ``k - 1`` coordinates and
    ``lambda_min`` on coordinate ``k``.  Returns ``(lambda_min(A), lambda_max *
    lambda_min(sum_{i<k-1} phi_i phi_i^T))``; the first is never smaller.
    """
    head = phi[:, : k - 1]
    base = head @ head.T
    a_lam = lambda_max * base + lambda_min * np.outer(phi[:, k], phi[:, k])
    return (min_eig_symmetric(0.5 * (a_lam + a_lam.T)),
            lambda_max * min_eig_symmetric(0.5 * (base + base.T)))
