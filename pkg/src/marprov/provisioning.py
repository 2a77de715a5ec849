"""Robust reservation: posterior demand quantiles and the slicing baseline.

Given a prediction vector scored by the channel triple (p, q, λ), the
posterior count of true key frames is the sum of two binomials — one over
predicted positives with success TPR, one over predicted negatives with
success 1-TNR.  The reservation covers the smallest count whose posterior
CDF reaches ε, mapped to bandwidth through the Shannon-rate constraint and
quantized to resource blocks.  The slicing baseline instead sizes one shared
reservation from population moments and a normal quantile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import ContractViolation


class DegenerateChannelError(ValueError):
    """tpr/tnr denominator vanished; the caller must use the λ∈{0,1} shortcut."""


@dataclass(frozen=True)
class ChannelParams:
    """Predictor-quality triple: p = P(â=1|a=1), q = P(â=0|a=0), λ = P(a=1)."""

    p: float
    q: float
    lam: float
    model_tag: str = "all"

    def __post_init__(self):
        for name in ("p", "q", "lam"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractViolation(f"{name} must lie in [0,1], got {v}")
        if self.model_tag not in ("D", "S", "all"):
            raise ContractViolation(f"unknown model tag {self.model_tag!r}")


@dataclass(frozen=True)
class RadioConfig:
    """Uplink radio parameters; SNR is stored in dB and used in linear form."""

    alpha: float = 5e6  # bits per key frame
    t_r: float = 0.02  # upload window, seconds
    gamma_db: float = 15.0
    epsilon: float = 0.8
    rb_bandwidth: float = 180e3
    rb_duration: float = 0.5e-3
    log_base: float = 2.0

    def __post_init__(self):
        if self.alpha <= 0 or self.t_r <= 0 or self.rb_bandwidth <= 0:
            raise ContractViolation("alpha, t_r and rb_bandwidth must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ContractViolation(f"epsilon must lie in (0,1), got {self.epsilon}")
        if self.log_base not in (2.0, math.e):
            raise ContractViolation("log_base must be 2 or e")

    @property
    def gamma_linear(self) -> float:
        return 10.0 ** (self.gamma_db / 10.0)


@dataclass(frozen=True)
class ProvisionDecision:
    """One device-slot reservation and its realized outcome."""

    slot_index: int
    k_star: int
    bandwidth_hz: float
    rb_count: int
    mode: str = "user-centric"
    timely: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("user-centric", "slicing"):
            raise ContractViolation(f"unknown mode {self.mode!r}")
        if self.k_star < 0:
            raise ContractViolation("k_star must be non-negative")


def tpr(c: ChannelParams) -> float:
    """Posterior probability that a predicted positive is a true key frame."""
    den = c.p * c.lam + (1.0 - c.q) * (1.0 - c.lam)
    if den == 0.0:
        raise DegenerateChannelError(
            f"tpr undefined: p*λ + (1-q)(1-λ) = 0 for p={c.p}, q={c.q}, λ={c.lam}"
        )
    return c.p * c.lam / den

def tnr(c: ChannelParams) -> float:
    """Posterior probability that a predicted negative is truly not a key frame."""
    den = c.q * (1.0 - c.lam) + (1.0 - c.p) * c.lam
    if den == 0.0:
        raise DegenerateChannelError(
            f"tnr undefined: q(1-λ) + (1-p)λ = 0 for p={c.p}, q={c.q}, λ={c.lam}"
        )
    return c.q * (1.0 - c.lam) / den


def posterior_cdf(k: int, a_hat: int, F: int, c: ChannelParams) -> float:
    """P(true key count ≤ k | a_hat predicted positives out of F).

    The literal double sum: Y ~ Binomial(a_hat, tpr) true positives among
    predicted positives, Z ~ Binomial(F-a_hat, 1-tnr) misses among predicted
    negatives, summed over all (j, k'-j) splits with k' ≤ k.
    """
    if not 0 <= a_hat <= F:
        raise ContractViolation(f"need 0 <= a_hat <= F, got a_hat={a_hat}, F={F}")
    if k < 0:
        raise ContractViolation("k must be non-negative")
    if c.lam == 1.0:
        # every frame is truly a key frame
        return 1.0 if k >= F else 0.0
    if c.lam == 0.0:
        return 1.0
    r_tp = tpr(c)
    r_tn = tnr(c)
    total = 0.0
    for kp in range(0, min(k, F) + 1):
        j_lo = max(0, kp - (F - a_hat))
        j_hi = min(a_hat, kp)
        for j in range(j_lo, j_hi + 1):
            y = math.comb(a_hat, j) * r_tp**j * (1.0 - r_tp) ** (a_hat - j)
            z = (
                math.comb(F - a_hat, kp - j)
                * (1.0 - r_tn) ** (kp - j)
                * r_tn ** (F - a_hat - kp + j)
            )
            total += y * z
    return min(1.0, total)


def _binom_pmf(n: int, s: float) -> list:
    """Binomial(n, s) pmf as a length-(n+1) list; log-space for stability."""
    if n == 0:
        return [1.0]
    if s <= 0.0:
        return [1.0] + [0.0] * n
    if s >= 1.0:
        return [0.0] * n + [1.0]
    ls, lq = math.log(s), math.log1p(-s)
    lg = [math.lgamma(i + 1) for i in range(n + 1)]
    lgn = lg[n]
    return [
        math.exp(lgn - lg[i] - lg[n - i] + i * ls + (n - i) * lq) for i in range(n + 1)
    ]


def posterior_cdf_table(a_hat: int, F: int, c: ChannelParams) -> list:
    """CDF values [g(0), ..., g(F)] via binomial-pmf convolution.

    The same double sum as :func:`posterior_cdf`, reassociated: the pmf of
    Y+Z is the convolution of the two binomial pmfs.  Used by k_star and the
    simulator; agreement with the literal sum is unit-tested.
    """
    if not 0 <= a_hat <= F:
        raise ContractViolation(f"need 0 <= a_hat <= F, got a_hat={a_hat}, F={F}")
    if c.lam == 1.0:
        return [0.0] * F + [1.0]
    if c.lam == 0.0:
        return [1.0] * (F + 1)
    py = _binom_pmf(a_hat, tpr(c))
    pz = _binom_pmf(F - a_hat, 1.0 - tnr(c))
    pmf = [0.0] * (F + 1)
    for j, yj in enumerate(py):
        if yj == 0.0:
            continue
        for i, zi in enumerate(pz):
            pmf[j + i] += yj * zi
    out = []
    acc = 0.0
    for v in pmf:
        acc += v
        out.append(min(1.0, acc))
    return out


def k_star(a_hat: int, F: int, c: ChannelParams, epsilon: float) -> int:
    """Least k in [0, F] whose posterior CDF reaches epsilon; ascending scan."""
    if not 0.0 < epsilon < 1.0:
        raise ContractViolation(f"epsilon must lie in (0,1), got {epsilon}")
    table = posterior_cdf_table(a_hat, F, c)
    for k, g in enumerate(table):
        if g >= epsilon:
            return k
    return F  # g(F) = 1 up to roundoff


def bandwidth_for_k(k: int, r: RadioConfig) -> tuple:
    """Least bandwidth whose slot capacity covers k key frames, plus its RB count.

    b = α·k / (T^r · log(1+γ)); this makes the rate constraint
    α·k ≤ T^r·b·log(1+γ) tight.  Returns (bandwidth_hz, rb_count).
    """
    if k < 0:
        raise ContractViolation("k must be non-negative")
    if k == 0:
        return 0.0, 0
    gamma = r.gamma_linear
    if gamma <= -1.0:
        raise ContractViolation("SNR must exceed -1 in linear form")
    log_term = math.log2(1.0 + gamma) if r.log_base == 2.0 else math.log(1.0 + gamma)
    b = r.alpha * k / (r.t_r * log_term)
    return b, math.ceil(b / r.rb_bandwidth)


def slot_capacity_k(bandwidth_hz: float, r: RadioConfig) -> int:
    """Largest key count a bandwidth can upload within the slot window."""
    if bandwidth_hz <= 0.0:
        return 0
    log_term = (
        math.log2(1.0 + r.gamma_linear)
        if r.log_base == 2.0
        else math.log(1.0 + r.gamma_linear)
    )
    return math.floor(r.t_r * bandwidth_hz * log_term / r.alpha + 1e-9)


def estimate_channel(history: Sequence, mode: str = "coarse") -> dict:
    """Add-one-smoothed (p, q, λ) from (a, â, tag) frame records.

    ``history`` holds the trailing window as an iterable of
    (a, a_hat, model_tag) triples.  Fine mode partitions by tag and returns
    {"D": ..., "S": ...}; coarse mode pools everything under "all".  Tags
    with no records sit at the smoothing priors (0.5, 0.5, 0.5).
    """
    if mode not in ("fine", "coarse"):
        raise ContractViolation(f"unknown estimation mode {mode!r}")
    tags = ("D", "S") if mode == "fine" else ("all",)
    counters = {t: [0, 0, 0, 0] for t in tags}  # TP, FN, TN, FP
    for a, a_hat, tag in history:
        t = tag if mode == "fine" else "all"
        if t not in counters:
            raise ContractViolation(f"unknown model tag {tag!r} in history")
        cnt = counters[t]
        if a == 1:
            if a_hat == 1:
                cnt[0] += 1
            else:
                cnt[1] += 1
        else:
            if a_hat == 0:
                cnt[2] += 1
            else:
                cnt[3] += 1
    out = {}
    for t, (tp, fn, tn, fp) in counters.items():
        total = tp + fn + tn + fp
        out[t] = ChannelParams(
            p=(tp + 1) / (tp + fn + 2),
            q=(tn + 1) / (tn + fp + 2),
            lam=(tp + fn + 1) / (total + 2),
            model_tag=t,
        )
    return out


def estimate_population_moments(counts: Sequence) -> tuple:
    """Sample mean and unbiased variance of pooled per-slot key counts."""
    xs = list(counts)
    if not xs:
        raise ContractViolation("need at least one observation")
    n = len(xs)
    mean = sum(xs) / n
    if n == 1:
        return mean, 0.0
    var = sum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, var


# Acklam's rational approximation to the standard normal quantile, refined
# with one Halley step through erfc; |error| observed < 1e-12 on (0,1).
_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)


def normal_quantile(prob: float) -> float:
    """Standard normal quantile Φ⁻¹(prob) for prob in (0,1)."""
    if not 0.0 < prob < 1.0:
        raise ContractViolation(f"quantile argument must lie in (0,1), got {prob}")
    p_low, p_high = 0.02425, 1 - 0.02425
    if prob < p_low:
        qv = math.sqrt(-2 * math.log(prob))
        x = (((((_C[0] * qv + _C[1]) * qv + _C[2]) * qv + _C[3]) * qv + _C[4]) * qv + _C[5]) / (
            (((_D[0] * qv + _D[1]) * qv + _D[2]) * qv + _D[3]) * qv + 1
        )
    elif prob <= p_high:
        qv = prob - 0.5
        r = qv * qv
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * qv / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1
        )
    else:
        qv = math.sqrt(-2 * math.log1p(-prob))
        x = -(((((_C[0] * qv + _C[1]) * qv + _C[2]) * qv + _C[3]) * qv + _C[4]) * qv + _C[5]) / (
            (((_D[0] * qv + _D[1]) * qv + _D[2]) * qv + _D[3]) * qv + 1
        )
    # Halley refinement against the exact CDF
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - prob
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


SLICING_PAPER_LITERAL = "paper-literal"
SLICING_CLT = "clt-consistent"


def slicing_inner(k_mean: float, k_var: float, n_devices: int, epsilon: float, mode: str) -> float:
    """Pre-ceiling per-device demand level the shared reservation must cover."""
    if n_devices < 1:
        raise ContractViolation("need at least one device")
    if k_var < 0:
        raise ContractViolation("variance must be non-negative")
    if not 0.0 < epsilon < 1.0:
        raise ContractViolation(f"epsilon must lie in (0,1), got {epsilon}")
    if k_var == 0.0:
        return k_mean
    z = normal_quantile(epsilon)
    if mode == SLICING_PAPER_LITERAL:
        return k_mean + z * k_var / n_devices
    if mode == SLICING_CLT:
        return k_mean + z * math.sqrt(k_var / n_devices)
    raise ContractViolation(f"unknown slicing mode {mode!r}")


def slicing_bandwidth(
    k_mean: float,
    k_var: float,
    n_devices: int,
    epsilon: float,
    r: RadioConfig,
    mode: str = SLICING_CLT,
) -> float:
    """Total reservation shared by n_devices, sized from population moments.

    σ²=0 collapses both modes to ⌈mean⌉ per device.  The per-device demand
    level is ceiled before the bandwidth map, evaluated at r's (mean) SNR.
    """
    inner = slicing_inner(k_mean, k_var, n_devices, epsilon, mode)
    k = max(0, math.ceil(inner))
    b, _ = bandwidth_for_k(k, r)
    return n_devices * b
