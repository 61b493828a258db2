"""Transmit power versus transmission duration under a codeword error target.

Three channel variants are supported:

* ``normal``: real AWGN channel, finite-blocklength normal approximation.
* ``shannon``: AWGN capacity formula with bandwidth ``W``.
* ``fading``: block-fading channel with receiver CSI, codewords spanning
  ``L`` coherence blocks of ``T`` slots each.

All powers are linear (mW), SNRs are dimensionless and durations are in slots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import erfc, ndtri

LOG2E = math.log2(math.e)

# bisection bracket on the SNR and its stopping rule
GAMMA_LO = 1e-9
GAMMA_HI = 1e9
MAX_BISECT = 200
REL_TOL = 1e-10

GAUSS_LAGUERRE_NODES = 64


class InfeasibleError(ValueError):
    """Requested operating point cannot be met inside the admissible range."""


# ---------------------------------------------------------------------------
# Gaussian tail function and its inverse
# ---------------------------------------------------------------------------

def q_function(x):
    """Gaussian tail probability Q(x) = P(Z > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def q_inverse(p: float) -> float:
    """Inverse Gaussian tail function, ``Q^{-1}(p) = -Phi^{-1}(p)``."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse needs p in (0, 1), got {p!r}")
    return float(-ndtri(p))


# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AwgnParams:
    K: int
    N: float
    epsilon: float
    W: float | None = None

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K!r}")
        if not self.N > 0:
            raise ValueError(f"noise power N must be positive, got {self.N!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if self.W is not None and not self.W > 0:
            raise ValueError(f"bandwidth W must be positive, got {self.W!r}")


@dataclass(frozen=True)
class FadingParams:
    K: int
    N: float
    epsilon: float
    T: int
    gain_model: str = "rayleigh"

    def __post_init__(self):
        AwgnParams(self.K, self.N, self.epsilon)
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"coherence time T must be a positive integer, got {self.T!r}")
        if self.gain_model not in ("rayleigh", "constant"):
            raise ValueError(f"unknown gain model {self.gain_model!r}")


# ---------------------------------------------------------------------------
# AWGN normal approximation
# ---------------------------------------------------------------------------

def awgn_capacity_dispersion(snr):
    """Capacity (bits/channel use) and dispersion (bits^2) of the real AWGN channel."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr <= 0):
        raise ValueError("snr must be positive")
    c = 0.5 * np.log2(1.0 + snr)
    v = 0.5 * LOG2E ** 2 * (1.0 - (1.0 + snr) ** -2)
    if c.ndim == 0:
        return float(c), float(v)
    return c, v


def _blocklength_real(P, params: AwgnParams, printed: bool):
    """Real-valued blocklength solving ``K = tau*C - sqrt(tau*V) * Qinv(eps)``."""
    c, v = awgn_capacity_dispersion(np.asarray(P, dtype=float) / params.N)
    qi = q_inverse(params.epsilon)
    K = params.K
    root = np.sqrt(v) * qi * np.sqrt(4.0 * c * K + v * qi * qi)
    if printed:
        # the cross term exactly as typeset; it agrees with the exact
        # root only where C = 1/2
        third = root / c
    else:
        third = root / (2.0 * c * c)
    return K / c + v * qi * qi / (2.0 * c * c) + third


def blocklength_for_power(P, params: AwgnParams, printed: bool = False):
    """Shortest codeword (in slots) meeting ``params.epsilon`` at transmit power ``P``.

    ``printed=True`` evaluates the cross term as it is commonly typeset
    (divided by ``C`` instead of ``2 C^2``); the default is the exact root of
    the normal approximation.
    """
    P = np.asarray(P, dtype=float)
    if np.any(P <= 0):
        raise ValueError("power must be positive")
    tau = np.ceil(_blocklength_real(P, params, printed)).astype(int)
    tau = np.maximum(tau, 1)
    return int(tau) if tau.ndim == 0 else tau


def _bisect_power(taus: np.ndarray, meets, N: float) -> np.ndarray:
    """Vectorised bisection for the smallest P in [N*GAMMA_LO, N*GAMMA_HI] with ``meets(P, tau)``.

    ``meets`` must be monotone in ``P`` (False below a threshold, True above).
    Works in log-power so relative precision is uniform over the bracket.
    """
    taus = np.asarray(taus)
    lo = np.full(taus.shape, math.log(N * GAMMA_LO))
    hi = np.full(taus.shape, math.log(N * GAMMA_HI))
    ok_hi = meets(np.exp(hi), taus)
    if not np.all(ok_hi):
        bad = taus[~ok_hi]
        raise InfeasibleError(
            f"duration(s) {bad.tolist()} unreachable below SNR {GAMMA_HI:g}")
    ok_lo = meets(np.exp(lo), taus)
    hi = np.where(ok_lo, lo, hi)
    for _ in range(MAX_BISECT):
        if np.all(hi - lo <= REL_TOL):
            break
        mid = 0.5 * (lo + hi)
        ok = meets(np.exp(mid), taus)
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return np.exp(hi)


def power_for_blocklength(tau, params: AwgnParams, printed: bool = False):
    """Smallest power whose required blocklength does not exceed ``tau``."""
    taus = np.atleast_1d(np.asarray(tau))
    if np.any(taus < 1):
        raise ValueError("tau must be >= 1")

    def meets(P, t):
        return _blocklength_real(P, params, printed) <= t

    P = _bisect_power(taus, meets, params.N)
    return float(P[0]) if np.ndim(tau) == 0 else P


def shannon_power(tau, params: AwgnParams):
    """Power from the capacity formula ``P = N (2^{K/(W tau)} - 1)``."""
    if params.W is None:
        raise ValueError("shannon_power needs the bandwidth W")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 1):
        raise ValueError("tau must be >= 1")
    P = params.N * np.expm1(params.K / (params.W * tau) * math.log(2.0))
    return float(P) if P.ndim == 0 else P


def error_probability(tau, snr, K, real: bool = False):
    """Codeword error probability of a ``tau``-slot codeword carrying ``K`` bits.

    Evaluates ``Q(sqrt(tau) (ln(1+snr) - K ln2 / tau) / sqrt(1 - (1+snr)^-2))``.
    With ``real=True`` the real-channel capacity and dispersion (half of the
    above, in nats) are used instead, which is the exact inverse of
    :func:`blocklength_for_power`.
    """
    tau = np.asarray(tau, dtype=float)
    snr = np.asarray(snr, dtype=float)
    if np.any(tau < 1) or np.any(snr <= 0):
        raise ValueError("need tau >= 1 and snr > 0")
    k_nats = K * math.log(2.0)
    cap = np.log1p(snr)
    disp = 1.0 - (1.0 + snr) ** -2
    if real:
        cap, disp = 0.5 * cap, 0.5 * disp
    arg = np.sqrt(tau) * (cap - k_nats / tau) / np.sqrt(disp)
    eps = q_function(arg)
    return float(eps) if eps.ndim == 0 else eps


# ---------------------------------------------------------------------------
# Block fading with receiver CSI
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _laguerre(n: int):
    x, w = np.polynomial.laguerre.laggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def fading_capacity_dispersion(snr, T: int, gain_model: str = "rayleigh"):
    """``C_csi`` (nats) and ``V_csi`` (nats^2) for SNR values ``snr``."""
    snr = np.atleast_1d(np.asarray(snr, dtype=float))
    if gain_model == "constant":
        x, w = np.array([1.0]), np.array([1.0])
    else:
        x, w = _laguerre(GAUSS_LAGUERRE_NODES)
    g = snr[:, None] * x[None, :]
    logs = np.log1p(g)
    mean_log = logs @ w
    var_log = (logs ** 2) @ w - mean_log ** 2
    var_log = np.maximum(var_log, 0.0)
    mean_inv = (1.0 / (1.0 + g)) @ w
    return mean_log, T * var_log + 1.0 - mean_inv ** 2


def fading_power(L, params: FadingParams):
    """Smallest power so an ``L``-block codeword (``tau = L*T``) carries ``K`` bits.

    The rate condition is ``tau*(C_csi - sqrt(V_csi/tau) Qinv(eps)) >= K`` with
    ``K`` converted to nats; expectations over the unit-mean exponential gain
    use fixed-node Gauss-Laguerre quadrature so results are reproducible.
    """
    Ls = np.atleast_1d(np.asarray(L))
    if np.any(Ls < 1):
        raise ValueError("L must be >= 1")
    taus = Ls * params.T
    qi = q_inverse(params.epsilon)
    k_nats = params.K * math.log(2.0)

    def meets(P, t):
        c, v = fading_capacity_dispersion(P / params.N, params.T, params.gain_model)
        return t * c - np.sqrt(v * t) * qi >= k_nats

    P = _bisect_power(taus, meets, params.N)
    return float(P[0]) if np.ndim(L) == 0 else P


# ---------------------------------------------------------------------------
# Cached power table over an action set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelModel:
    """Immutable map from transmission duration to required transmit power."""

    variant: str
    params: object
    taus: np.ndarray = field(repr=False)
    powers: np.ndarray = field(repr=False)

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=int)
        powers = np.asarray(self.powers, dtype=float)
        if taus.ndim != 1 or taus.shape != powers.shape or taus.size == 0:
            raise ValueError("taus and powers must be matching non-empty vectors")
        if np.any(np.diff(taus) <= 0):
            raise ValueError("taus must be strictly increasing")
        if np.any(powers <= 0):
            raise ValueError("powers must be positive")
        taus.setflags(write=False)
        powers.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "_index", {int(t): i for i, t in enumerate(taus)})

    @classmethod
    def normal_approx(cls, K, N, epsilon, tau_min, tau_max, printed=False):
        params = AwgnParams(K, N, epsilon)
        taus = np.arange(tau_min, tau_max + 1)
        return cls("normal", params, taus, power_for_blocklength(taus, params, printed))

    @classmethod
    def shannon(cls, K, N, W, tau_min, tau_max):
        params = AwgnParams(K, N, 0.5, W)
        taus = np.arange(tau_min, tau_max + 1)
        return cls("shannon", params, taus, shannon_power(taus, params))

    @classmethod
    def block_fading(cls, K, N, epsilon, T, tau_min, tau_max, gain_model="rayleigh"):
        params = FadingParams(K, N, epsilon, T, gain_model)
        L = np.arange(max(1, -(-tau_min // T)), tau_max // T + 1)
        if L.size == 0:
            raise ValueError(f"no multiple of T={T} inside [{tau_min}, {tau_max}]")
        return cls("fading", params, L * T, fading_power(L, params))

    @classmethod
    def from_table(cls, taus, powers):
        return cls("table", None, np.asarray(taus), np.asarray(powers))

    @property
    def tau_min(self) -> int:
        return int(self.taus[0])

    @property
    def tau_max(self) -> int:
        return int(self.taus[-1])

    def power(self, tau) -> float:
        try:
            return float(self.powers[self._index[int(tau)]])
        except KeyError:
            raise ValueError(f"tau={tau} is not in the action set") from None

    def index(self, tau) -> int:
        return self._index[int(tau)]

    def energies(self) -> np.ndarray:
        return self.taus * self.powers

    def describe(self) -> dict:
        """Plain-data summary used for digests."""
        out = {"variant": self.variant, "tau_min": self.tau_min, "tau_max": self.tau_max}
        if self.params is not None:
            out.update(vars(self.params))
        else:
            out["taus"] = self.taus.tolist()
            out["powers"] = [float(f"{p:.15g}") for p in self.powers]
        return out
