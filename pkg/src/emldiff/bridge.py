"""Brownian bridge path generation between consecutive observations.

The sampler uses the modified-bridge recursion

    u_{m+1} = u_m + (u_M - u_m)/(M - m) + sqrt((M-m-1)/(M-m)) * sqrt(delta) * Z_m,

whose joint law at the lattice times equals the law of the Brownian bridge
exactly, so refinement introduces no discretization bias.  The final step has
zero noise coefficient and pins the right endpoint.

An exact Ornstein-Uhlenbeck bridge sampler is included as a testing oracle:
the OU case is the one nonlinear-free setting where both the transition
density and the bridge law are Gaussian in closed form.
"""

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .models import ObservationSeries, ou_exact_transition

__all__ = [
    "BridgeConfig",
    "BridgeLattice",
    "mbb_step",
    "sample_bridge_path",
    "sample_bridge_paths",
    "build_lattice",
    "interval_normals",
    "bb_marginal_moments",
    "ou_bridge_moments",
    "sample_ou_bridge_paths",
]


@dataclass(frozen=True)
class BridgeConfig:
    """Bridge Monte Carlo settings: M subintervals per observation gap
    (M-1 auxiliary states), S simulated paths per gap, 64-bit master seed.

    ``clamp_eps`` optionally clamps sampled states to domain_lower + eps
    before drift-basis evaluation during estimation (off by default).
    """

    M: int
    S: int
    seed: int
    clamp_eps: float | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if self.S < 1:
            raise ValueError(f"S must be >= 1, got {self.S}")

    def delta(self, delta_obs: float) -> float:
        return delta_obs / self.M


def mbb_step(u_m, u_M, m: int, M: int, delta: float, z):
    """One modified-bridge step from lattice index m toward the pinned
    endpoint u_M; at m = M-1 the noise coefficient vanishes and u_M is
    returned exactly."""
    if m >= M or m < 0:
        raise ValueError(f"step index m={m} outside 0..{M - 1}")
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if m == M - 1:
        return u_M + 0.0 * np.asarray(u_m, dtype=float)
    rem = M - m
    u_m = np.asarray(u_m, dtype=float)
    return u_m + (u_M - u_m) / rem + np.sqrt((rem - 1) / rem) * np.sqrt(delta) * z


def sample_bridge_paths(x, y, M: int, delta: float, z: np.ndarray) -> np.ndarray:
    """Vectorized bridge paths from precomputed standard normals.

    ``x``/``y`` broadcast against the leading axes of ``z``, which must have
    shape (..., M-1).  Returns paths of shape (..., M+1) with both endpoints
    pinned exactly.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != M - 1:
        raise ValueError(f"z must supply M-1={M - 1} draws per path, got {z.shape[-1]}")
    lead = np.broadcast_shapes(np.shape(x), np.shape(y), z.shape[:-1])
    out = np.empty(lead + (M + 1,))
    u = np.broadcast_to(np.asarray(x, dtype=float), lead).astype(float, copy=True)
    yv = np.broadcast_to(np.asarray(y, dtype=float), lead)
    out[..., 0] = u
    sqdelta = np.sqrt(delta)
    for m in range(M - 1):
        rem = M - m
        u = u + (yv - u) / rem + np.sqrt((rem - 1) / rem) * sqdelta * z[..., m]
        out[..., m + 1] = u
    out[..., M] = yv
    return out


def sample_bridge_path(x: float, y: float, M: int, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Single bridge path on the (M+1)-point lattice; M-1 normals consumed."""
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    z = rng.standard_normal(M - 1)
    return sample_bridge_paths(x, y, M, delta, z)


def interval_normals(seed: int, k: int, S: int, M: int) -> np.ndarray:
    """The (S, M-1) standard-normal block for observation interval k.

    Each interval gets its own counter-based substream keyed by
    (seed, lattice tag, k); row s is the per-path substream.  The block is a
    pure function of its arguments, which makes lattice construction
    reproducible across execution orders and thread counts, and lets profile
    runs reuse one fixed set of draws across all volatility-parameter values.
    """
    return _rng.substream(seed, _rng.LATTICE, k).standard_normal((S, M - 1))


@dataclass(frozen=True)
class BridgeLattice:
    """Simulated bridge paths u[(k, s, m)] for every observation interval.

    paths has shape (K, S, M+1); paths[k, s, 0] and paths[k, s, M] equal the
    observations x_{k-1} and x_k exactly for every s.
    """

    paths: np.ndarray
    config: BridgeConfig
    series: ObservationSeries

    @property
    def delta(self) -> float:
        return self.series.delta_obs / self.config.M

    @property
    def n_terms(self) -> int:
        K, S, Mp1 = self.paths.shape
        return K * S * (Mp1 - 1)

    def to_csv(self, path) -> None:
        """Debug dump, one row per lattice value: k,s,m,u."""
        K, S, Mp1 = self.paths.shape
        with open(path, "w") as fh:
            fh.write("k,s,m,u\n")
            for k in range(K):
                for s in range(S):
                    for m in range(Mp1):
                        fh.write(f"{k},{s},{m},{float(self.paths[k, s, m])!r}\n")


def build_lattice(series: ObservationSeries, config: BridgeConfig) -> BridgeLattice:
    """Generate S bridge paths per observation interval on the M-lattice.

    The result is a pure function of (series, config): interval k uses the
    normals from :func:`interval_normals`, so any parallel schedule produces
    the identical array.
    """
    K = series.n_intervals
    M, S = config.M, config.S
    delta = config.delta(series.delta_obs)
    paths = np.empty((K, S, M + 1))
    for k in range(K):
        z = interval_normals(config.seed, k, S, M)
        paths[k] = sample_bridge_paths(series.x[k], series.x[k + 1], M, delta, z)
    return BridgeLattice(paths=paths, config=config, series=series)


def bb_marginal_moments(x: float, y: float, Delta: float, t: float) -> tuple[float, float]:
    """Mean and variance of the Brownian bridge from (0, x) to (Delta, y) at
    time t: mean = x + (t/Delta)(y - x), var = t (Delta - t) / Delta."""
    if t < 0.0 or t > Delta:
        raise ValueError(f"t={t} outside [0, {Delta}]")
    mean = x + (t / Delta) * (y - x)
    var = t * (Delta - t) / Delta
    return mean, var


def ou_bridge_moments(a0: float, a1: float, x, y: float, Delta: float, t: float):
    """Conditional mean and variance at time t of the OU process pinned to
    X_0 = x and X_Delta = y (Gaussian conditioning on the exact transition
    covariances).  Reduces to :func:`bb_marginal_moments` as a1 -> 0.
    Vectorized over x."""
    if Delta <= 0.0:
        raise ValueError(f"Delta must be positive, got {Delta}")
    if t < 0.0 or t > Delta:
        raise ValueError(f"t={t} outside [0, {Delta}]")
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        mean, var = x + 0.0, 0.0
    elif t == Delta:
        mean, var = np.broadcast_to(np.asarray(y, dtype=float), x.shape).astype(float, copy=True), 0.0
        if x.shape == ():
            mean = float(y)
    else:
        m_t, v_t = ou_exact_transition(a0, a1, x, t)
        m_D, v_D = ou_exact_transition(a0, a1, x, Delta)
        cov = np.exp(-a1 * (Delta - t)) * v_t
        mean = m_t + cov / v_D * (np.asarray(y, dtype=float) - m_D)
        var = v_t - cov * cov / v_D
    if x.shape == ():
        return float(mean), float(var)
    return mean, var


def sample_ou_bridge_paths(
    a0: float,
    a1: float,
    x: float,
    y: float,
    M: int,
    delta: float,
    S: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exact OU-bridge paths on the (M+1)-point lattice, shape (S, M+1).

    Sampled sequentially: by the Markov property the next lattice state given
    the current one and the pinned endpoint follows the OU bridge over the
    remaining horizon, evaluated one step ahead.
    """
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    out = np.empty((S, M + 1))
    u = np.full(S, float(x))
    out[:, 0] = u
    for m in range(M - 1):
        horizon = delta * (M - m)
        mean, var = ou_bridge_moments(a0, a1, u, y, horizon, delta)
        u = mean + np.sqrt(var) * rng.standard_normal(S)
        out[:, m + 1] = u
    out[:, M] = y
    return out
