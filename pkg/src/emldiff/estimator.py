"""One-step drift estimation from bridge-augmented data.

Because the drift is linear in its coefficients, the Euler-scheme complete
log-likelihood of observed plus auxiliary states is an exactly quadratic
function of theta.  Replacing the (unknown, theta-dependent) diffusion-bridge
law with the Brownian-bridge law makes the quadratic's coefficients free of
the current parameter value, so the usual EM iteration collapses: the global
optimum solves one symmetric positive-definite linear system

    A theta = b,
    A_ij = delta * sum_{k,m,s} f_i(u_{m-1,k,s}) f_j(u_{m-1,k,s}),
    b_i  =         sum_{k,m,s} (u_{m,k,s} - u_{m-1,k,s} - g(u_{m-1,k,s}) delta) f_i(u_{m-1,k,s}).

With M = 1 (no auxiliary states) the system reduces to ordinary least squares
of the observed increments on the drift basis.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .bridge import BridgeConfig, BridgeLattice, build_lattice, interval_normals, sample_bridge_paths
from .models import ObservationSeries, UnitDiffusionModel

__all__ = [
    "NormalEquations",
    "EstimationResult",
    "SingularBasisError",
    "accumulate_normal_equations",
    "solve_theta",
    "eml_estimate",
    "regression_estimate",
]

# reciprocal-condition threshold below which the solve refuses to proceed
_RCOND_MIN = 1e-12
# required relative residual of the returned solution
_RESIDUAL_RTOL = 1e-10


class SingularBasisError(np.linalg.LinAlgError):
    """The normal-equations matrix is numerically singular, which signals a
    linearly dependent drift basis or insufficient distinct states."""


@dataclass(frozen=True)
class NormalEquations:
    """Accumulated linear system A theta = b with bookkeeping for diagnostics."""

    A: np.ndarray
    b: np.ndarray
    n_terms: int
    delta: float
    basis_labels: tuple[str, ...]

    def objective(self, theta) -> float:
        """The quadratic complete-likelihood criterion theta.b - theta.A.theta/2
        (constant terms dropped); maximized by the solution of A theta = b."""
        theta = np.asarray(theta, dtype=float)
        return float(theta @ self.b - 0.5 * theta @ self.A @ theta)


@dataclass(frozen=True)
class EstimationResult:
    theta_star: np.ndarray
    condition_estimate: float
    min_eigenvalue: float
    n_terms: int
    config: BridgeConfig
    wall_time: float

    def to_csv(self, path, metadata: dict | None = None) -> None:
        lines = []
        meta = {
            "M": self.config.M,
            "S": self.config.S,
            "seed": self.config.seed,
            "condition_estimate": repr(self.condition_estimate),
            "min_eigenvalue": repr(self.min_eigenvalue),
            "n_terms": self.n_terms,
            "wall_time_s": repr(self.wall_time),
        }
        if metadata:
            meta.update(metadata)
        for key in meta:
            lines.append(f"# {key}={meta[key]}")
        lines.append("coefficient,value")
        for i, v in enumerate(self.theta_star):
            lines.append(f"theta_{i},{float(v)!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _kahan_update(total, comp, term):
    y = term - comp
    t = total + y
    comp = (t - total) - y
    return t, comp


def _interval_terms(u_k: np.ndarray, model: UnitDiffusionModel, delta: float, k: int, clamp_eps):
    """Per-interval contributions: (sum_sm f_i f_j, sum_sm incr * f_i)."""
    left = u_k[:, :-1]
    if clamp_eps is not None and model.domain_lower is not None:
        left = np.maximum(left, model.domain_lower + clamp_eps)
    with np.errstate(divide="ignore", invalid="ignore"):  # finiteness checked below
        V = model.basis_values(left)  # (S, M, P)
        resid = u_k[:, 1:] - u_k[:, :-1] - model.offset.value(left) * delta
    if not np.all(np.isfinite(V)):
        s, m, i = np.argwhere(~np.isfinite(V))[0]
        raise FloatingPointError(
            f"non-finite basis value f[{i}]={model.basis_labels[i]} at interval "
            f"k={k}, path s={s}, step m={m}, state u={left[s, m]!r}"
        )
    if not np.all(np.isfinite(resid)):
        s, m = np.argwhere(~np.isfinite(resid))[0]
        raise FloatingPointError(
            f"non-finite increment term at interval k={k}, path s={s}, step m={m}, "
            f"state u={left[s, m]!r}"
        )
    A_k = np.einsum("smi,smj->ij", V, V)
    b_k = np.einsum("sm,smi->i", resid, V)
    return A_k, b_k


def _accumulate(interval_iter, model, delta, n_terms, basis_labels):
    P = model.n_coef
    A = np.zeros((P, P))
    A_c = np.zeros((P, P))
    b = np.zeros(P)
    b_c = np.zeros(P)
    for k, u_k, clamp in interval_iter:
        A_k, b_k = _interval_terms(u_k, model, delta, k, clamp)
        A, A_c = _kahan_update(A, A_c, A_k)
        b, b_c = _kahan_update(b, b_c, b_k)
    A = A * delta
    A = 0.5 * (A + A.T)  # exact symmetry; each term is an outer product
    return NormalEquations(A=A, b=b, n_terms=n_terms, delta=delta, basis_labels=basis_labels)


def accumulate_normal_equations(lattice: BridgeLattice, model: UnitDiffusionModel) -> NormalEquations:
    """Accumulate A and b over all (interval, path, step) triples.

    Summation is compensated per interval and reduced over intervals in index
    order, so dense and streaming accumulation agree bit for bit regardless of
    any parallel schedule upstream.
    """
    clamp = lattice.config.clamp_eps
    delta = lattice.delta
    it = ((k, lattice.paths[k], clamp) for k in range(lattice.paths.shape[0]))
    return _accumulate(it, model, delta, lattice.n_terms, model.basis_labels)


def _accumulate_streaming(series: ObservationSeries, model: UnitDiffusionModel, config: BridgeConfig) -> NormalEquations:
    """Same sums as the dense path, with per-interval paths generated on the
    fly and never stored; used when the full lattice would not fit in memory."""
    K = series.n_intervals
    M, S = config.M, config.S
    delta = config.delta(series.delta_obs)

    def it():
        for k in range(K):
            z = interval_normals(config.seed, k, S, M)
            u_k = sample_bridge_paths(series.x[k], series.x[k + 1], M, delta, z)
            yield k, u_k, config.clamp_eps

    return _accumulate(it(), model, delta, K * S * M, model.basis_labels)


def solve_theta(ne: NormalEquations) -> np.ndarray:
    """Solve A theta = b by Cholesky factorization with one refinement step.

    Raises :class:`SingularBasisError` when the reciprocal condition estimate
    falls below 1e-12 or the factorization fails; silently regularizing would
    mask a linearly dependent basis.
    """
    A, b = ne.A, ne.b
    if not np.allclose(A, A.T, rtol=0.0, atol=0.0):
        raise ValueError("normal-equations matrix must be symmetric")
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > 1.0 / _RCOND_MIN:
        raise SingularBasisError(
            f"normal equations are numerically singular (condition estimate "
            f"{cond:.3e}); check the drift basis {ne.basis_labels} for linear "
            f"dependence or supply more data"
        )
    try:
        cf = linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularBasisError(
            f"Cholesky factorization failed for basis {ne.basis_labels}: {exc}"
        ) from exc
    theta = linalg.cho_solve(cf, b)
    theta = theta + linalg.cho_solve(cf, b - A @ theta)
    resid = float(np.linalg.norm(A @ theta - b))
    bnorm = float(np.linalg.norm(b))
    if resid > _RESIDUAL_RTOL * max(bnorm, 1e-300):
        raise SingularBasisError(
            f"solution residual {resid:.3e} exceeds {_RESIDUAL_RTOL:g} * |b| "
            f"({bnorm:.3e}); system is too ill-conditioned to trust"
        )
    return theta


def eml_estimate(
    series: ObservationSeries,
    model: UnitDiffusionModel,
    config: BridgeConfig,
    streaming: bool = False,
) -> EstimationResult:
    """Bridge-sample, accumulate the normal equations, and solve; no iteration.

    Deterministic given the config seed.  ``streaming=True`` avoids storing
    the lattice (identical result).
    """
    t_start = time.perf_counter()
    if streaming:
        ne = _accumulate_streaming(series, model, config)
    else:
        ne = accumulate_normal_equations(build_lattice(series, config), model)
    theta = solve_theta(ne)
    eigs = np.linalg.eigvalsh(ne.A)
    return EstimationResult(
        theta_star=theta,
        condition_estimate=float(np.linalg.cond(ne.A)),
        min_eigenvalue=float(eigs[0]),
        n_terms=ne.n_terms,
        config=config,
        wall_time=time.perf_counter() - t_start,
    )


def regression_estimate(series: ObservationSeries, model: UnitDiffusionModel) -> np.ndarray:
    """Ordinary least squares of the observed increments on the drift basis.

    Equivalent by construction to the bridge estimator with M = 1, S = 1:
    the degenerate lattice is the data itself, and the normal equations are
    the OLS normal equations of (x_k - x_{k-1} - g(x_{k-1}) Delta) on
    Delta * f_i(x_{k-1}).
    """
    if series.n_intervals < model.n_coef:
        raise ValueError(
            f"need at least {model.n_coef} increments for basis {model.basis_labels}, "
            f"got {series.n_intervals}"
        )
    paths = np.stack([series.x[:-1], series.x[1:]], axis=-1)[:, None, :]
    lattice = BridgeLattice(
        paths=paths,
        config=BridgeConfig(M=1, S=1, seed=0),
        series=series,
    )
    ne = accumulate_normal_equations(lattice, model)
    return solve_theta(ne)
