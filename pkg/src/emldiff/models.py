"""Scalar diffusion models with unit volatility and parameter-linear drift.

Everything downstream works on SDEs of the form

    dX_t = mu(X_t, theta) dt + dW_t,      mu(x, theta) = g(x) + sum_i a_i f_i(x),

with a fixed offset ``g`` and a drift basis ``f_0, ..., f_N``.  Models with
state-dependent volatility sigma(x, vartheta) are reduced to this form by the
Lamperti change of variables (:func:`lamperti_transform`), which preserves the
linear dependence of the drift on the coefficient vector.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

__all__ = [
    "BasisFunction",
    "UnitDiffusionModel",
    "VolatilityModel",
    "ObservationSeries",
    "LampertiTransform",
    "DomainExitError",
    "const_basis",
    "monomial_basis",
    "recip_basis",
    "zero_offset",
    "ou_model",
    "quadratic_model",
    "cir_unit_model",
    "cir_volatility",
    "cir_unit_params",
    "ait_sahalia_volatility",
    "lamperti_transform",
    "euler_simulate",
    "ou_exact_transition",
    "ou_exact_sample",
]

# Finite-difference step for derivative fallbacks; scales with |x| away from 1.
_FD_REL = 1e-6


class DomainExitError(RuntimeError):
    """A simulated path left the model's state domain and could not be redrawn."""

    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


@dataclass(frozen=True)
class BasisFunction:
    """A scalar function with optional analytic derivative and antiderivative.

    ``fn`` must accept numpy arrays.  When ``deriv`` is missing, a central
    finite difference with step ``max(1e-6, 1e-6*|x|)`` is used; when
    ``antideriv`` is missing, definite integrals fall back to adaptive
    quadrature (relative tolerance 1e-9).
    """

    fn: Callable
    label: str
    deriv: Callable | None = None
    antideriv: Callable | None = None

    def value(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.deriv is not None:
            return np.asarray(self.deriv(x), dtype=float)
        h = _FD_REL * np.maximum(1.0, np.abs(x))
        return (self.value(x + h) - self.value(x - h)) / (2.0 * h)

    def integral(self, x0: float, x1: float) -> float:
        if self.antideriv is not None:
            return float(self.antideriv(x1) - self.antideriv(x0))
        val, _ = quad(lambda u: float(self.fn(u)), x0, x1, epsrel=1e-9, limit=200)
        return val


def zero_offset() -> BasisFunction:
    return BasisFunction(
        fn=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        label="0",
        deriv=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        antideriv=lambda x: 0.0 * np.asarray(x, dtype=float),
    )


def const_basis() -> BasisFunction:
    return BasisFunction(
        fn=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        label="1",
        deriv=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        antideriv=lambda x: np.asarray(x, dtype=float),
    )


def monomial_basis(power: int, scale: float = 1.0, label: str | None = None) -> BasisFunction:
    """scale * x**power with analytic derivative and antiderivative."""
    if power < 0:
        raise ValueError("power must be nonnegative; use recip_basis for 1/x")
    if label is None:
        label = f"{scale:g}*x^{power}" if scale != 1.0 else f"x^{power}"
    return BasisFunction(
        fn=lambda x: scale * np.asarray(x, dtype=float) ** power,
        label=label,
        deriv=lambda x: scale * power * np.asarray(x, dtype=float) ** max(power - 1, 0)
        if power > 0
        else np.zeros_like(np.asarray(x, dtype=float)),
        antideriv=lambda x: scale * np.asarray(x, dtype=float) ** (power + 1) / (power + 1),
    )


def recip_basis() -> BasisFunction:
    """1/x on a positive domain; antiderivative log(x)."""
    return BasisFunction(
        fn=lambda x: 1.0 / np.asarray(x, dtype=float),
        label="1/x",
        deriv=lambda x: -1.0 / np.asarray(x, dtype=float) ** 2,
        antideriv=lambda x: np.log(np.asarray(x, dtype=float)),
    )


@dataclass(frozen=True)
class UnitDiffusionModel:
    """Unit-volatility diffusion with drift g(x) + sum_i a_i f_i(x).

    Parameters
    ----------
    label : model name used in error messages and CLI output.
    offset : the coefficient-free drift part g.
    basis : the drift basis functions f_0..f_N.
    domain_lower : open lower state bound (e.g. 0 for square-root-type
        models after transformation); ``None`` means the whole real line.
    """

    label: str
    offset: BasisFunction
    basis: tuple[BasisFunction, ...]
    domain_lower: float | None = None

    @property
    def n_coef(self) -> int:
        return len(self.basis)

    @property
    def basis_labels(self) -> tuple[str, ...]:
        return tuple(f.label for f in self.basis)

    def check_theta(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.n_coef,):
            raise ValueError(
                f"theta has length {theta.size}, model '{self.label}' expects "
                f"{self.n_coef} coefficients for basis {self.basis_labels}"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError(f"theta contains non-finite entries: {theta}")
        return theta

    def in_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.domain_lower is None:
            return np.isfinite(x)
        return np.isfinite(x) & (x > self.domain_lower)

    def basis_values(self, x) -> np.ndarray:
        """Stack f_i(x) along a trailing axis: shape x.shape + (N+1,)."""
        x = np.asarray(x, dtype=float)
        return np.stack([f.value(x) for f in self.basis], axis=-1)

    def drift(self, x, theta) -> np.ndarray:
        theta = self.check_theta(theta)
        x = np.asarray(x, dtype=float)
        out = self.offset.value(x)
        for a, f in zip(theta, self.basis):
            out = out + a * f.value(x)
        return out

    def drift_x(self, x, theta) -> np.ndarray:
        """State derivative of the drift."""
        theta = self.check_theta(theta)
        x = np.asarray(x, dtype=float)
        out = self.offset.derivative(x)
        for a, f in zip(theta, self.basis):
            out = out + a * f.derivative(x)
        return out

    def girsanov_integrand(self, x, theta) -> np.ndarray:
        """mu'(x, theta) + mu(x, theta)**2, the exponent integrand in the
        Girsanov density of the drifted law against the Wiener law."""
        mu = self.drift(x, theta)
        return self.drift_x(x, theta) + mu * mu

    def drift_integral(self, x0: float, x1: float, theta) -> float:
        """Definite integral of the drift in the state variable."""
        theta = self.check_theta(theta)
        total = self.offset.integral(x0, x1)
        for a, f in zip(theta, self.basis):
            if a != 0.0:
                total += a * f.integral(x0, x1)
        return total


@dataclass(frozen=True)
class VolatilityModel:
    """Diffusion with state-dependent volatility and parameter-linear drift.

    The drift on the original scale is g(x) + sum_i c_i f_i(x); sigma and its
    state derivatives are callables of (x, vartheta).  ``gamma``/``gamma_inv``
    may supply the closed-form volatility-rescaling map and its inverse; when
    absent they are computed by quadrature and root finding.  ``unit_factory``
    optionally overrides the generic transformed model with a preferred
    parameterization (used by the square-root model, whose transformed drift
    is conventionally written b0/y + b1*y).
    """

    label: str
    offset: BasisFunction
    basis: tuple[BasisFunction, ...]
    sigma: Callable
    vartheta: tuple[float, ...]
    sigma_x: Callable | None = None
    sigma_xx: Callable | None = None
    gamma: Callable | None = None
    gamma_inv: Callable | None = None
    domain_lower: float | None = None
    probe_interval: tuple[float, float] | None = None
    unit_factory: Callable | None = None

    def _probe_points(self) -> np.ndarray:
        if self.probe_interval is not None:
            lo, hi = self.probe_interval
        elif self.domain_lower is not None:
            lo, hi = self.domain_lower + 1e-4, self.domain_lower + 5.0
        else:
            lo, hi = -5.0, 5.0
        return np.linspace(lo, hi, 101)

    def sigma_value(self, x):
        return np.asarray(self.sigma(np.asarray(x, dtype=float), self.vartheta), dtype=float)

    def sigma_deriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.sigma_x is not None:
            return np.asarray(self.sigma_x(x, self.vartheta), dtype=float)
        h = _FD_REL * np.maximum(1.0, np.abs(x))
        return (self.sigma_value(x + h) - self.sigma_value(x - h)) / (2.0 * h)

    def sigma_deriv2(self, x):
        x = np.asarray(x, dtype=float)
        if self.sigma_xx is not None:
            return np.asarray(self.sigma_xx(x, self.vartheta), dtype=float)
        h = 1e-4 * np.maximum(1.0, np.abs(x))
        return (self.sigma_value(x + h) - 2.0 * self.sigma_value(x) + self.sigma_value(x - h)) / (h * h)


class LampertiTransform:
    """Result of the unit-volatility change of variables."""

    def __init__(self, model: UnitDiffusionModel, forward: Callable, inverse: Callable):
        self.model = model
        self.forward = forward
        self.inverse = inverse

    def __iter__(self):
        return iter((self.model, self.forward, self.inverse))


def lamperti_transform(vm: VolatilityModel) -> LampertiTransform:
    """Transform dX = mu(X,theta) dt + sigma(X,vartheta) dW to unit volatility.

    Returns the transformed model together with the forward map
    gamma(x) = int dx/sigma and its inverse.  The transformed drift is

        mu_Y(y) = mu(gamma_inv(y), theta) / sigma(gamma_inv(y))
                  - sigma'(gamma_inv(y)) / 2,

    which stays linear in theta: each original basis function maps to
    f_i(gamma_inv(y)) / sigma(gamma_inv(y)) and the volatility correction
    joins the offset.

    Raises
    ------
    ValueError
        If sigma is not strictly positive on the probed domain, or the
        numeric forward map fails to be invertible where requested.
    """
    probes = vm._probe_points()
    sig = vm.sigma_value(probes)
    if not np.all(np.isfinite(sig)) or np.any(sig <= 0.0):
        bad = probes[~(np.isfinite(sig) & (sig > 0.0))]
        raise ValueError(
            f"sigma of model '{vm.label}' is not strictly positive on the probed "
            f"domain (first offending point x={bad[0]:g})"
        )

    vt = tuple(vm.vartheta)
    if vm.gamma is not None:
        forward = lambda x: np.asarray(vm.gamma(np.asarray(x, dtype=float), vt), dtype=float)
    else:
        x_ref = float(probes[len(probes) // 2])

        def forward(x, _ref=x_ref):
            x = np.asarray(x, dtype=float)
            flat = np.atleast_1d(x)
            out = np.array(
                [quad(lambda u: 1.0 / float(vm.sigma(u, vt)), _ref, xi, epsrel=1e-10, limit=200)[0] for xi in flat]
            )
            return out.reshape(x.shape) if x.shape else float(out[0])

    if vm.gamma_inv is not None:
        inverse = lambda y: np.asarray(vm.gamma_inv(np.asarray(y, dtype=float), vt), dtype=float)
    else:
        lo_bound = vm.domain_lower
        p_lo, p_hi = float(probes[0]), float(probes[-1])

        def _inv_scalar(y: float) -> float:
            lo, hi = p_lo, p_hi
            # expand the bracket until forward(.) straddles y
            for _ in range(200):
                if forward(lo) <= y <= forward(hi):
                    break
                if forward(lo) > y:
                    step = max(1e-3, (hi - lo))
                    lo = lo - step if lo_bound is None else lo_bound + (lo - lo_bound) / 2.0
                if forward(hi) < y:
                    hi = hi + max(1e-3, (hi - lo))
            else:
                raise ValueError(f"could not bracket gamma_inv({y}) for model '{vm.label}'")
            return brentq(lambda x: float(forward(x)) - y, lo, hi, xtol=1e-13)

        def inverse(y):
            y = np.asarray(y, dtype=float)
            flat = np.atleast_1d(y)
            out = np.array([_inv_scalar(float(yi)) for yi in flat])
            return out.reshape(y.shape) if y.shape else float(out[0])

    if vm.unit_factory is not None:
        model = vm.unit_factory(vt)
        return LampertiTransform(model, forward, inverse)

    def _tf_basis(f: BasisFunction) -> BasisFunction:
        def fn(y):
            x = inverse(y)
            return f.value(x) / vm.sigma_value(x)

        def deriv(y):
            # d/dy [f(x)/sigma(x)] with dx/dy = sigma(x)
            x = inverse(y)
            return f.derivative(x) - f.value(x) * vm.sigma_deriv(x) / vm.sigma_value(x)

        return BasisFunction(fn=fn, label=f"[{f.label}]/sigma", deriv=deriv)

    def _off_fn(y):
        x = inverse(y)
        return vm.offset.value(x) / vm.sigma_value(x) - 0.5 * vm.sigma_deriv(x)

    def _off_deriv(y):
        x = inverse(y)
        sig_x = vm.sigma_value(x)
        return (
            vm.offset.derivative(x)
            - vm.offset.value(x) * vm.sigma_deriv(x) / sig_x
            - 0.5 * vm.sigma_deriv2(x) * sig_x
        )

    offset = BasisFunction(fn=_off_fn, label="transform-offset", deriv=_off_deriv)
    basis = tuple(_tf_basis(f) for f in vm.basis)

    y_lower = None
    if vm.domain_lower is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            try:
                cand = float(forward(vm.domain_lower))
                y_lower = cand if np.isfinite(cand) else None
            except (ValueError, ZeroDivisionError):
                y_lower = None

    model = UnitDiffusionModel(
        label=f"{vm.label}-unit",
        offset=offset,
        basis=basis,
        domain_lower=y_lower,
    )
    return LampertiTransform(model, forward, inverse)


# ---------------------------------------------------------------------------
# Built-in models


def ou_model() -> UnitDiffusionModel:
    """Linear mean-reverting drift a0 - a1*x with unit volatility."""
    return UnitDiffusionModel(
        label="ou",
        offset=zero_offset(),
        basis=(const_basis(), monomial_basis(1, scale=-1.0, label="-x")),
    )


def quadratic_model() -> UnitDiffusionModel:
    """Quadratic drift a0 + a1*x + a2*x^2 with unit volatility."""
    return UnitDiffusionModel(
        label="quadratic",
        offset=zero_offset(),
        basis=(const_basis(), monomial_basis(1), monomial_basis(2)),
    )


def cir_unit_model() -> UnitDiffusionModel:
    """Volatility-rescaled square-root model: drift b0/y + b1*y on y > 0."""
    return UnitDiffusionModel(
        label="cir-unit",
        offset=zero_offset(),
        basis=(recip_basis(), monomial_basis(1, label="y")),
        domain_lower=0.0,
    )


def cir_unit_params(kappa: float, gamma_mean: float, sigma: float) -> tuple[float, float]:
    """Map square-root model parameters to the rescaled drift coefficients.

    For dV = kappa*(gamma_mean - V) dt + sigma*sqrt(V) dW, the change of
    variables y = 2*sqrt(v)/sigma yields dY = (b0/Y + b1*Y) dt + dW with

        b0 = 2*kappa*gamma_mean/sigma**2 - 1/2,      b1 = -kappa/2.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    b0 = 2.0 * kappa * gamma_mean / sigma**2 - 0.5
    b1 = -kappa / 2.0
    return b0, b1


def cir_volatility(sigma: float, kappa: float = 1.0, gamma_mean: float = 1.0) -> VolatilityModel:
    """Square-root volatility model dV = kappa*(gamma_mean - V) dt + sigma*sqrt(V) dW.

    The drift coefficients (kappa, gamma_mean) are defaults used only where a
    concrete drift is needed (e.g. data generation); estimation recovers the
    rescaled coefficients via :func:`cir_unit_model`.
    """

    def _gamma(x, vt):
        return 2.0 * np.sqrt(np.asarray(x, dtype=float)) / vt[0]

    def _gamma_inv(y, vt):
        return (vt[0] * np.asarray(y, dtype=float) / 2.0) ** 2

    return VolatilityModel(
        label="cir",
        offset=zero_offset(),
        basis=(const_basis(), monomial_basis(1)),
        sigma=lambda x, vt: vt[0] * np.sqrt(np.asarray(x, dtype=float)),
        sigma_x=lambda x, vt: vt[0] / (2.0 * np.sqrt(np.asarray(x, dtype=float))),
        sigma_xx=lambda x, vt: -vt[0] / (4.0 * np.asarray(x, dtype=float) ** 1.5),
        vartheta=(float(sigma),),
        gamma=_gamma,
        gamma_inv=_gamma_inv,
        domain_lower=0.0,
        probe_interval=(1e-4, 5.0),
        unit_factory=lambda vt: cir_unit_model(),
    )


def ait_sahalia_volatility(sigma1: float, sigma2: float) -> VolatilityModel:
    """Flexible diffusion dV = (a0 + a1*V + a2*V^2) dt + sqrt(sigma1*V + sigma2*V^2) dW.

    The forward map has the closed form
    gamma(x) = (2/sqrt(sigma2)) * log(sqrt(sigma2*x) + sqrt(sigma1 + sigma2*x))
    with inverse x = (exp(c) - sigma1*exp(-c))^2 / (4*sigma2), c = y*sqrt(sigma2)/2.
    """
    if sigma1 <= 0.0 or sigma2 <= 0.0:
        raise ValueError("sigma1 and sigma2 must be positive")

    def _sigma(x, vt):
        x = np.asarray(x, dtype=float)
        return np.sqrt(vt[0] * x + vt[1] * x * x)

    def _sigma_x(x, vt):
        x = np.asarray(x, dtype=float)
        return (vt[0] + 2.0 * vt[1] * x) / (2.0 * _sigma(x, vt))

    def _sigma_xx(x, vt):
        # simplifies to -sigma1^2 / (4 sigma^3)
        return -vt[0] ** 2 / (4.0 * _sigma(x, vt) ** 3)

    def _gamma(x, vt):
        x = np.asarray(x, dtype=float)
        s1, s2 = vt
        return 2.0 / np.sqrt(s2) * np.log(np.sqrt(s2 * x) + np.sqrt(s1 + s2 * x))

    def _gamma_inv(y, vt):
        y = np.asarray(y, dtype=float)
        s1, s2 = vt
        c = y * np.sqrt(s2) / 2.0
        root = (np.exp(c) - s1 * np.exp(-c)) / 2.0
        return root * root / s2

    return VolatilityModel(
        label="ait-sahalia",
        offset=zero_offset(),
        basis=(const_basis(), monomial_basis(1), monomial_basis(2)),
        sigma=_sigma,
        sigma_x=_sigma_x,
        sigma_xx=_sigma_xx,
        vartheta=(float(sigma1), float(sigma2)),
        gamma=_gamma,
        gamma_inv=_gamma_inv,
        domain_lower=0.0,
        probe_interval=(1e-4, 2.0),
    )


# ---------------------------------------------------------------------------
# Observations and simulation


@dataclass(frozen=True)
class ObservationSeries:
    """K+1 observed levels at even spacing delta_obs (times in years)."""

    x: np.ndarray
    delta_obs: float
    t0: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("an observation series needs at least two levels")
        if not np.all(np.isfinite(x)):
            raise ValueError("observation series contains non-finite levels")
        if self.delta_obs <= 0.0:
            raise ValueError(f"delta_obs must be positive, got {self.delta_obs}")
        object.__setattr__(self, "x", x)

    @property
    def n_intervals(self) -> int:
        return self.x.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.delta_obs * np.arange(self.x.size)

    def increments(self) -> np.ndarray:
        return np.diff(self.x)

    def to_csv(self, path, metadata: dict | None = None) -> None:
        """Write `t,x` rows with shortest round-trip decimals; metadata lines
        are '#'-prefixed key=value pairs before the header.  The spacing is
        echoed in the metadata so reads reproduce it bit for bit."""
        lines = []
        meta = dict(metadata) if metadata else {}
        meta.setdefault("delta_obs", repr(float(self.delta_obs)))
        for key in meta:
            lines.append(f"# {key}={meta[key]}")
        lines.append("t,x")
        for t, v in zip(self.times, self.x):
            lines.append(f"{float(t)!r},{float(v)!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @staticmethod
    def from_csv(path) -> "ObservationSeries":
        times, levels = [], []
        meta_delta = None
        with open(path) as fh:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if body.startswith("delta_obs="):
                        meta_delta = float(body.split("=", 1)[1])
                    continue
                if line.lower().startswith("t,"):
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise ValueError(f"{path}: malformed row {line!r}")
                times.append(float(parts[0]))
                levels.append(float(parts[1]))
        if len(levels) < 2:
            raise ValueError(f"{path}: needs at least two observations")
        t = np.asarray(times)
        deltas = np.diff(t)
        delta = meta_delta if meta_delta is not None else float(deltas[0])
        if not np.allclose(deltas, delta, rtol=1e-9, atol=1e-12):
            raise ValueError(f"{path}: observation times are not evenly spaced")
        return ObservationSeries(x=np.asarray(levels), delta_obs=delta, t0=float(t[0]))


_MAX_REDRAWS = 100


def euler_simulate(
    model: UnitDiffusionModel,
    theta,
    x0: float,
    delta_obs: float,
    K: int,
    substeps: int,
    rng: np.random.Generator,
) -> ObservationSeries:
    """Simulate K coarse steps of size delta_obs, each refined into `substeps`
    Euler increments; only the coarse-grid values are recorded.

    Steps that would exit the state domain are rejected and redrawn (at most
    100 times each) so that square-root-type state spaces stay valid; a
    persistent violation raises :class:`DomainExitError` with the step index.
    """
    theta = model.check_theta(theta)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if K < 1:
        raise ValueError("K must be >= 1")
    if not bool(model.in_domain(x0)):
        raise ValueError(f"x0={x0} outside domain of model '{model.label}'")
    dt = delta_obs / substeps
    sqdt = np.sqrt(dt)
    lower = model.domain_lower
    out = np.empty(K + 1)
    out[0] = x = float(x0)
    with np.errstate(over="ignore", invalid="ignore"):  # divergence guarded below
        for k in range(K):
            for j in range(substeps):
                mu = float(model.drift(x, theta))
                for attempt in range(_MAX_REDRAWS + 1):
                    nxt = x + mu * dt + sqdt * rng.standard_normal()
                    if lower is None or nxt > lower:
                        break
                if lower is not None and nxt <= lower:
                    raise DomainExitError(
                        f"path exited domain of '{model.label}' at coarse step {k}, "
                        f"substep {j} (x={x:g})",
                        step_index=k,
                    )
                if not np.isfinite(nxt):
                    raise DomainExitError(
                        f"path of '{model.label}' diverged to a non-finite state at "
                        f"coarse step {k}, substep {j} (x={x:g})",
                        step_index=k,
                    )
                x = nxt
            out[k + 1] = x
    return ObservationSeries(x=out, delta_obs=delta_obs)


# a1 * delta below this switches the exact OU moments to their analytic limit
_OU_LIMIT_EPS = 1e-8


def ou_exact_transition(a0: float, a1: float, x, delta: float):
    """Exact transition mean and variance of dX = (a0 - a1 X) dt + dW.

    mean = x e^{-a1 d} + (a0/a1)(1 - e^{-a1 d}),  var = (1 - e^{-2 a1 d})/(2 a1);
    the a1 -> 0 limit (mean = x + a0 d, var = d) is used when |a1| d < 1e-8.
    Vectorized over x.
    """
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    x = np.asarray(x, dtype=float)
    z = a1 * delta
    if abs(z) < _OU_LIMIT_EPS:
        mean = x + a0 * delta
        var = delta
    else:
        beta = np.exp(-z)
        mean = x * beta + (a0 / a1) * (-np.expm1(-z))
        var = -np.expm1(-2.0 * z) / (2.0 * a1)
    if x.shape == ():
        return float(mean), float(var)
    return mean, np.broadcast_to(np.asarray(var), x.shape) if np.ndim(var) == 0 else var


def ou_exact_sample(
    a0: float,
    a1: float,
    x0: float,
    delta_obs: float,
    K: int,
    rng: np.random.Generator,
) -> ObservationSeries:
    """Draw a K-step series from the exact Gaussian transition law."""
    out = np.empty(K + 1)
    out[0] = x = float(x0)
    z = rng.standard_normal(K)
    for k in range(K):
        mean, var = ou_exact_transition(a0, a1, x, delta_obs)
        x = mean + np.sqrt(var) * z[k]
        out[k + 1] = x
    return ObservationSeries(x=out, delta_obs=delta_obs)
