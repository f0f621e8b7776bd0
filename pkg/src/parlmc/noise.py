"""Exact joint simulation of the correlated Gaussians driving the samplers.

One outer iteration of the parallel samplers consumes, per chain:

* stratified midpoints ``U_r`` uniform on ``[(r-1)/R, r/R]``,
* vanilla case: the Brownian increments ``xi_r = sqrt(2) (W(h U_r) - W(0))``
  for each midpoint plus the full increment ``xi = sqrt(2) (W(h) - W(0))``,
* kinetic case: the exponentially weighted integrals
  ``xi_r   = sqrt(2) int_0^{h U_r} (1 - e^{-gamma (h U_r - s)}) dW(s)``,
  ``xi     = sqrt(2) int_0^{h}     (1 - e^{-gamma (h - s)})     dW(s)``,
  ``xi_bar = sqrt(2) int_0^{h}      e^{-gamma (h - s)}          dW(s)``,
  all driven by one Brownian path on ``[0, h]``.

The vanilla draw sums independent Gaussian increments over the ordered times
``h U_1 < ... < h U_R < h`` (exact, O(R)).  The kinetic draw assembles the
per-coordinate covariance of the R+2 vectors in closed form via the Ito
isometry and applies its Cholesky factor to standard normals (exact in h; no
path discretization).

Streams are counter-based (Philox) and keyed by ``(seed, iteration, role)``,
so draws are bit-reproducible and independent of thread scheduling.  The
iteration-k consumption contract used by the samplers is:

* one :func:`draw_midpoints` call on ``stream(seed, k, ROLE_MIDPOINTS)``,
* one ``draw_*_noise`` call on ``stream(seed, k, ROLE_PATH)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, InternalError

ROLE_MIDPOINTS = 0
ROLE_PATH = 1
ROLE_VELOCITY = 2

_SQRT2 = np.sqrt(2.0)

# Cholesky fallback for covariances that are PSD up to rounding.
_CHOLESKY_JITTER = 1e-12
# Eigenvalue tolerance when validating an assembled covariance.
_PSD_TOL = 1e-10


def stream(seed: int, iteration: int, role: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, iteration, role).

    Distinct keys give non-overlapping Philox streams, so any draw is
    reproducible regardless of which worker or schedule executes it.
    """
    key = np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)
    counter = np.array([0, 0, int(role), int(iteration)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def psi(x):
    """Exponential-integrator weight (1 - e^{-x}) / x for x >= 0.

    Continuous at zero with psi(0) = 1; switches to a 4-term Taylor series
    below 1e-4 to avoid cancellation in 1 - e^{-x}.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("psi is defined for nonnegative arguments only")
    small = arr < 1e-4
    safe = np.where(small, 1.0, arr)
    direct = -np.expm1(-safe) / safe
    series = 1.0 - arr / 2.0 + arr * arr / 6.0 - arr**3 / 24.0
    out = np.where(small, series, direct)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def _em1(x):
    """1 - e^{-x}, accurate for small x."""
    return -np.expm1(-x)


def _g1(x):
    """x - (1 - e^{-x});  ~ x^2/2 for small x."""
    x = np.asarray(x, dtype=float)
    direct = x - _em1(x)
    series = x * x / 2 - x**3 / 6 + x**4 / 24 - x**5 / 120 + x**6 / 720 - x**7 / 5040
    return np.where(x < 0.01, series, direct)


def _g2(x):
    """x - 2(1 - e^{-x}) + (1 - e^{-2x})/2;  ~ x^3/3 for small x."""
    x = np.asarray(x, dtype=float)
    direct = x - 2 * _em1(x) + _em1(2 * x) / 2
    series = x**3 / 3 - x**4 / 4 + 7 * x**5 / 60 - x**6 / 24 + 31 * x**7 / 2520 - x**8 / 320
    return np.where(x < 0.02, series, direct)


def _g3(x):
    """(1 - e^{-x}) - (1 - e^{-2x})/2;  ~ x^2/2 for small x."""
    x = np.asarray(x, dtype=float)
    direct = _em1(x) - _em1(2 * x) / 2
    series = x * x / 2 - x**3 / 2 + 7 * x**4 / 24 - x**5 / 8 + 31 * x**6 / 720 - x**7 / 80
    return np.where(x < 0.01, series, direct)


@dataclass
class VanillaNoiseDraw:
    """Joint Brownian functionals of one vanilla outer iteration."""

    U: np.ndarray        # (..., R) midpoints the draw was conditioned on
    xi_mid: np.ndarray   # (..., R, p) midpoint increments, sqrt(2) scaled
    xi_full: np.ndarray  # (..., p) full-step increment, sqrt(2) scaled


@dataclass
class KineticNoiseDraw:
    """Joint exponential Brownian functionals of one kinetic outer iteration."""

    U: np.ndarray        # (..., R)
    xi_mid: np.ndarray   # (..., R, p)
    xi_full: np.ndarray  # (..., p)
    xi_bar: np.ndarray   # (..., p)


def draw_midpoints(R: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw U_r uniform on [(r-1)/R, r/R] for r = 1..R.

    Returns shape (R,) or (size, R).  Values are strictly increasing; the
    probability-zero float collisions at stratum boundaries are repaired by
    one-ulp bumps so downstream increment construction stays well defined.
    """
    if R < 1:
        raise ConfigurationError(f"number of strata R must be >= 1, got {R}")
    shape = (R,) if size is None else (int(size), R)
    u = (np.arange(R) + rng.random(shape)) / R
    while np.any(np.diff(u, axis=-1) <= 0):
        tied = np.diff(u, axis=-1) <= 0
        u[..., 1:] = np.where(tied, np.nextafter(u[..., :-1], np.inf), u[..., 1:])
    return u


def coeff_a_vanilla(R: int, U, j: int, r: int) -> float:
    """Inner-round weight min{1/R, U_r - (j-1)/R} for 1 <= j <= r <= R."""
    if not 1 <= j <= r <= R:
        raise IndexError(f"need 1 <= j <= r <= R, got j={j}, r={r}, R={R}")
    u = np.asarray(U, dtype=float)
    return float(min(1.0 / R, u[..., r - 1] - (j - 1) / R))


def vanilla_coefficient_matrix(R: int, U: np.ndarray) -> np.ndarray:
    """Lower-triangular (..., R, R) matrix of min{1/R, U_r - (j-1)/R} weights."""
    u = np.asarray(U, dtype=float)
    j = np.arange(R)  # j-1 for j = 1..R
    a = np.minimum(1.0 / R, u[..., :, None] - j / R)
    tri = np.tril(np.ones((R, R)))
    return np.where(tri > 0, a, 0.0)


def coeff_b_kinetic(R: int, gamma: float, h: float, U, j: int, r: int) -> float:
    """Kinetic inner-round weight: integral of 1 - e^{-gamma (U_r h - s)}.

    Integration runs over [(j-1)h/R, (h/R) min(j, R U_r)]; the closed form is
    (u2 - u1) - e^{-gamma (U_r h - u2)} (1 - e^{-gamma (u2 - u1)}) / gamma.
    """
    if not 1 <= j <= r <= R:
        raise IndexError(f"need 1 <= j <= r <= R, got j={j}, r={r}, R={R}")
    if gamma <= 0 or h <= 0:
        raise DomainError("gamma and h must be positive")
    u = np.asarray(U, dtype=float)
    u_r = float(u[..., r - 1])
    u1 = (j - 1) * h / R
    u2 = (h / R) * min(float(j), R * u_r)
    length = u2 - u1
    return float(length - np.exp(-gamma * (u_r * h - u2)) * _em1(gamma * length) / gamma)


def kinetic_coefficient_matrix(R: int, gamma: float, h: float, U: np.ndarray) -> np.ndarray:
    """Lower-triangular (..., R, R) matrix of the kinetic b weights."""
    u = np.asarray(U, dtype=float)
    j = np.arange(1, R + 1)
    u1 = (j - 1) * h / R
    u2 = (h / R) * np.minimum(j, R * u[..., :, None])
    length = u2 - u1
    b = length - np.exp(-gamma * (u[..., :, None] * h - u2)) * _em1(gamma * length) / gamma
    tri = np.tril(np.ones((R, R)))
    return np.where(tri > 0, b, 0.0)


def kinetic_velocity_weight(gamma: float, h: float, U) -> np.ndarray:
    """Velocity coefficient (1 - e^{-gamma h U}) / gamma of the inner rounds."""
    return _em1(gamma * h * np.asarray(U, dtype=float)) / gamma


def draw_vanilla_noise(
    R: int,
    h: float,
    p: int,
    U: np.ndarray,
    rng: np.random.Generator,
    size: int | None = None,
) -> VanillaNoiseDraw:
    """Exact joint draw of (xi_1..xi_R, xi) given the midpoints U.

    Builds the Brownian path at the ordered times h U_1 < ... < h U_R < h by
    summing independent increments, then scales by sqrt(2).  Per coordinate,
    Cov(xi_r, xi_s) = 2 h min(U_r, U_s), Cov(xi_r, xi) = 2 h U_r, Var(xi) = 2h.
    """
    u = np.asarray(U, dtype=float)
    if size is not None and u.ndim == 1:
        u = np.broadcast_to(u, (int(size), R)).copy()
    times = np.concatenate([u * h, np.full(u.shape[:-1] + (1,), float(h))], axis=-1)
    dt = np.diff(times, axis=-1, prepend=0.0)
    if np.any(dt < 0):
        raise InternalError("midpoint times are not nondecreasing")
    z = rng.standard_normal(times.shape + (p,))
    path = np.cumsum(np.sqrt(dt)[..., None] * z, axis=-2)
    return VanillaNoiseDraw(U=u, xi_mid=_SQRT2 * path[..., :R, :], xi_full=_SQRT2 * path[..., R, :])


def kinetic_covariance(
    R: int,
    gamma: float,
    h: float,
    U: np.ndarray,
    validate: bool = True,
) -> np.ndarray:
    """Per-coordinate covariance of (xi_1..xi_R, xi, xi_bar), closed form.

    Entry (i, j) equals 2 int_0^h g_i(s) g_j(s) ds by the Ito isometry, where
    g_r(s) = 1{s <= h U_r} (1 - e^{-gamma (h U_r - s)}) for the midpoints,
    g for xi uses h in place of h U_r, and g for xi_bar is e^{-gamma (h - s)}.
    All entries are sums of exponentials (series-stabilized for small gamma h).
    """
    if gamma <= 0 or h <= 0:
        raise DomainError("gamma and h must be positive")
    u = np.asarray(U, dtype=float)
    batch = u.shape[:-1]
    taus = np.concatenate([u * h, np.full(batch + (1,), float(h))], axis=-1)  # (..., R+1)

    lo = np.minimum(taus[..., :, None], taus[..., None, :])
    hi = np.maximum(taus[..., :, None], taus[..., None, :])
    q = np.exp(-gamma * (hi - lo))
    block = ((1.0 - q) * _g1(gamma * lo) + q * _g2(gamma * lo)) / gamma  # (..., R+1, R+1)

    cross_bar = np.exp(-gamma * (h - taus)) * _g3(gamma * taus) / gamma  # (..., R+1)
    var_bar = _em1(2.0 * gamma * h) / (2.0 * gamma)

    n = R + 2
    cov = np.zeros(batch + (n, n))
    cov[..., : R + 1, : R + 1] = block
    cov[..., : R + 1, R + 1] = cross_bar
    cov[..., R + 1, : R + 1] = cross_bar
    cov[..., R + 1, R + 1] = var_bar
    cov *= 2.0

    if validate:
        eigs = np.linalg.eigvalsh(cov)
        if np.any(eigs < -_PSD_TOL):
            raise InternalError(
                f"assembled kinetic covariance has eigenvalue {eigs.min():.3e} < -{_PSD_TOL:g} "
                f"(gamma={gamma}, h={h})"
            )
    return cov


def draw_kinetic_noise(
    R: int,
    gamma: float,
    h: float,
    p: int,
    U: np.ndarray,
    rng: np.random.Generator,
    size: int | None = None,
) -> KineticNoiseDraw:
    """Exact joint draw of (xi_1..xi_R, xi, xi_bar) given the midpoints U.

    Cholesky-factorizes the closed-form covariance (recomputed every call
    because U changes; O(R^3) accepted) and applies it to p independent
    standard-normal (R+2)-vectors.  Coordinates are independent.
    """
    u = np.asarray(U, dtype=float)
    if size is not None and u.ndim == 1:
        u = np.broadcast_to(u, (int(size), R)).copy()
    cov = kinetic_covariance(R, gamma, h, u, validate=False)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = _CHOLESKY_JITTER * np.eye(R + 2)
        try:
            chol = np.linalg.cholesky(cov + jitter)
        except np.linalg.LinAlgError as exc:
            raise InternalError(
                f"kinetic covariance not factorizable after jitter: gamma={gamma}, h={h}, U={u!r}"
            ) from exc
    z = rng.standard_normal(u.shape[:-1] + (R + 2, p))
    xi = chol @ z
    return KineticNoiseDraw(
        U=u,
        xi_mid=xi[..., :R, :],
        xi_full=xi[..., R, :],
        xi_bar=xi[..., R + 1, :],
    )
