"""Potential functions that certify regret bounds for the stopped game.

Three families are implemented.

* exp_weights: the softmax potential Phi(x) = log(sum e^(eta x_k)) / eta
  plus the constant (1-delta) eta / (2 delta).
* heat: the Gaussian smoothing phi(x, t) = E[max_k (x_k - sigma Y_k)] with
  sigma^2 = 2 kappa |t| and Y standard normal, which solves
  phi_t + kappa Laplacian(phi) = 0 for t < 0.
* max: a closed-form function of the ranked coordinates that solves the
  degenerate equation psi_t + kappa max_i psi_{x_i x_i} = 0 for t < 0.

A fixed-time solution u(x, t) is turned into a potential for the
geometrically stopped game by the exponentially weighted time integral

    u_hat(x) = e^delta int_{-inf}^{-delta} e^t u(x, t) dt

followed by subtracting (lower side) or adding (upper side) a constant
that accounts for the value of u at the final time -delta.  Every public
evaluator accepts a single state of shape (n,) or a batch of states in
rows of shape (b, n).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .game import check_stopping_rate, clip_simplex
from .specfun import (
    DEFAULT_QUAD,
    QuadratureSettings,
    composite_gauss_legendre,
    exp_time_nodes,
    gaussian_max_expectation,
)

_SQRT2 = math.sqrt(2.0)
_SQRT_2_PI = math.sqrt(2.0 / math.pi)

# Fixed composite Gauss-Legendre rules for the Gaussian integrals.  In the
# scaled variable the integrands live on about [-9, 9] with unit smoothness
# scale, so these resolve them to well below 1e-10.
_U_NODES, _U_WEIGHTS = composite_gauss_legendre(
    np.array([-12.0, -8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0, 12.0]), 16
)
_Y_NODES, _Y_WEIGHTS = composite_gauss_legendre(
    np.array([-9.0, -5.0, -2.0, 0.0, 2.0, 5.0, 9.0]), 16
)
_Y_PDF_W = np.exp(-0.5 * _Y_NODES**2) / math.sqrt(2.0 * math.pi) * _Y_WEIGHTS
_LOG_NDTR_Y = special.log_ndtr(_Y_NODES)

# Strategy weights tolerate a shorter rule than values do: the integrand
# has the same unit smoothness scale, and a ~1e-9 rule error on a
# probability vector is far below every consumer tolerance.  The weight
# path dominates Monte Carlo and lattice runs (profiled), so the
# geometric gradient uses this half-size rule and a reduced time order.
_YG_NODES, _YG_WEIGHTS = composite_gauss_legendre(
    np.array([-8.5, -5.0, -2.0, 0.0, 2.0, 5.0, 8.5]), 8
)
_YG_PDF_W = np.exp(-0.5 * _YG_NODES**2) / math.sqrt(2.0 * math.pi) * _YG_WEIGHTS
_LOG_NDTR_YG = special.log_ndtr(_YG_NODES)
_GRAD_TIME_ORDER = 6

# Rows per chunk are capped so intermediate tensors stay near this many
# doubles (~128 MB).
_CHUNK_BUDGET = 16_000_000


def _chunks(total: int, per_row: int):
    step = max(1, _CHUNK_BUDGET // max(per_row, 1))
    for start in range(0, total, step):
        yield start, min(start + step, total)


# ---------------------------------------------------------------------------
# diffusion factors and shift constants


def kappa_s(n: int, delta: float) -> float:
    """Diffusion factor of the heat lower-bound potential.

    (1-d)/d for n = 2, (1-d)/d * (1/2 + 1/(2n)) for odd n, and
    (1-d)/d * (1/2 + 1/(2n-2)) for even n > 2.
    """
    n = int(n)
    if n < 2:
        raise ValueError("n must be at least 2")
    ratio = (1.0 - check_stopping_rate(delta, allow_one=False)) / delta
    if n == 2:
        return ratio
    if n % 2 == 1:
        return ratio * (0.5 + 0.5 / n)
    return ratio * (0.5 + 0.5 / (n - 1))


def kappa_m(n: int, delta: float) -> float:
    """Diffusion factor of the max-family upper-bound potential.

    (1-d)/d * n^2 / (2(n-1)) for even n and (1-d)/d * (n+1)/2 for odd n.
    Always at least 2(1-d)/d.
    """
    n = int(n)
    if n < 2:
        raise ValueError("n must be at least 2")
    ratio = (1.0 - check_stopping_rate(delta, allow_one=False)) / delta
    if n % 2 == 0:
        return ratio * n * n / (2.0 * (n - 1))
    return ratio * (n + 1) / 2.0


def heat_shift_constant(n: int, delta: float, kappa: float) -> float:
    """sqrt(2 kappa delta) E[max of n standard normals]; bounds |phi(x,-d) - max x|."""
    return math.sqrt(2.0 * kappa * delta) * gaussian_max_expectation(n)


def max_shift_constant(n: int, delta: float, kappa: float) -> float:
    """2 sqrt(kappa delta / pi) (n-1)/n; bounds psi(x,-d) - max x from above."""
    return 2.0 * math.sqrt(kappa * delta / math.pi) * (n - 1) / n


def default_eta(n: int, delta: float) -> float:
    """Learning rate sqrt(2 delta log n / (1 - delta)) for the softmax potential."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if n == 1:
        # Any positive rate works; the potential degenerates to x + const.
        return math.sqrt(2.0 * delta / (1.0 - delta))
    return math.sqrt(2.0 * delta * math.log(n) / (1.0 - delta))


# ---------------------------------------------------------------------------
# handles


@dataclass(frozen=True)
class PotentialHandle:
    """Bound family plus the parameters needed to evaluate it.

    side selects whether the final-time shift constant is subtracted
    (lower bound on the game value) or added (upper bound).
    """

    family: str
    n: int
    delta: float
    side: str
    kappa: float | None = None
    eta: float | None = None
    shift_constant: float = 0.0
    quad: QuadratureSettings = field(default=DEFAULT_QUAD)

    def __post_init__(self):
        if self.family not in ("exp_weights", "heat", "max"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.side not in ("lower", "upper"):
            raise ValueError(f"side must be 'lower' or 'upper', got {self.side!r}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.family == "exp_weights":
            if self.eta is None or self.eta <= 0:
                raise ValueError("exp_weights needs a positive eta")
            if self.n < 1:
                raise ValueError("n must be at least 1")
        else:
            if self.kappa is None or self.kappa <= 0:
                raise ValueError(f"{self.family} needs a positive kappa")
            if self.n < 2:
                raise ValueError("n must be at least 2")
        if self.shift_constant < 0:
            raise ValueError("shift constant must be nonnegative")

    def with_side(self, side: str) -> "PotentialHandle":
        return replace(self, side=side)

    def value(self, x) -> float:
        return float(self.value_batch(np.asarray(x, dtype=float)[None, :])[0])

    def gradient(self, x) -> np.ndarray:
        return self.gradient_batch(np.asarray(x, dtype=float)[None, :])[0]

    def value_batch(self, X) -> np.ndarray:
        if self.family == "exp_weights":
            return exp_potential_geometric(X, self)
        if self.family == "heat":
            return heat_potential_geometric(X, self)
        return max_potential_geometric(X, self)

    def gradient_batch(self, X) -> np.ndarray:
        if self.family == "exp_weights":
            return exp_gradient(X, self)
        if self.family == "heat":
            return heat_gradient_geometric(X, self)
        return max_gradient_geometric(X, self)


def exp_handle(n: int, delta: float, eta: float | None = None,
               quad: QuadratureSettings = DEFAULT_QUAD) -> PotentialHandle:
    """Softmax upper-bound potential with the default rate unless given."""
    eta = default_eta(n, delta) if eta is None else float(eta)
    return PotentialHandle("exp_weights", int(n), float(delta), "upper",
                           eta=eta, quad=quad)


def heat_lower_handle(n: int, delta: float,
                      quad: QuadratureSettings = DEFAULT_QUAD) -> PotentialHandle:
    kappa = kappa_s(n, delta)
    return PotentialHandle("heat", int(n), float(delta), "lower", kappa=kappa,
                           shift_constant=heat_shift_constant(n, delta, kappa),
                           quad=quad)


def heat_upper_handle(n: int, delta: float,
                      quad: QuadratureSettings = DEFAULT_QUAD) -> PotentialHandle:
    kappa = (1.0 - check_stopping_rate(delta, allow_one=False)) / delta
    return PotentialHandle("heat", int(n), float(delta), "upper", kappa=kappa,
                           shift_constant=heat_shift_constant(n, delta, kappa),
                           quad=quad)


def max_lower_handle(n: int, delta: float,
                     quad: QuadratureSettings = DEFAULT_QUAD) -> PotentialHandle:
    kappa = 2.0 * (1.0 - check_stopping_rate(delta, allow_one=False)) / delta
    return PotentialHandle("max", int(n), float(delta), "lower", kappa=kappa,
                           shift_constant=max_shift_constant(n, delta, kappa),
                           quad=quad)


def max_upper_handle(n: int, delta: float,
                     quad: QuadratureSettings = DEFAULT_QUAD) -> PotentialHandle:
    kappa = kappa_m(n, delta)
    return PotentialHandle("max", int(n), float(delta), "upper", kappa=kappa,
                           shift_constant=max_shift_constant(n, delta, kappa),
                           quad=quad)


# ---------------------------------------------------------------------------
# batched fixed-time evaluators


def _as_batch(x):
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("states must have shape (n,) or (b, n) with n >= 2")
    return X, single


def _heat_value_batch(X: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """E[max_k (x_k - sigma Y_k)] for every row of X and every sigma.

    Returns shape (b, t).  Uses the tail identity for the expectation of a
    maximum, integrating in units of sigma so one fixed rule serves all
    scales.
    """
    b, n = X.shape
    t = len(sigmas)
    m = X.max(axis=1)
    out = np.empty((b, t))
    per_row = t * len(_U_NODES) * n
    for lo, hi in _chunks(b, per_row):
        shifted = X[lo:hi] - m[lo:hi, None]
        z = shifted[:, None, :] / sigmas[None, :, None]
        args = _U_NODES[None, None, :, None] - z[:, :, None, :]
        cdf = special.ndtr(args).prod(axis=-1)
        g = np.where(_U_NODES[None, None, :] > 0.0, 1.0 - cdf, -cdf)
        out[lo:hi] = m[lo:hi, None] + sigmas[None, :] * (g * _U_WEIGHTS).sum(-1)
    return out


def _heat_grad_batch(X: np.ndarray, sigmas: np.ndarray,
                     lean: bool = False) -> np.ndarray:
    """Gradient of the smoothed max: entry i is P-like weight of coordinate i.

    Returns shape (b, t, n).  Entry i equals the Gaussian integral of
    prod_{j != i} Phi(y + (x_i - x_j)/sigma) against the standard normal
    density, so entries are nonnegative and sum to one.  lean selects the
    half-size rule used for strategy weights.
    """
    b, n = X.shape
    t = len(sigmas)
    nodes, pdf_w, log_ndtr = ((_YG_NODES, _YG_PDF_W, _LOG_NDTR_YG) if lean
                              else (_Y_NODES, _Y_PDF_W, _LOG_NDTR_Y))
    diffs = X[:, :, None] - X[:, None, :]
    out = np.empty((b, t, n))
    per_row = t * len(nodes) * n * n
    for lo, hi in _chunks(b, per_row):
        z = diffs[lo:hi, None, :, :] / sigmas[None, :, None, None]
        args = nodes[None, None, :, None, None] + z[:, :, None, :, :]
        logcdf = special.log_ndtr(args)
        s = logcdf.sum(axis=-1) - log_ndtr[None, None, :, None]
        out[lo:hi] = (np.exp(s) * pdf_w[None, None, :, None]).sum(axis=2)
    return out


def _ranked(X: np.ndarray):
    """Descending stable sort plus the nonnegative ranked gap statistics.

    Returns (order, gaps) where gaps[b, l-1] = sum of the l largest entries
    minus l times the (l+1)-th largest, for l = 1..n-1.
    """
    order = np.argsort(-X, axis=-1, kind="stable")
    xs = np.take_along_axis(X, order, axis=-1)
    csum = np.cumsum(xs, axis=-1)
    ell = np.arange(1, X.shape[-1])
    gaps = csum[..., :-1] - ell * xs[..., 1:]
    return order, gaps


def _rank_coeffs(n: int) -> np.ndarray:
    ell = np.arange(1, n)
    return 1.0 / (ell * (ell + 1.0))


def _max_value_batch(X: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Closed-form ranked potential for every row of X and every sigma; (b, t)."""
    _, gaps = _ranked(X)
    coeff = _rank_coeffs(X.shape[1])
    z = gaps[:, None, :] / sigmas[None, :, None]
    sig_f = (_SQRT_2_PI * sigmas[None, :, None] * np.exp(-0.5 * z * z)
             + gaps[:, None, :] * special.erf(z / _SQRT2))
    return X.mean(axis=1)[:, None] + (coeff * sig_f).sum(axis=-1)


def _max_grad_batch(X: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Gradient of the ranked potential, unsorted back to input order; (b, t, n).

    In ranked position k (1-based) the derivative is
    1/n + sum_{l >= k} erf(z_l / sqrt 2)/(l(l+1)) - erf(z_{k-1}/sqrt 2)/k,
    the last term only for k >= 2.  Entries are nonnegative and sum to one.
    """
    b, n = X.shape
    t = len(sigmas)
    order, gaps = _ranked(X)
    coeff = _rank_coeffs(n)
    z = gaps[:, None, :] / sigmas[None, :, None]
    e = special.erf(z / _SQRT2)
    tail = np.cumsum((coeff * e)[..., ::-1], axis=-1)[..., ::-1]
    g = np.full((b, t, n), 1.0 / n)
    g[..., :-1] += tail
    g[..., 1:] -= e / np.arange(2, n + 1)
    inv = np.argsort(order, axis=-1)
    return np.take_along_axis(g, inv[:, None, :], axis=-1)


# ---------------------------------------------------------------------------
# fixed-time interface


def _check_fixed_args(t: float, kappa: float) -> float:
    if not t < 0:
        raise ValueError("t must be negative")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return math.sqrt(2.0 * kappa * (-t))


def heat_potential_fixed(x, t: float, kappa: float):
    """Smoothed-max solution of u_t + kappa Laplacian(u) = 0 at time t < 0."""
    sigma = _check_fixed_args(t, kappa)
    X, single = _as_batch(x)
    vals = _heat_value_batch(X, np.array([sigma]))[:, 0]
    return float(vals[0]) if single else vals


def heat_gradient_fixed(x, t: float, kappa: float):
    """Gradient of heat_potential_fixed; rows are probability weights."""
    sigma = _check_fixed_args(t, kappa)
    X, single = _as_batch(x)
    g = clip_simplex(_heat_grad_batch(X, np.array([sigma]))[:, 0, :])
    return g[0] if single else g


def max_potential_fixed(x, t: float, kappa: float):
    """Ranked closed-form solution of u_t + kappa max_i u_{x_i x_i} = 0 at t < 0."""
    sigma = _check_fixed_args(t, kappa)
    X, single = _as_batch(x)
    vals = _max_value_batch(X, np.array([sigma]))[:, 0]
    return float(vals[0]) if single else vals


def max_gradient_fixed(x, t: float, kappa: float):
    """Gradient of max_potential_fixed; rows are probability weights."""
    sigma = _check_fixed_args(t, kappa)
    X, single = _as_batch(x)
    g = clip_simplex(_max_grad_batch(X, np.array([sigma]))[:, 0, :])
    return g[0] if single else g


@dataclass(frozen=True)
class RankedDecomposition:
    """Stable descending order, scaled ranked gaps z, and the noise scale sigma."""

    order: np.ndarray
    z: np.ndarray
    sigma: float


def ranked_decomposition(x, t: float, kappa: float) -> RankedDecomposition:
    """Sorted-coordinate statistics feeding the max-family closed form."""
    sigma = _check_fixed_args(t, kappa)
    X, single = _as_batch(x)
    order, gaps = _ranked(X)
    z = gaps / sigma
    if single:
        return RankedDecomposition(order[0], z[0], sigma)
    return RankedDecomposition(order, z, sigma)


# ---------------------------------------------------------------------------
# geometric-horizon interface


def _apply_shift(vals: np.ndarray, handle: PotentialHandle, side: str | None):
    side = handle.side if side is None else side
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    return vals - handle.shift_constant if side == "lower" else vals + handle.shift_constant


def _geometric_value(X, handle, side, value_batch):
    t, w = exp_time_nodes(handle.delta, handle.quad)
    sigmas = np.sqrt(2.0 * handle.kappa * (-t))
    vals = (value_batch(X, sigmas) * w).sum(axis=-1)
    return _apply_shift(vals, handle, side)


def _geometric_gradient(X, handle, grad_batch):
    t, w = exp_time_nodes(handle.delta, handle.quad, order=_GRAD_TIME_ORDER)
    sigmas = np.sqrt(2.0 * handle.kappa * (-t))
    g = (grad_batch(X, sigmas) * w[None, :, None]).sum(axis=1)
    return clip_simplex(g)


def heat_potential_geometric(x, handle: PotentialHandle, side: str | None = None):
    """Exponentially time-weighted smoothed max, shifted down (lower) or up (upper)."""
    X, single = _as_batch(x)
    vals = _geometric_value(X, handle, side, _heat_value_batch)
    return float(vals[0]) if single else vals


def heat_gradient_geometric(x, handle: PotentialHandle):
    """Probability weights: time-weighted gradient of the smoothed max, renormalized."""
    X, single = _as_batch(x)
    g = _geometric_gradient(X, handle,
                            lambda Xs, sig: _heat_grad_batch(Xs, sig, lean=True))
    return g[0] if single else g


def max_potential_geometric(x, handle: PotentialHandle, side: str | None = None):
    """Exponentially time-weighted ranked potential, shifted down (lower) or up (upper)."""
    X, single = _as_batch(x)
    vals = _geometric_value(X, handle, side, _max_value_batch)
    return float(vals[0]) if single else vals


def max_gradient_geometric(x, handle: PotentialHandle):
    """Probability weights: time-weighted ranked-potential gradient, renormalized."""
    X, single = _as_batch(x)
    g = _geometric_gradient(X, handle, _max_grad_batch)
    return g[0] if single else g


def exp_potential_geometric(x, handle: PotentialHandle):
    """Softmax potential log-sum-exp(eta x)/eta + (1-delta) eta / (2 delta)."""
    X = np.asarray(x, dtype=float)
    eta = handle.eta
    vals = special.logsumexp(eta * X, axis=-1) / eta
    vals = vals + (1.0 - handle.delta) * eta / (2.0 * handle.delta)
    return float(vals) if X.ndim == 1 else vals


def exp_gradient(x, handle: PotentialHandle):
    """Softmax weights exp(eta x_k) / sum exp(eta x_j)."""
    X = np.asarray(x, dtype=float)
    return special.softmax(handle.eta * X, axis=-1)


# ---------------------------------------------------------------------------
# finite differences


def heat_value_closed_origin(handle: PotentialHandle) -> float:
    """Closed form of the time-weighted smoothed max at x = 0, before shifting.

    sqrt(2 kappa) E[max of n normals] (sqrt(d) + e^d (sqrt(pi)/2) erfc(sqrt d)).
    """
    d = handle.delta
    rd = math.sqrt(d)
    emax = gaussian_max_expectation(handle.n)
    return math.sqrt(2.0 * handle.kappa) * emax * (
        rd + math.exp(d) * 0.5 * math.sqrt(math.pi) * special.erfc(rd))


def max_value_closed_origin(handle: PotentialHandle) -> float:
    """Closed form of the time-weighted ranked potential at x = 0, before shifting.

    (n-1)/n sqrt(kappa) (e^d erfc(sqrt d) + (2/sqrt(pi)) sqrt(d)).
    """
    d = handle.delta
    rd = math.sqrt(d)
    return (handle.n - 1) / handle.n * math.sqrt(handle.kappa) * (
        math.exp(d) * special.erfc(rd) + 2.0 / math.sqrt(math.pi) * rd)


_FD_STEP = {1: 1e-5, 2: 2e-4, 3: 2e-3, 4: 6e-3}


def fd_step(order: int, x) -> float:
    """Round-off-aware step for central differences of smooth potentials."""
    scale = max(1.0, float(np.max(np.abs(x))))
    return _FD_STEP[order] * scale


def _stencil_eval(value_batch, X, offsets, steps):
    """Evaluate value_batch at X[b] + steps[b] * offsets[s]; returns (b, s)."""
    b = X.shape[0]
    pts = X[:, None, :] + steps[:, None, None] * offsets[None, :, :]
    vals = value_batch(pts.reshape(b * offsets.shape[0], X.shape[1]))
    return np.asarray(vals).reshape(b, offsets.shape[0])


def fd_gradient_batch(value_batch, X, steps=None) -> np.ndarray:
    """Central-difference gradient of a batch evaluator at each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    if steps is None:
        steps = np.array([fd_step(1, row) for row in X])
    eye = np.eye(n)
    offsets = np.concatenate([eye, -eye], axis=0)
    vals = _stencil_eval(value_batch, X, offsets, steps)
    return (vals[:, :n] - vals[:, n:]) / (2.0 * steps[:, None])


def fd_hessian_batch(value_batch, X, steps=None) -> np.ndarray:
    """Central-difference Hessians, shape (b, n, n), one batched evaluation."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    b, n = X.shape
    if steps is None:
        steps = np.array([fd_step(2, row) for row in X])
    eye = np.eye(n)
    offs = [np.zeros((1, n)), eye, -eye]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in pairs:
        offs.append((eye[i] + eye[j])[None, :])
        offs.append((eye[i] - eye[j])[None, :])
        offs.append((-eye[i] + eye[j])[None, :])
        offs.append((-eye[i] - eye[j])[None, :])
    offsets = np.concatenate(offs, axis=0)
    vals = _stencil_eval(value_batch, X, offsets, steps)
    h2 = steps**2
    hess = np.empty((b, n, n))
    center = vals[:, 0]
    for i in range(n):
        hess[:, i, i] = (vals[:, 1 + i] - 2.0 * center + vals[:, 1 + n + i]) / h2
    base = 1 + 2 * n
    for k, (i, j) in enumerate(pairs):
        pp, pm, mp, mm = (vals[:, base + 4 * k + r] for r in range(4))
        hess[:, i, j] = hess[:, j, i] = (pp - pm - mp + mm) / (4.0 * h2)
    return hess


_CENTRAL_STENCILS = {
    2: (np.array([1.0, 0.0, -1.0]), np.array([1.0, -2.0, 1.0]), 1.0),
    3: (np.array([2.0, 1.0, -1.0, -2.0]),
        np.array([1.0, -2.0, 2.0, -1.0]), 2.0),
    4: (np.array([2.0, 1.0, 0.0, -1.0, -2.0]),
        np.array([1.0, -4.0, 6.0, -4.0, 1.0]), 1.0),
}

_ONESIDED_STENCILS = {
    2: (np.array([0.0, 1.0, 2.0, 3.0]),
        np.array([2.0, -5.0, 4.0, -1.0]), 1.0),
    3: (np.array([0.0, 1.0, 2.0, 3.0, 4.0]),
        np.array([-2.5, 9.0, -12.0, 7.0, -1.5]), 1.0),
    4: (np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
        np.array([3.0, -14.0, 26.0, -24.0, 11.0, -2.0]), 1.0),
}


def directional_derivatives(handle: PotentialHandle, x, q, order: int) -> float:
    """Finite-difference directional derivative of the potential along q.

    Supports orders 2, 3 and 4.  Near a tie of the max family the central
    stencil straddles a kink in higher derivatives, so a one-sided stencil
    is used and a RuntimeWarning is issued.
    """
    if order not in (2, 3, 4):
        raise ValueError("order must be 2, 3 or 4")
    x = np.asarray(x, dtype=float)
    q = np.asarray(q, dtype=float)
    h = fd_step(order, x)
    one_sided = False
    if handle.family == "max":
        xs = np.sort(x)[::-1]
        gaps = xs[:-1] - xs[1:]
        limit = (order + 1) * h * max(np.max(np.abs(q)), 1e-300)
        if np.any((gaps > 0) & (gaps < limit)):
            one_sided = True
            warnings.warn(
                "near-tie in ranked coordinates; using one-sided stencil",
                RuntimeWarning, stacklevel=2)
    mults, coeffs, denom_scale = (
        _ONESIDED_STENCILS if one_sided else _CENTRAL_STENCILS)[order]
    pts = x[None, :] + (h * mults)[:, None] * q[None, :]
    vals = handle.value_batch(pts)
    return float(np.dot(coeffs, vals) / (denom_scale * h**order))
