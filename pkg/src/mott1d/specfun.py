"""Special functions and spectral profiles.

Provides normalized Hermite functions, Gaussian wave packets with exact
free evolution, smooth compactly supported potentials, unitary Fourier
transforms of potential and oscillator pair densities, the spectral
profiles g_n(xi) = Vhat(xi) * (phi_n phi_0)^(xi) that control excitation
amplitudes, and weighted Sobolev norms used by the error-bound
calculators.

Fourier convention (unitary):  fhat(k) = (2 pi)^{-1/2} int f(x) e^{-ikx} dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import quad

from .errors import QuadratureError, ValidationError

# Highest derivative order the bound calculators may request.
K_MAX = 4

# Stability budget for the Hermite recurrence.
HERMITE_N_MAX = 60

_SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Hermite functions
# ---------------------------------------------------------------------------

def hermite_fn(n: int, x):
    """Value of the L2-normalized harmonic oscillator eigenfunction phi_n(x).

    Uses the three-term recurrence on the weighted functions
    psi_k = x sqrt(2/k) psi_{k-1} - sqrt((k-1)/k) psi_{k-2},
    which is stable because the Gaussian weight is carried along.
    """
    if n < 0:
        raise ValidationError("hermite_fn: n must be nonnegative")
    if n > HERMITE_N_MAX:
        raise ValidationError(
            f"hermite_fn: n={n} exceeds stability budget {HERMITE_N_MAX}"
        )
    x = np.asarray(x, dtype=float)
    p0 = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n == 0:
        return p0
    p1 = math.sqrt(2.0) * x * p0
    if n == 1:
        return p1
    for k in range(2, n + 1):
        p0, p1 = p1, x * math.sqrt(2.0 / k) * p1 - math.sqrt((k - 1) / k) * p0
    return p1


def _pair_poly(m: int, n: int) -> np.ndarray:
    """Complex coefficients of P with (phi_m phi_n)^(xi) = P(xi) e^{-xi^2/4}.

    Built from the product linearization
    H_m H_n = sum_r C(m,r) C(n,r) r! 2^r H_{m+n-2r}
    and int H_p(x) e^{-x^2} e^{-i xi x} dx = sqrt(pi) (-i xi)^p e^{-xi^2/4}.
    """
    pref = 1.0 / (_SQRT_2PI * math.sqrt(2.0 ** (m + n) * math.factorial(m) * math.factorial(n)))
    coeffs = np.zeros(m + n + 1, dtype=complex)
    for r in range(min(m, n) + 1):
        p = m + n - 2 * r
        c = math.comb(m, r) * math.comb(n, r) * math.factorial(r) * 2.0 ** r
        coeffs[p] += pref * c * (-1j) ** p
    return coeffs


def _gaussian_poly_derivative(coeffs: np.ndarray, order: int) -> np.ndarray:
    """Coefficients of d^order [P(xi) e^{-xi^2/4}] / e^{-xi^2/4}.

    One derivative maps P -> P' - (xi/2) P.
    """
    c = np.asarray(coeffs, dtype=complex)
    for _ in range(order):
        shifted = np.concatenate([[0.0], -0.5 * c])
        c = npoly.polyadd(npoly.polyder(c), shifted)
    return c


def hermite_pair_transform(m: int, n: int, xi, order: int = 0):
    """Fourier transform (phi_m phi_n)^(xi), optionally differentiated.

    Closed Gaussian-Hermite form; exact up to floating point.
    """
    if min(m, n) < 0 or max(m, n) > HERMITE_N_MAX:
        raise ValidationError("hermite_pair_transform: order out of range")
    xi = np.asarray(xi, dtype=float)
    coeffs = _gaussian_poly_derivative(_pair_poly(m, n), order)
    return npoly.polyval(xi, coeffs) * np.exp(-0.25 * xi * xi)


def pair_transform(n: int, xi, order: int = 0):
    """(phi_n phi_0)^(xi) under the unitary convention.

    Equals (2 pi)^{-1/2} (2^n n!)^{-1/2} (-i xi)^n e^{-xi^2/4}.
    """
    return hermite_pair_transform(n, 0, xi, order=order)


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Potential:
    """Nonnegative continuous interaction profile with compact support.

    `evaluate` vanishes identically for |x| > support_radius.  Quadrature
    nodes over the support are fixed at construction so transforms and
    weighted norms are deterministic and cheap.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    _nodes: np.ndarray = field(repr=False)
    _weights: np.ndarray = field(repr=False)
    _values: np.ndarray = field(repr=False)
    _norm_cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))

    def l1_weighted_norm(self, s: float) -> float:
        """||V||_{L^1_s} = int <x>^s V(x) dx (V >= 0 on its support)."""
        key = float(s)
        if key not in self._norm_cache:
            w = (1.0 + self._nodes**2) ** (0.5 * s)
            self._norm_cache[key] = float(np.sum(self._weights * w * self._values))
        return self._norm_cache[key]

    def moment(self, q: int) -> float:
        """int |x|^q V(x) dx, used by the coupling-profile norm bounds."""
        return float(np.sum(self._weights * np.abs(self._nodes) ** q * self._values))


def _composite_gl(a: float, b: float, panels: int, order: int):
    """Nodes and weights of composite Gauss-Legendre on [a, b]."""
    x0, w0 = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(0.5 * (lo + hi) + half * x0)
        weights.append(half * w0)
    return np.concatenate(nodes), np.concatenate(weights)


def make_potential(evaluate: Callable, support_radius: float,
                   quad_panels: int = 12, quad_order: int = 32) -> Potential:
    """Wrap a callable as a Potential, validating positivity and support."""
    if support_radius <= 0:
        raise ValidationError("support_radius must be positive")
    nodes, weights = _composite_gl(-support_radius, support_radius, quad_panels, quad_order)
    values = np.asarray(evaluate(nodes), dtype=float)
    if np.any(values < 0):
        raise ValidationError("potential must be nonnegative")
    probe = np.asarray(evaluate(np.array([support_radius * 1.001, -support_radius * 1.001])))
    if np.any(probe != 0.0):
        raise ValidationError("potential must vanish outside its support radius")
    return Potential(evaluate=evaluate, support_radius=float(support_radius),
                     _nodes=nodes, _weights=weights, _values=values)


def bump_potential(radius: float = 1.0, height: float = 1.0) -> Potential:
    """Smooth bump V(x) = height * exp(1 - 1/(1 - (x/radius)^2)) on |x| < radius.

    Infinitely smooth, positive, compactly supported; V(0) = height.
    """
    if radius <= 0 or height <= 0:
        raise ValidationError("bump_potential: radius and height must be positive")

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        u = x / radius
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - ui * ui))
        return out

    return make_potential(evaluate, radius)


def potential_transform(V: Potential, xi, order: int = 0):
    """d^order Vhat(xi) with Vhat(xi) = (2 pi)^{-1/2} int V(x) e^{-i xi x} dx.

    Derivatives come from the exact moment form
    d^q Vhat(xi) = (2 pi)^{-1/2} int (-ix)^q V(x) e^{-i xi x} dx.
    """
    xi = np.asarray(xi, dtype=float)
    phase = np.exp(-1j * np.outer(xi, V._nodes))
    mom = (-1j * V._nodes) ** order * V._values * V._weights
    out = phase @ mom / _SQRT_2PI
    return out.reshape(xi.shape) if xi.shape else out[0]


# ---------------------------------------------------------------------------
# Spectral profiles g_n
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralProfile:
    """g_n(xi) = Vhat(xi) * (phi_n phi_0)^(xi) with analytic derivatives.

    Derivatives up to `derivative_order_max` are assembled by the Leibniz
    rule from the moment form of Vhat and the polynomial-times-Gaussian
    form of the pair transform.
    """

    n: int
    potential: Potential
    derivative_order_max: int = K_MAX

    def value(self, xi):
        return self.derivative(xi, 0)

    def derivative(self, xi, order: int):
        if order > self.derivative_order_max:
            raise ValidationError(
                f"spectral profile derivative order {order} exceeds budget "
                f"{self.derivative_order_max}"
            )
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape if xi.shape else (1,), dtype=complex)
        for q in range(order + 1):
            out += math.comb(order, q) * (
                potential_transform(self.potential, xi, order=q)
                * pair_transform(self.n, xi, order=order - q)
            ).reshape(out.shape)
        return out.reshape(xi.shape) if xi.shape else out[0]

    def __call__(self, xi):
        return self.value(xi)

    def abs_derivative_sum(self, xi, k: int):
        """sum_{m<=k} |d^m g_n(xi)|, the weight appearing in derivative bounds."""
        xi = np.asarray(xi, dtype=float)
        total = np.zeros(xi.shape, dtype=float)
        for m in range(k + 1):
            total += np.abs(self.derivative(xi, m))
        return total

    def weighted_norm(self, k: int, s: float, half_width: float = 40.0,
                      n_nodes: int = 4000) -> float:
        """sum_{m<=k} int <xi>^s |d^m g_n(xi)| dxi by dense quadrature."""
        nodes, weights = _composite_gl(-half_width, half_width, 8, max(n_nodes // 8, 64))
        w = (1.0 + nodes**2) ** (0.5 * s)
        total = 0.0
        for m in range(k + 1):
            total += float(np.sum(weights * w * np.abs(self.derivative(nodes, m))))
        return total


def spectral_profile(V: Potential, n: int) -> SpectralProfile:
    """Spectral profile g_n for potential V and excitation level n."""
    if n < 0:
        raise ValidationError("spectral_profile: n must be nonnegative")
    return SpectralProfile(n=n, potential=V)


# ---------------------------------------------------------------------------
# Gaussian packets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianPacket:
    """Gaussian wave packet A exp(-(x-c)^2 / (2 w^2) + i p x / hbar).

    The phase is referenced to the origin, matching the initial-state
    convention; int |psi|^2 = |A|^2 w sqrt(pi).
    """

    center: float
    width: float
    momentum: float
    amplitude: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.width <= 0:
            raise ValidationError("GaussianPacket: width must be positive")

    def evaluate(self, x, hbar: float):
        x = np.asarray(x, dtype=float)
        arg = -((x - self.center) ** 2) / (2.0 * self.width**2)
        return self.amplitude * np.exp(arg + 1j * self.momentum * x / hbar)

    def evolved(self, x, t: float, mass: float, hbar: float):
        """Exact free evolution by e^{-i t K0 / hbar}, K0 = -(hbar^2/2M) d^2/dx^2.

        psi(x,t) = A (1+i th)^{-1/2} e^{i k0 x - i hbar k0^2 t / (2M)}
                   exp(-(x - c - hbar k0 t / M)^2 / (2 w^2 (1 + i th))),
        th = hbar t / (M w^2), k0 = p / hbar.
        """
        x = np.asarray(x, dtype=float)
        k0 = self.momentum / hbar
        theta = hbar * t / (mass * self.width**2)
        drift = hbar * k0 * t / mass
        denom = 2.0 * self.width**2 * (1.0 + 1j * theta)
        phase = 1j * k0 * x - 1j * hbar * k0**2 * t / (2.0 * mass)
        return (self.amplitude / np.sqrt(1.0 + 1j * theta)
                * np.exp(phase - (x - self.center - drift) ** 2 / denom))

    def norm_squared(self) -> float:
        return float(abs(self.amplitude) ** 2 * self.width * math.sqrt(math.pi))


def normalization_factor(P0: float, sigma: float, hbar: float) -> float:
    """N = [2 sqrt(pi) (1 + e^{-(P0 sigma / hbar)^2})]^{-1/2}.

    Normalizes the superposition of the two counter-propagating packets.
    """
    return (2.0 * math.sqrt(math.pi) * (1.0 + math.exp(-((P0 * sigma / hbar) ** 2)))) ** -0.5


def initial_packets(P0: float, sigma: float, hbar: float):
    """The pair (psi_plus, psi_minus) of counter-propagating packets at t=0."""
    N = normalization_factor(P0, sigma, hbar)
    amp = N / math.sqrt(sigma)
    return (GaussianPacket(0.0, sigma, +P0, amp), GaussianPacket(0.0, sigma, -P0, amp))


# ---------------------------------------------------------------------------
# Weighted Sobolev norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightedNorm:
    value: float
    tail_bound: float


def _fd_derivative(f: Callable, x: np.ndarray, m: int, step: float = 1e-4):
    """Central finite difference of order m with one Richardson check."""
    if m == 0:
        return np.asarray(f(x))

    def diff(h):
        coeffs = {1: ([-0.5, 0.5], [-1, 1]),
                  2: ([1.0, -2.0, 1.0], [-1, 0, 1]),
                  3: ([-0.5, 1.0, -1.0, 0.5], [-2, -1, 1, 2]),
                  4: ([1.0, -4.0, 6.0, -4.0, 1.0], [-2, -1, 0, 1, 2])}
        c, offs = coeffs[m]
        acc = np.zeros(np.shape(x), dtype=complex)
        for ci, oi in zip(c, offs):
            acc = acc + ci * np.asarray(f(x + oi * h))
        return acc / h**m

    d1 = diff(step)
    d2 = diff(step / 2.0)
    # Richardson check: disagreement flags a bad step for this function.
    scale = np.max(np.abs(d2)) + 1e-300
    if np.max(np.abs(d1 - d2)) > 1e-3 * scale + 1e-12:
        d1 = diff(step / 4.0)
        if np.max(np.abs(d2 - d1)) > 1e-2 * scale + 1e-9:
            raise QuadratureError("finite-difference derivative did not stabilize")
        return d1
    return d2


def weighted_sobolev_norm(f: Callable, k: int, s: float,
                          derivative: Optional[Callable] = None,
                          initial_half_width: float = 8.0,
                          rel_tol: float = 1e-10,
                          ndim: int = 1) -> WeightedNorm:
    """Weighted norm sum_l sum_{m<=k} int <x>^s |d_{x_l}^m f(x)| dx.

    On the line (ndim=1): `derivative(x, m)`, when given, supplies analytic
    derivatives; otherwise central differences with step 1e-4 and a
    Richardson check are used.  The domain is expanded until the integrand
    is negligible at the edges; the reported tail bound extrapolates the
    observed edge decay.  On the plane (ndim=2, f(x, y) vectorized) the
    axis derivatives are central differences on a tensor grid.
    """
    if k > K_MAX:
        raise ValidationError(f"weighted_sobolev_norm: k={k} exceeds K_MAX={K_MAX}")
    if ndim == 2:
        return _weighted_norm_plane(f, k, s, initial_half_width, rel_tol)
    if ndim != 1:
        raise ValidationError("weighted_sobolev_norm: ndim must be 1 or 2")

    def dmf(x, m):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if derivative is not None:
            return np.asarray(derivative(x, m))
        return _fd_derivative(f, x, m)

    def integrand(x, m):
        x = np.atleast_1d(x)
        return (1.0 + x**2) ** (0.5 * s) * np.abs(dmf(x, m))

    # Expand the window until every order's integrand decays at the edge.
    X = initial_half_width
    for _ in range(12):
        edge = max(float(integrand(np.array([sgn * X]), m)[0])
                   for m in range(k + 1) for sgn in (-1.0, 1.0))
        center = max(float(np.max(integrand(np.linspace(-X, X, 41), m)))
                     for m in range(k + 1))
        if edge <= rel_tol * max(center, 1e-300):
            break
        X *= 2.0
    else:
        raise QuadratureError("weighted_sobolev_norm: integrand does not decay")

    total = 0.0
    for m in range(k + 1):
        val, err = quad(lambda u: float(integrand(np.array([u]), m)[0]),
                        -X, X, limit=400, epsabs=1e-13, epsrel=1e-10)
        if not math.isfinite(val):
            raise QuadratureError("weighted_sobolev_norm: quadrature diverged")
        total += val

    # Tail estimate from the local decay rate at the edge.
    tail = 0.0
    for m in range(k + 1):
        h_out = float(integrand(np.array([X]), m)[0]) + float(integrand(np.array([-X]), m)[0])
        h_in = float(integrand(np.array([0.9 * X]), m)[0]) + float(integrand(np.array([-0.9 * X]), m)[0])
        if h_out > 0 and h_in > h_out:
            rate = math.log(h_in / h_out) / (0.1 * X)
            tail += h_out / rate
        else:
            tail += h_out * X
    return WeightedNorm(value=total, tail_bound=tail)


def _weighted_norm_plane(f: Callable, k: int, s: float,
                         initial_half_width: float, rel_tol: float) -> WeightedNorm:
    """Tensor-grid evaluation of the plane norm with axis derivatives."""
    stencils = {0: ([1.0], [0]),
                1: ([-0.5, 0.5], [-1, 1]),
                2: ([1.0, -2.0, 1.0], [-1, 0, 1]),
                3: ([-0.5, 1.0, -1.0, 0.5], [-2, -1, 1, 2]),
                4: ([1.0, -4.0, 6.0, -4.0, 1.0], [-2, -1, 0, 1, 2])}
    h = 1e-4

    def axis_deriv(X, Y, m, axis):
        c, offs = stencils[m]
        acc = np.zeros(X.shape, dtype=complex)
        for ci, oi in zip(c, offs):
            if axis == 0:
                acc += ci * np.asarray(f(X + oi * h, Y))
            else:
                acc += ci * np.asarray(f(X, Y + oi * h))
        return acc / h**m

    X_half = initial_half_width
    for _ in range(10):
        edge = np.linspace(-X_half, X_half, 21)
        probe = np.abs(np.asarray(f(np.full_like(edge, X_half), edge))).max()
        probe = max(probe, np.abs(np.asarray(f(edge, np.full_like(edge, X_half)))).max())
        center = np.abs(np.asarray(f(edge[:, None], edge[None, :]))).max()
        if probe <= rel_tol * max(center, 1e-300):
            break
        X_half *= 1.6
    else:
        raise QuadratureError("weighted_sobolev_norm: plane integrand does not decay")

    nodes, w = _composite_gl(-X_half, X_half, 12, 16)
    Xg, Yg = np.meshgrid(nodes, nodes, indexing="ij")
    weight = (1.0 + Xg**2 + Yg**2) ** (0.5 * s)
    # The plane norm sums each axis separately, m = 0 included for both.
    total = 0.0
    for axis in (0, 1):
        for m in range(k + 1):
            vals = np.abs(axis_deriv(Xg, Yg, m, axis))
            if not np.all(np.isfinite(vals)):
                raise QuadratureError("weighted_sobolev_norm: plane quadrature diverged")
            total += float(w @ (weight * vals) @ w)
    return WeightedNorm(value=total, tail_bound=4.0 * X_half * probe)
