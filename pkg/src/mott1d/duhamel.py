"""Numerically exact evaluation of the perturbation series on a grid.

Computes the first and second Duhamel iterates of the coupled evolution,

    f1[n, j](t) = -int_0^t ds G_{n0}(t-s) V^{a_j}_{n0}
                  e^{-2 i s E0 / hbar} e^{-i s K0 / hbar} psi,
    f2[n1, n2](t) = -int_0^t ds G_{n1 n2}(t-s)
                  (V^{a1}_{n1 0} f1[n2, 2](s) + V^{a2}_{n2 0} f1[n1, 1](s)),

with G_{mn}(u) = i (lam/hbar) e^{-i u (E_m + E_n)/hbar} e^{-i u K0/hbar},
and the joint excitation probability P = int dR |f2|^2.

Free propagation is spectral (exactly unitary on the grid).  The time
integrals are evaluated in the interaction picture: with
I_j(s) = e^{i s K0/hbar} V^{a_j}_{n 0} e^{-i s K0/hbar}, the nested
integral collapses to one cumulative pass over a shared time grid,

    f2(t) = -(lam/hbar)^2 e^{-i (n1+n2+1) w t} e^{-i t K0/hbar}
            int_0^t ds [ e^{i n2 w s} I_2(s) A_1(s)
                       + e^{i n1 w s} I_1(s) A_2(s) ],
    A_j(s) = int_0^s ds' e^{i n_j w s'} I_j(s') psi,

which `f2_literal` re-derives from the defining form with explicit
G_{mn}(t-s) propagators as an internal identity check.

The time grid concentrates nodes in windows around the classical flight
times, where the coupling overlaps the moving packet; elsewhere the
integrand is suppressed by the packet's Gaussian tails.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import PropagationError, ValidationError
from .params import PhysicalParams
from .specfun import Potential, hermite_fn, initial_packets

BOUNDARY_REL_TOL = 1e-8


# ---------------------------------------------------------------------------
# Grid functions
# ---------------------------------------------------------------------------

@dataclass
class GridFunction:
    """Complex samples on the uniform grid x_min + dx * [0, n_points)."""

    samples: np.ndarray
    x_min: float
    x_max: float

    @property
    def n_points(self) -> int:
        return self.samples.size

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    def l2_norm(self) -> float:
        return math.sqrt(self.norm_squared())

    def norm_squared(self) -> float:
        return self.dx * float(np.sum(np.abs(self.samples) ** 2))

    def centroid(self) -> float:
        rho = np.abs(self.samples) ** 2
        tot = float(np.sum(rho))
        if tot == 0.0:
            raise ValidationError("centroid of an identically zero function")
        return float(np.sum(self.x * rho) / tot)

    def momentum_peak(self, hbar: float) -> float:
        """Momentum at the peak of |fft|^2, refined by quadratic interpolation."""
        k = 2.0 * math.pi * np.fft.fftfreq(self.n_points, d=self.dx)
        spec = np.abs(np.fft.fft(self.samples)) ** 2
        order = np.argsort(k)
        k, spec = k[order], spec[order]
        i = int(np.argmax(spec))
        if 0 < i < k.size - 1:
            y0, y1, y2 = spec[i - 1], spec[i], spec[i + 1]
            denom = y0 - 2.0 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
            return hbar * (k[i] + shift * (k[1] - k[0]))
        return hbar * k[i]

    def boundary_ratio(self, scale: float = 0.0) -> float:
        mx = max(float(np.max(np.abs(self.samples))), scale)
        if mx == 0.0:
            return 0.0
        return float(max(abs(self.samples[0]), abs(self.samples[-1]))) / mx

    def check_boundary(self, scale: float = 0.0):
        """Detect wrap-around contamination at the grid edges.

        `scale` sets the magnitude a genuinely wrapped signal would have;
        without it the function's own maximum is the reference.
        """
        ratio = self.boundary_ratio(scale)
        if ratio > BOUNDARY_REL_TOL:
            raise PropagationError(
                f"boundary contamination: edge/scale = {ratio:.3e}"
            )

    def to_bytes(self) -> bytes:
        """Header x_min, x_max (little-endian f64), n_points (le i64), then
        interleaved re/im f64 samples."""
        head = struct.pack("<ddq", self.x_min, self.x_max, self.n_points)
        inter = np.empty(2 * self.n_points)
        inter[0::2] = self.samples.real
        inter[1::2] = self.samples.imag
        return head + inter.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridFunction":
        x_min, x_max, n = struct.unpack("<ddq", blob[:24])
        inter = np.frombuffer(blob[24:], dtype="<f8")
        if inter.size != 2 * n:
            raise ValidationError("GridFunction.from_bytes: truncated payload")
        return cls(samples=inter[0::2] + 1j * inter[1::2], x_min=x_min, x_max=x_max)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "GridFunction":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass(frozen=True)
class OracleConfig:
    """Discretization controls for the grid oracle.

    n_time_nodes is the interval count in each dense window around a
    flight time (sparse panels get a quarter of that); in `uniform` mode
    it covers the whole range [0, t] instead.
    """

    n_points: int = 16384
    domain_pad: float = 20.0       # multiples of sigma beyond the ballistic range
    n_time_nodes: int = 384
    quadrature_rule: str = "simpson"
    time_grid: str = "graded"
    window_spread: float = 7.0     # packet widths kept inside a dense window
    hermite_tail: float = 10.0     # coupling support margin, units of gamma
    convergence_rtol: float = 0.01

    def __post_init__(self):
        if self.n_points < 64 or self.n_points & (self.n_points - 1):
            raise ValidationError("OracleConfig: n_points must be a power of two")
        if self.quadrature_rule not in ("simpson", "gauss"):
            raise ValidationError("OracleConfig: unknown quadrature rule")
        if self.time_grid not in ("graded", "uniform"):
            raise ValidationError("OracleConfig: unknown time grid mode")
        if self.quadrature_rule == "simpson" and self.n_time_nodes % 2:
            raise ValidationError("OracleConfig: n_time_nodes must be even for Simpson")
        if self.domain_pad <= 0 or self.n_time_nodes < 8:
            raise ValidationError("OracleConfig: bad discretization sizes")


# ---------------------------------------------------------------------------
# Time grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeRule:
    """Composite Simpson rule on panels that share edge nodes."""

    nodes: np.ndarray
    weights: np.ndarray
    panels: tuple             # (start_index, n_nodes, h) per uniform panel

    def cumulative_weights(self, idx: int) -> np.ndarray:
        """Weights of the cumulative integral int_0^{nodes[idx]}.

        Matches the streaming pass exactly: complete Simpson pairs, plus
        the (5, 8, -1) h/12 midpoint rule when idx is interior to a pair
        (the -1/12 weight falls on the node one past idx).
        """
        w = np.zeros(self.nodes.size)
        for start, n_nodes, h in self.panels:
            if start >= idx:
                break
            top = min(start + n_nodes - 1, idx)
            pair0 = start
            while pair0 < top:
                if pair0 + 2 <= idx:
                    w[pair0] += h / 3.0
                    w[pair0 + 1] += 4.0 * h / 3.0
                    w[pair0 + 2] += h / 3.0
                else:
                    w[pair0] += 5.0 * h / 12.0
                    w[pair0 + 1] += 8.0 * h / 12.0
                    w[pair0 + 2] += -h / 12.0
                pair0 += 2
        return w


def _window_panels(t: float, centers, half_width: float):
    """Dense windows around the transit times, merged, padded with sparse gaps."""
    wins = []
    for c in centers:
        lo, hi = max(0.0, c - half_width), min(t, c + half_width)
        if hi > lo:
            wins.append([lo, hi])
    wins.sort()
    merged = []
    for w in wins:
        if merged and w[0] <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], w[1])
        else:
            merged.append(w)
    panels = []
    cursor = 0.0
    for lo, hi in merged:
        if lo > cursor + 1e-12:
            panels.append((cursor, lo, False))
        panels.append((lo, hi, True))
        cursor = hi
    if cursor < t - 1e-12:
        panels.append((cursor, t, False))
    if not panels:
        panels = [(0.0, t, True)]
    return panels


def _simpson_weights(n_nodes: int, h: float) -> np.ndarray:
    w = np.full(n_nodes, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


def build_time_rule(t: float, centers, half_width: float, cfg: OracleConfig) -> TimeRule:
    if t <= 0:
        raise ValidationError("time rule requires t > 0")
    if cfg.time_grid == "uniform":
        spans = [(0.0, t, True)]
    else:
        spans = _window_panels(t, centers, half_width)

    if cfg.quadrature_rule == "gauss":
        base, bw = np.polynomial.legendre.leggauss(16)
        node_chunks, weight_chunks = [], []
        for lo, hi, dense in spans:
            n_sub = max((cfg.n_time_nodes if dense else cfg.n_time_nodes // 4) // 16, 1)
            edges = np.linspace(lo, hi, n_sub + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                half = 0.5 * (b - a)
                node_chunks.append(0.5 * (a + b) + half * base)
                weight_chunks.append(half * bw)
        return TimeRule(nodes=np.concatenate(node_chunks),
                        weights=np.concatenate(weight_chunks), panels=())

    node_chunks, weight_chunks, panels = [], [], []
    idx = 0
    for lo, hi, dense in spans:
        n_int = cfg.n_time_nodes if dense else max(cfg.n_time_nodes // 4, 8)
        n_int += n_int % 2
        pn = np.linspace(lo, hi, n_int + 1)
        h = (hi - lo) / n_int
        pw = _simpson_weights(n_int + 1, h)
        if node_chunks:
            weight_chunks[-1][-1] += pw[0]
            node_chunks.append(pn[1:])
            weight_chunks.append(pw[1:])
            panels.append((idx - 1, n_int + 1, h))
            idx += n_int
        else:
            node_chunks.append(pn)
            weight_chunks.append(pw)
            panels.append((0, n_int + 1, h))
            idx += n_int + 1
    return TimeRule(nodes=np.concatenate(node_chunks),
                    weights=np.concatenate(weight_chunks),
                    panels=tuple(panels))


# ---------------------------------------------------------------------------
# Coupling potentials
# ---------------------------------------------------------------------------

def coupling_profile(V: Potential, m: int, n: int, u, tail: float = 10.0):
    """W(u) = int dz V(z) (phi_m phi_n)(u - z), the coupling in scaled units.

    V^{a}_{mn}(x) = W((x - a) / gamma); symmetric in (m, n) and supported
    within the potential support plus the oscillator localization tail.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    r0 = V.support_radius
    reach = r0 + tail + math.sqrt(2.0 * (m + n) + 1.0)
    out = np.zeros(u.shape)
    act = np.abs(u) <= reach
    if np.any(act):
        zn, zw = np.polynomial.legendre.leggauss(200)
        zn, zw = r0 * zn, r0 * zw
        vz = V(zn)
        arg = u[act][:, None] - zn[None, :]
        out[act] = (hermite_fn(m, arg) * hermite_fn(n, arg)) @ (zw * vz)
    return out


def coupling_potential(p: PhysicalParams, V: Potential, a: float, m: int, n: int,
                       tail: float = 10.0):
    """x -> V^{a}_{mn}(x) = int dy phi_m^a(y) phi_n^a(y) V((x - y)/gamma)."""
    if max(m, n) > 10:
        raise ValidationError("coupling_potential: oscillator index budget is 10")
    if min(m, n) < 0:
        raise ValidationError("coupling_potential: indices must be nonnegative")

    def fn(x):
        x = np.asarray(x, dtype=float)
        return coupling_profile(V, m, n, (x - a) / p.gamma, tail=tail)

    return fn


# ---------------------------------------------------------------------------
# Free propagation (public spec surface)
# ---------------------------------------------------------------------------

def free_propagate(g: GridFunction, t: float, p: PhysicalParams) -> GridFunction:
    """e^{-i t K0 / hbar} g by spectral multiplication; exactly unitary."""
    g.check_boundary()
    k = 2.0 * math.pi * np.fft.fftfreq(g.n_points, d=g.dx)
    phase = np.exp(-1j * p.hbar * k * k * t / (2.0 * p.M))
    out = GridFunction(np.fft.ifft(np.fft.fft(g.samples) * phase), g.x_min, g.x_max)
    out.check_boundary()
    return out


# ---------------------------------------------------------------------------
# The oracle
# ---------------------------------------------------------------------------

class Oracle:
    """Grid evaluator of the perturbation iterates for one configuration."""

    def __init__(self, params: PhysicalParams, potential: Potential,
                 config: Optional[OracleConfig] = None):
        self.p = params
        self.V = potential
        self.cfg = config or OracleConfig()
        self._grids = {}
        self._couplings = {}

    # -- grid and coupling caches ---------------------------------------------

    def _grid(self, t: float):
        key = round(float(t), 12)
        if key not in self._grids:
            p, cfg = self.p, self.cfg
            reach = (max(p.v0 * t, abs(p.a2), abs(p.a1))
                     + cfg.domain_pad * p.sigma
                     + p.gamma * (self.V.support_radius + cfg.hermite_tail))
            dx = 2.0 * reach / cfg.n_points
            k_needed = p.P0 / p.hbar + 10.0 / p.gamma + 4.0 / p.sigma
            if math.pi / dx < 1.5 * k_needed:
                raise ValidationError(
                    "OracleConfig.n_points too small for the momentum content"
                )
            x = -reach + dx * np.arange(cfg.n_points)
            k = 2.0 * math.pi * np.fft.fftfreq(cfg.n_points, d=dx)
            self._grids[key] = (-reach, reach, x, k)
        return self._grids[key]

    def _coupling(self, t_key: float, j: int, n: int) -> np.ndarray:
        key = (t_key, j, n)
        if key not in self._couplings:
            _, _, x, _ = self._grid(t_key)
            self._couplings[key] = coupling_profile(
                self.V, n, 0, (x - self.p.center(j)) / self.p.gamma,
                tail=self.cfg.hermite_tail)
        return self._couplings[key]

    # -- building blocks ---------------------------------------------------------

    def _phase(self, k: np.ndarray, t: float) -> np.ndarray:
        return np.exp(-1j * self.p.hbar * k * k * t / (2.0 * self.p.M))

    def _propagate(self, samples: np.ndarray, t: float, k: np.ndarray) -> np.ndarray:
        return np.fft.ifft(np.fft.fft(samples) * self._phase(k, t))

    def initial_samples(self, t: float, branch: str = "both") -> np.ndarray:
        _, _, x, _ = self._grid(t)
        plus, minus = initial_packets(self.p.P0, self.p.sigma, self.p.hbar)
        if branch == "plus":
            return plus.evaluate(x, self.p.hbar)
        if branch == "minus":
            return minus.evaluate(x, self.p.hbar)
        if branch == "both":
            return plus.evaluate(x, self.p.hbar) + minus.evaluate(x, self.p.hbar)
        raise ValidationError(f"unknown branch {branch!r}")

    @staticmethod
    def _check_edges(samples: np.ndarray, scale: float):
        edge = max(abs(samples[0]), abs(samples[-1]))
        if edge > BOUNDARY_REL_TOL * scale:
            raise PropagationError(
                f"boundary contamination during propagation: "
                f"edge/scale = {edge / scale:.3e}"
            )

    def _transit_half_width(self, t: float) -> float:
        p = self.p
        spread = p.sigma * math.sqrt(1.0 + (p.hbar * t / (p.M * p.sigma**2)) ** 2)
        reach = p.gamma * (self.V.support_radius + self.cfg.hermite_tail)
        return (reach + self.cfg.window_spread * spread) / p.v0

    def time_rule(self, t: float, oscillators=(1, 2),
                  cfg: Optional[OracleConfig] = None) -> TimeRule:
        centers = [self.p.flight_time(j) for j in oscillators]
        return build_time_rule(t, centers, self._transit_half_width(t),
                               cfg or self.cfg)

    # -- first order ----------------------------------------------------------------

    def f1(self, n: int, j: int, t: float, branch: str = "both",
           time_nodes: Optional[int] = None) -> GridFunction:
        """First iterate f1[n, j](t); identically zero coefficients (both
        oscillators excited) never reach this code path, see `f1_pair`."""
        if t <= 0:
            raise ValidationError("f1 oracle requires t > 0")
        if n < 1:
            raise ValidationError("f1 oracle requires n >= 1")
        cfg = self.cfg if time_nodes is None else replace(self.cfg, n_time_nodes=time_nodes)
        p = self.p
        x_min, x_max, x, k = self._grid(t)
        rule = build_time_rule(t, [p.flight_time(j)], self._transit_half_width(t), cfg)

        Vj = self._coupling(round(float(t), 12), j, n)
        psi0 = self.initial_samples(t, branch)
        psi_hat = np.fft.fft(psi0)

        psi_scale = float(np.max(np.abs(psi0)))
        acc = np.zeros(x.size, dtype=complex)
        for s, w in zip(rule.nodes, rule.weights):
            ph = self._phase(k, s)
            fwd = np.fft.ifft(psi_hat * ph)
            self._check_edges(fwd, psi_scale)
            ticked = np.fft.ifft(np.fft.fft(Vj * fwd) * np.conj(ph))
            acc += (w * np.exp(1j * n * p.omega * s)) * ticked

        pref = -1j * (p.lam / p.hbar) * np.exp(-1j * (n + 1) * p.omega * t)
        gf = GridFunction(pref * self._propagate(acc, t, k), x_min, x_max)
        # A wrapped packet would carry the natural first-order magnitude.
        scale = (p.lam / p.hbar) * t * float(np.max(np.abs(Vj))) \
            * float(np.max(np.abs(psi0)))
        gf.check_boundary(scale)
        return gf

    def f1_pair(self, n1: int, n2: int, t: float) -> GridFunction:
        """First iterate at a joint index (n1, n2).

        Nonzero only when exactly one index vanishes; the both-excited
        projection is identically zero at first order.
        """
        x_min, x_max, x, _ = self._grid(t)
        if n1 >= 1 and n2 >= 1:
            return GridFunction(np.zeros(x.size, dtype=complex), x_min, x_max)
        if n1 >= 1:
            return self.f1(n1, 1, t)
        if n2 >= 1:
            return self.f1(n2, 2, t)
        raise ValidationError("f1_pair: use the free term for n1 = n2 = 0")

    # -- second order ------------------------------------------------------------------

    def f2_both_excited(self, n1: int, n2: int, t: float, branch: str = "both",
                        time_nodes: Optional[int] = None) -> GridFunction:
        """Second iterate with both oscillators excited (n1, n2 >= 1)."""
        if t <= 0:
            raise ValidationError("f2 oracle requires t > 0")
        if min(n1, n2) < 1:
            raise ValidationError("f2_both_excited requires n1, n2 >= 1")
        cfg = self.cfg if time_nodes is None else replace(self.cfg, n_time_nodes=time_nodes)
        if cfg.quadrature_rule == "gauss":
            return self._f2_nested(n1, n2, t, branch, cfg)
        p = self.p
        x_min, x_max, x, k = self._grid(t)
        rule = build_time_rule(t, [p.flight_time(1), p.flight_time(2)],
                               self._transit_half_width(t), cfg)
        t_key = round(float(t), 12)
        V1 = self._coupling(t_key, 1, n1)
        V2 = self._coupling(t_key, 2, n2)
        psi0 = self.initial_samples(t, branch)
        psi_hat = np.fft.fft(psi0)
        omega = p.omega

        psi_scale = float(np.max(np.abs(psi0)))

        def inner(s):
            """(e^{i n1 w s} I_1(s) psi, e^{i n2 w s} I_2(s) psi, phase, conj)."""
            ph = self._phase(k, s)
            cph = np.conj(ph)
            fwd = np.fft.ifft(psi_hat * ph)
            self._check_edges(fwd, psi_scale)
            w1 = np.fft.ifft(np.fft.fft(V1 * fwd) * cph)
            w2 = np.fft.ifft(np.fft.fft(V2 * fwd) * cph)
            return (np.exp(1j * n1 * omega * s) * w1,
                    np.exp(1j * n2 * omega * s) * w2, ph, cph)

        def outer_term(s, a1_cur, a2_cur, ph, cph):
            """e^{i n2 w s} I_2(s) A_1 + e^{i n1 w s} I_1(s) A_2."""
            g1 = np.fft.ifft(np.fft.fft(V2 * np.fft.ifft(np.fft.fft(a1_cur) * ph)) * cph)
            g2 = np.fft.ifft(np.fft.fft(V1 * np.fft.ifft(np.fft.fft(a2_cur) * ph)) * cph)
            return np.exp(1j * n2 * omega * s) * g1 + np.exp(1j * n1 * omega * s) * g2

        A1 = np.zeros(x.size, dtype=complex)
        A2 = np.zeros(x.size, dtype=complex)
        outer = np.zeros(x.size, dtype=complex)
        emitted = np.zeros(rule.nodes.size, dtype=bool)

        for start, n_nodes, h in rule.panels:
            F_prev = inner(rule.nodes[start])
            if not emitted[start]:
                outer += rule.weights[start] * outer_term(
                    rule.nodes[start], A1, A2, F_prev[2], F_prev[3])
                emitted[start] = True
            for pair0 in range(start, start + n_nodes - 2, 2):
                F0 = F_prev
                F1v = inner(rule.nodes[pair0 + 1])
                F2v = inner(rule.nodes[pair0 + 2])
                a1_mid = A1 + h * (5.0 * F0[0] + 8.0 * F1v[0] - F2v[0]) / 12.0
                a2_mid = A2 + h * (5.0 * F0[1] + 8.0 * F1v[1] - F2v[1]) / 12.0
                outer += rule.weights[pair0 + 1] * outer_term(
                    rule.nodes[pair0 + 1], a1_mid, a2_mid, F1v[2], F1v[3])
                emitted[pair0 + 1] = True
                A1 = A1 + h * (F0[0] + 4.0 * F1v[0] + F2v[0]) / 3.0
                A2 = A2 + h * (F0[1] + 4.0 * F1v[1] + F2v[1]) / 3.0
                outer += rule.weights[pair0 + 2] * outer_term(
                    rule.nodes[pair0 + 2], A1, A2, F2v[2], F2v[3])
                emitted[pair0 + 2] = True
                F_prev = F2v

        pref = -((p.lam / p.hbar) ** 2) * np.exp(-1j * (n1 + n2 + 1) * omega * t)
        gf = GridFunction(pref * self._propagate(outer, t, k), x_min, x_max)
        # Natural second-order magnitude: a wrapped packet would show up here.
        scale = ((p.lam / p.hbar) ** 2 * t * t
                 * float(np.max(np.abs(V1))) * float(np.max(np.abs(V2)))
                 * float(np.max(np.abs(psi0))))
        gf.check_boundary(scale)
        return gf

    def _f2_nested(self, n1: int, n2: int, t: float, branch: str,
                   cfg: OracleConfig) -> GridFunction:
        """Nested Gauss-Legendre evaluation: the inner integral is redone
        at every outer node.  Slower than the Simpson streaming pass but
        structurally independent of it; used for cross-checks."""
        p = self.p
        x_min, x_max, x, k = self._grid(t)
        hw = self._transit_half_width(t)
        rule = build_time_rule(t, [p.flight_time(1), p.flight_time(2)], hw, cfg)
        t_key = round(float(t), 12)
        V1 = self._coupling(t_key, 1, n1)
        V2 = self._coupling(t_key, 2, n2)
        psi0 = self.initial_samples(t, branch)
        psi_hat = np.fft.fft(psi0)
        omega = p.omega
        inner_cfg = replace(cfg, n_time_nodes=max(cfg.n_time_nodes // 2, 16))

        psi_scale = float(np.max(np.abs(psi0)))

        def wline(j, n, s):
            ph = self._phase(k, s)
            fwd = np.fft.ifft(psi_hat * ph)
            self._check_edges(fwd, psi_scale)
            Vj = V1 if j == 1 else V2
            return np.exp(1j * n * omega * s) * np.fft.ifft(
                np.fft.fft(Vj * fwd) * np.conj(ph))

        outer = np.zeros(x.size, dtype=complex)
        for s, w in zip(rule.nodes, rule.weights):
            sub = build_time_rule(s, [p.flight_time(1), p.flight_time(2)],
                                  hw, inner_cfg)
            A1 = np.zeros(x.size, dtype=complex)
            A2 = np.zeros(x.size, dtype=complex)
            for sp, wp in zip(sub.nodes, sub.weights):
                A1 += wp * wline(1, n1, sp)
                A2 += wp * wline(2, n2, sp)
            ph = self._phase(k, s)
            cph = np.conj(ph)
            g1 = np.fft.ifft(np.fft.fft(V2 * np.fft.ifft(np.fft.fft(A1) * ph)) * cph)
            g2 = np.fft.ifft(np.fft.fft(V1 * np.fft.ifft(np.fft.fft(A2) * ph)) * cph)
            outer += w * (np.exp(1j * n2 * omega * s) * g1
                          + np.exp(1j * n1 * omega * s) * g2)

        pref = -((p.lam / p.hbar) ** 2) * np.exp(-1j * (n1 + n2 + 1) * omega * t)
        gf = GridFunction(pref * self._propagate(outer, t, k), x_min, x_max)
        scale = ((p.lam / p.hbar) ** 2 * t * t
                 * float(np.max(np.abs(V1))) * float(np.max(np.abs(V2)))
                 * float(np.max(np.abs(psi0))))
        gf.check_boundary(scale)
        return gf

    def f2_literal(self, n1: int, n2: int, t: float, branch: str = "both") -> GridFunction:
        """Defining-form evaluation with explicit G_{mn}(t-s) propagators.

        Uses the same nodes and cumulative weights as the streaming pass,
        so it is algebraically identical to `f2_both_excited` up to
        floating-point rounding; verifies the factored phase bookkeeping.
        """
        p = self.p
        x_min, x_max, x, k = self._grid(t)
        rule = build_time_rule(t, [p.flight_time(1), p.flight_time(2)],
                               self._transit_half_width(t), self.cfg)
        t_key = round(float(t), 12)
        V1 = self._coupling(t_key, 1, n1)
        V2 = self._coupling(t_key, 2, n2)
        psi0 = self.initial_samples(t, branch)
        E0 = p.energy_level(0)
        lam_h = p.lam / p.hbar

        def gamma_apply(energy_sum: float, u: float, vec: np.ndarray) -> np.ndarray:
            return (1j * lam_h * np.exp(-1j * energy_sum * u / p.hbar)
                    * self._propagate(vec, u, k))

        def f1_literal(n: int, j: int, idx: int) -> np.ndarray:
            s = rule.nodes[idx]
            Vj = V1 if j == 1 else V2
            cw = rule.cumulative_weights(idx)
            acc = np.zeros(x.size, dtype=complex)
            for m in np.nonzero(cw)[0]:
                sp = rule.nodes[m]
                vec = (Vj * self._propagate(psi0, sp, k)
                       * np.exp(-2j * E0 * sp / p.hbar))
                acc += cw[m] * gamma_apply(p.energy_level(n) + E0, s - sp, vec)
            return -acc

        E12 = p.energy_level(n1) + p.energy_level(n2)
        acc = np.zeros(x.size, dtype=complex)
        for idx, (s, w) in enumerate(zip(rule.nodes, rule.weights)):
            term = V1 * f1_literal(n2, 2, idx) + V2 * f1_literal(n1, 1, idx)
            acc += w * gamma_apply(E12, t - s, term)
        return GridFunction(-acc, x_min, x_max)

    # -- probability ----------------------------------------------------------------------

    def probability(self, n1: int, n2: int, t: float):
        """P(n1, n2; t) = int dR |f2(R, t)|^2."""
        return self.f2_both_excited(n1, n2, t).norm_squared()

    def probability_with_diagnostics(self, n1: int, n2: int, t: float):
        """Probability plus a node-doubling convergence diagnostic."""
        g = self.f2_both_excited(n1, n2, t)
        value = g.norm_squared()
        g2 = self.f2_both_excited(n1, n2, t,
                                  time_nodes=2 * self.cfg.n_time_nodes)
        refined = g2.norm_squared()
        rel = abs(refined - value) / max(refined, 1e-300)
        return value, {
            "rel_change": rel,
            "converged": rel < self.cfg.convergence_rtol,
            "value_refined": refined,
        }


# ---------------------------------------------------------------------------
# Spec-surface convenience functions
# ---------------------------------------------------------------------------

def f1_oracle(n: int, j: int, t: float, p: PhysicalParams, V: Potential,
              cfg: Optional[OracleConfig] = None, branch: str = "both") -> GridFunction:
    return Oracle(p, V, cfg).f1(n, j, t, branch=branch)


def f2_both_excited_oracle(n1: int, n2: int, t: float, p: PhysicalParams,
                           V: Potential, cfg: Optional[OracleConfig] = None) -> GridFunction:
    return Oracle(p, V, cfg).f2_both_excited(n1, n2, t)


def probability_oracle(n1: int, n2: int, t: float, p: PhysicalParams,
                       V: Potential, cfg: Optional[OracleConfig] = None) -> float:
    return Oracle(p, V, cfg).probability(n1, n2, t)
