import dataclasses
import math

import numpy as np
import pytest

from conftest import load_golden
from mott1d.duhamel import (
    GridFunction,
    Oracle,
    OracleConfig,
    coupling_potential,
    free_propagate,
)
from mott1d.errors import PropagationError, ValidationError
from mott1d.params import _mirrored, scaling_family
from mott1d.specfun import GaussianPacket

GOLD = load_golden("specfun_norms.txt")


def packet_on_grid(p, x_min, x_max, n, center=0.0, momentum=None):
    dx = (x_max - x_min) / n
    x = x_min + dx * np.arange(n)
    pk = GaussianPacket(center=center, width=p.sigma,
                        momentum=p.P0 if momentum is None else momentum)
    return GridFunction(pk.evaluate(x, p.hbar), x_min, x_max), pk, x


# ---------------------------------------------------------------------------
# free propagation
# ---------------------------------------------------------------------------

def test_propagate_zero_time_is_identity(params10):
    g, _, _ = packet_on_grid(params10, -6.0, 6.0, 8192)
    out = free_propagate(g, 0.0, params10)
    np.testing.assert_allclose(out.samples, g.samples, atol=1e-14)


def test_propagate_drifts_gaussian(params10):
    p = params10
    g, pk, x = packet_on_grid(p, -6.0, 6.0, 8192)
    out = free_propagate(g, 2.0, p)
    assert out.centroid() == pytest.approx(2.0 * p.P0 / p.M, abs=1e-9)
    np.testing.assert_allclose(out.samples, pk.evolved(x, 2.0, p.M, p.hbar),
                               atol=1e-11)


def test_propagate_width_growth(params10):
    p = params10
    g, _, x = packet_on_grid(p, -6.0, 6.0, 8192)
    t = 1.7
    out = free_propagate(g, t, p)
    rho = np.abs(out.samples) ** 2
    c = out.centroid()
    var = float(np.sum((x - c) ** 2 * rho) / np.sum(rho))
    w2 = p.sigma**2 + (p.hbar * t / (p.M * p.sigma)) ** 2
    assert 2 * var == pytest.approx(w2, rel=1e-9)


def test_propagate_unitary(params10):
    g, _, _ = packet_on_grid(params10, -6.0, 6.0, 8192)
    out = free_propagate(g, 2.0, params10)
    assert abs(out.l2_norm() - g.l2_norm()) < 1e-12


def test_propagate_detects_wraparound(params10):
    # Far too small a box: the packet reaches the edge and wraps.
    g, _, _ = packet_on_grid(params10, -1.0, 1.0, 4096)
    with pytest.raises(PropagationError):
        free_propagate(g, 3.0, params10)


# ---------------------------------------------------------------------------
# coupling potentials
# ---------------------------------------------------------------------------

def test_coupling_integral(params10, bump):
    # int V^a_00 = gamma int V by Fubini and phi_0 normalization
    p = params10
    fn = coupling_potential(p, bump, p.a1, 0, 0)
    x = np.linspace(p.a1 - 2.5, p.a1 + 2.5, 100001)
    val = np.trapezoid(fn(x), x)
    assert val == pytest.approx(p.gamma * GOLD["int_V"], rel=1e-10)


def test_coupling_symmetric(params10, bump):
    p = params10
    x = np.linspace(p.a1 - 2.0, p.a1 + 2.0, 2001)
    np.testing.assert_allclose(coupling_potential(p, bump, p.a1, 1, 0)(x),
                               coupling_potential(p, bump, p.a1, 0, 1)(x),
                               atol=1e-15)


def test_coupling_golden_point(params05, bump):
    p = params05
    fn = coupling_potential(p, bump, p.a1, 1, 0)
    # odd pair density: exact zero at the center, frozen value at half gamma
    assert abs(fn(np.array([p.a1]))[0]) < 1e-14
    val = fn(np.array([p.a1 + 0.5 * p.gamma]))[0]
    assert val == pytest.approx(GOLD["coupling_W10_at_half"], rel=1e-9)


def test_coupling_support(params10, bump):
    p = params10
    fn = coupling_potential(p, bump, p.a1, 2, 0)
    far = p.gamma * (bump.support_radius + 16.0)
    assert fn(np.array([p.a1 + far]))[0] == 0.0


def test_coupling_budget(params10, bump):
    with pytest.raises(ValidationError):
        coupling_potential(params10, bump, 1.0, 11, 0)


# ---------------------------------------------------------------------------
# first order
# ---------------------------------------------------------------------------

def test_f1_linear_in_lambda(oracle10, params10, bump, small_cfg):
    f1 = oracle10.f1(1, 1, 3.0)
    doubled = Oracle(dataclasses.replace(params10, lam=2 * params10.lam),
                     bump, small_cfg).f1(1, 1, 3.0)
    np.testing.assert_array_equal(doubled.samples, 2.0 * f1.samples)


def test_f1_vanishes_with_coupling(params10, bump, small_cfg):
    tiny = Oracle(dataclasses.replace(params10, lam=1e-30), bump, small_cfg)
    assert tiny.f1(1, 1, 3.0).l2_norm() < 1e-25


def test_f1_norm_scale(oracle10, params10):
    # ||f1|| / ||psi|| is of the order lambda0 / epsilon
    p = params10
    lam0_over_eps = (p.lam / (p.M * p.v0**2)) / 0.1
    ratio = oracle10.f1(1, 1, 3.0).l2_norm() / lam0_over_eps
    assert 0.05 < ratio < 20.0


def test_f1_packet_kinematics(oracle10, params10):
    p = params10
    f1 = oracle10.f1(1, 1, 3.0)
    dE = p.hbar * p.omega / (p.M * p.v0**2)
    expected = 1 * p.a1 * dE + p.P0 * (1 - dE) / p.M * 3.0
    assert abs(f1.centroid() - expected) < 3 * p.sigma
    # the peak carries an O(1/Lambda) skew; 2 sigma_k / Lambda here
    assert f1.momentum_peak(p.hbar) == pytest.approx(p.P0 * (1 - dE), rel=0.05)


def test_f1_requires_positive_time(oracle10):
    with pytest.raises(ValidationError):
        oracle10.f1(1, 1, 0.0)
    with pytest.raises(ValidationError):
        oracle10.f1(0, 1, 1.0)


def test_f1_pair_both_excited_is_zero(oracle10):
    z = oracle10.f1_pair(1, 1, 3.0)
    assert z.l2_norm() == 0.0
    single = oracle10.f1_pair(1, 0, 3.0)
    assert single.l2_norm() > 0


# ---------------------------------------------------------------------------
# second order
# ---------------------------------------------------------------------------

def test_f2_quadratic_in_lambda(oracle10, params10, bump, small_cfg):
    f2 = oracle10.f2_both_excited(1, 1, 3.0)
    doubled = Oracle(dataclasses.replace(params10, lam=2 * params10.lam),
                     bump, small_cfg).f2_both_excited(1, 1, 3.0)
    np.testing.assert_array_equal(doubled.samples, 4.0 * f2.samples)


def test_probability_lambda4_homogeneity(oracle10, params10, bump, small_cfg):
    P = oracle10.probability(1, 1, 3.0)
    P2 = Oracle(dataclasses.replace(params10, lam=2 * params10.lam),
                bump, small_cfg).probability(1, 1, 3.0)
    assert abs(P2 / (16.0 * P) - 1.0) < 1e-12


def test_probability_mirror_symmetry(oracle10, params10, bump, small_cfg):
    P = oracle10.probability(1, 1, 3.0)
    Pm = Oracle(_mirrored(params10), bump, small_cfg).probability(1, 1, 3.0)
    assert abs(P - Pm) / P < 1e-8


def test_probability_converges_under_node_doubling(oracle10):
    _, diag = oracle10.probability_with_diagnostics(1, 1, 3.0)
    assert diag["converged"]
    assert diag["rel_change"] < 0.01


def test_f2_centroid_tracks_recoiled_packet(oracle10, params10):
    # Lambda = 10 carries a ~1/Lambda centroid skew from the remainder wave;
    # the 0.5 sigma tolerance of the acceptance suite applies at Lambda = 20.
    p = params10
    f2 = oracle10.f2_both_excited(1, 1, 3.0)
    dE = p.hbar * p.omega / (p.M * p.v0**2)
    expected = (p.a1 + p.a2) * dE + p.P0 * (1 - 2 * dE) / p.M * 3.0
    assert abs(f2.centroid() - expected) < 1.0 * p.sigma


def test_f2_literal_identity(bump):
    # same nodes and cumulative weights: the defining Duhamel form and the
    # factored interaction-picture pass agree to rounding.
    p = scaling_family(0.2)
    cfg = OracleConfig(n_points=2048, n_time_nodes=16, time_grid="uniform",
                       domain_pad=12.0)
    orc = Oracle(p, bump, cfg)
    fast = orc.f2_both_excited(1, 1, 1.2)
    lit = orc.f2_literal(1, 1, 1.2)
    num = np.sqrt(np.sum(np.abs(fast.samples - lit.samples) ** 2))
    den = np.sqrt(np.sum(np.abs(lit.samples) ** 2))
    assert num / den < 1e-9


def test_f2_gauss_rule_agrees_with_simpson(bump):
    p = scaling_family(0.1)
    f2s = Oracle(p, bump, OracleConfig(n_points=8192, n_time_nodes=160)) \
        .f2_both_excited(1, 1, 3.0)
    f2g = Oracle(p, bump, OracleConfig(n_points=8192, n_time_nodes=160,
                                       quadrature_rule="gauss")) \
        .f2_both_excited(1, 1, 3.0)
    num = np.sqrt(np.sum(np.abs(f2s.samples - f2g.samples) ** 2))
    den = np.sqrt(np.sum(np.abs(f2s.samples) ** 2))
    assert num / den < 1e-4


def test_f2_rejects_unexcited_indices(oracle10):
    with pytest.raises(ValidationError):
        oracle10.f2_both_excited(0, 1, 3.0)


def test_oracle_detects_wraparound(params10, bump):
    cfg = OracleConfig(n_points=8192, n_time_nodes=64, domain_pad=0.5)
    with pytest.raises(PropagationError):
        Oracle(params10, bump, cfg).probability(1, 1, 3.0)


# ---------------------------------------------------------------------------
# grid functions and config
# ---------------------------------------------------------------------------

def test_gridfunction_bytes_roundtrip(tmp_path):
    g = GridFunction(np.exp(1j * np.linspace(0, 5, 64)), -2.0, 2.0)
    path = tmp_path / "dump.bin"
    g.save(path)
    back = GridFunction.load(path)
    assert back.x_min == g.x_min and back.x_max == g.x_max
    np.testing.assert_array_equal(back.samples, g.samples)
    # header layout: two f64 and one i64, little endian
    blob = g.to_bytes()
    assert len(blob) == 24 + 16 * g.n_points
    assert np.frombuffer(blob[16:24], dtype="<i8")[0] == 64


def test_gridfunction_truncated_payload():
    g = GridFunction(np.ones(16, dtype=complex), 0.0, 1.0)
    with pytest.raises(ValidationError):
        GridFunction.from_bytes(g.to_bytes()[:-8])


def test_config_validation():
    with pytest.raises(ValidationError):
        OracleConfig(n_points=1000)            # not a power of two
    with pytest.raises(ValidationError):
        OracleConfig(n_time_nodes=33)          # odd for Simpson
    with pytest.raises(ValidationError):
        OracleConfig(quadrature_rule="trapz")
    with pytest.raises(ValidationError):
        OracleConfig(time_grid="random")
    OracleConfig(n_time_nodes=33, quadrature_rule="gauss")  # allowed for GL


def test_grid_resolution_guard(bump):
    p = scaling_family(0.05)
    with pytest.raises(ValidationError):
        Oracle(p, bump, OracleConfig(n_points=512)).probability(1, 1, 3.0)
