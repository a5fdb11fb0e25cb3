import warnings

import numpy as np
import pytest

from zassadapt.exponentials import ExpCounter, LanczosConfig
from zassadapt.grid import make_grid
from zassadapt.operators import SemiclassicalProblem, zero_potential
from zassadapt.problems import WavePacketParams, wave_packet
from zassadapt.stepper import (
    ZASS4,
    ZASS6,
    SchemeSpec,
    StaleWorkspace,
    classical_defect,
    get_scheme,
    step,
    step_derivative,
    symmetrized_defect,
)

from conftest import cosine_problem, dense_of, l2, slope

TIGHT = LanczosConfig(m_max=60, tol=1e-15)


def exact_flow(prob):
    A = 2 * (dense_of(prob.symmetric_part(0), prob.M) + dense_of(prob.symmetric_part(1), prob.M))
    lam, Q = np.linalg.eigh(0.5 * (A + A.conj().T))
    return lambda psi, t: Q @ (np.exp(1j * t * lam) * (Q.conj().T @ psi))


def free_exact(prob, psi, t):
    g = prob.grid
    return g.ifft(np.exp(-1j * t * prob.epsilon * g.kappa**2) * g.fft(psi))


@pytest.mark.parametrize("scheme", ["zass6", "zass4"])
def test_free_particle_step_is_exact(free128, scheme):
    g = free128.grid
    psi0 = wave_packet(g, WavePacketParams(1e-2, 0.0, 0.5))
    psi1, _ = step(psi0, 0.05, scheme, free128)
    assert l2(g, psi1 - free_exact(free128, psi0, 0.05)) <= 1e-12


def test_zero_step_is_identity(lattice64):
    prob, psi0, _ = lattice64
    psi1, ws = step(psi0, 0.0, "zass6", prob)
    np.testing.assert_allclose(psi1, psi0, atol=1e-15)


def test_negative_step_rejected(lattice64):
    prob, psi0, _ = lattice64
    with pytest.raises(ValueError):
        step(psi0, -1e-3, "zass6", prob)


def test_free_particle_derivative_and_defects_vanish(free128):
    g = free128.grid
    psi0 = wave_packet(g, WavePacketParams(1e-2, 0.0, 0.5))
    h = 0.02
    psi1, ws = step(psi0, h, "zass6", free128)
    d = step_derivative(ws, "zass6", free128)
    Hpsi1 = free128.apply_hamiltonian(psi1)
    assert l2(g, d - Hpsi1) <= 1e-10 * l2(g, Hpsi1)
    assert l2(g, classical_defect(ws, psi1, "zass6", free128)) <= 1e-10
    assert l2(g, symmetrized_defect(ws, psi0, psi1, "zass6", free128)) <= 1e-10


@pytest.mark.parametrize("scheme", ["zass6", "zass4"])
def test_derivative_matches_central_difference(lattice64, scheme):
    prob, psi0, _ = lattice64
    # fixed Krylov dimension keeps S(h) smooth in h
    cfg = LanczosConfig(m_max=12, strategy="fixed_m", tol=1e-15)
    h = 1e-2
    psi1, ws = step(psi0, h, scheme, prob, cfg)
    d = step_derivative(ws, scheme, prob, cfg)
    errs = []
    for delta in (1e-4, 5e-5):
        plus, _ = step(psi0, h + delta, scheme, prob, cfg)
        minus, _ = step(psi0, h - delta, scheme, prob, cfg)
        errs.append(l2(prob.grid, d - (plus - minus) / (2 * delta)))
    # O(delta**2) truncation: halving delta quarters the gap
    assert errs[1] < errs[0]
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
    assert errs[0] <= 1e-6 * l2(prob.grid, d)


@pytest.mark.parametrize("scheme,budget,symmetrized", [("zass6", 13, 14), ("zass4", 9, 10)])
def test_exponential_budget(lattice64, scheme, budget, symmetrized):
    prob, psi0, _ = lattice64
    counter = ExpCounter()
    psi1, ws = step(psi0, 1e-3, scheme, prob, counter=counter)
    assert counter.total == len(get_scheme(scheme).factors)
    classical_defect(ws, psi1, scheme, prob)
    assert counter.total == budget
    c2 = ExpCounter()
    psi1, ws = step(psi0, 1e-3, scheme, prob, counter=c2)
    symmetrized_defect(ws, psi0, psi1, scheme, prob)
    assert c2.total == symmetrized


def test_zass6_budget_by_kind(lattice64):
    prob, psi0, _ = lattice64
    c = ExpCounter()
    psi1, ws = step(psi0, 1e-3, ZASS6, prob, counter=c)
    classical_defect(ws, psi1, ZASS6, prob)
    assert (c.s0, c.s1, c.s2, c.s3) == (3, 4, 4, 2)


def test_classical_defect_equals_derivative_minus_hamiltonian(lattice64):
    prob, psi0, _ = lattice64
    psi1, ws = step(psi0, 4e-3, "zass6", prob, TIGHT)
    dc = classical_defect(ws, psi1, "zass6", prob, TIGHT)
    generic = step_derivative(ws, "zass6", prob, TIGHT) - prob.apply_hamiltonian(psi1)
    assert l2(prob.grid, dc - generic) <= 1e-12 * l2(prob.grid, prob.apply_hamiltonian(psi1))


def test_classical_defect_order(lattice256):
    prob, psi0, _ = lattice256
    hs = [4e-3, 2e-3, 1e-3]
    norms = []
    for h in hs:
        psi1, ws = step(psi0, h, "zass6", prob, TIGHT)
        norms.append(l2(prob.grid, classical_defect(ws, psi1, "zass6", prob, TIGHT)))
    assert slope(hs, norms) >= 3.7


@pytest.mark.parametrize("scheme", ["zass6", "zass4"])
def test_anticommutator_identity(lattice64, scheme):
    prob, psi0, _ = lattice64
    h = 5e-3
    psi1, ws = step(psi0, h, scheme, prob, TIGHT)
    dc = classical_defect(ws, psi1, scheme, prob, TIGHT)
    ds = symmetrized_defect(ws, psi0, psi1, scheme, prob, TIGHT)
    s_h_psi0, _ = step(prob.apply_hamiltonian(psi0), h, scheme, prob, TIGHT)
    rhs = 0.5 * (prob.apply_hamiltonian(psi1) - s_h_psi0)
    scale = l2(prob.grid, prob.apply_hamiltonian(psi1))
    assert l2(prob.grid, ds - dc - rhs) <= 1e-11 * scale


def test_symmetrized_estimate_is_one_order_better():
    # band-limited potential, so the asymptotic regime is reached cleanly
    prob = cosine_problem(64, 0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        psi0 = wave_packet(prob.grid, WavePacketParams(0.05, 0.3, 0.2))
    E = exact_flow(prob)
    hs = [6.4e-2, 3.2e-2, 1.6e-2, 8e-3]
    L, dev_c, dev_s = [], [], []
    for h in hs:
        psi1, ws = step(psi0, h, "zass6", prob, TIGHT)
        local = psi1 - E(psi0, h)
        dc = classical_defect(ws, psi1, "zass6", prob, TIGHT)
        ds = symmetrized_defect(ws, psi0, psi1, "zass6", prob, TIGHT)
        L.append(l2(prob.grid, local))
        dev_c.append(l2(prob.grid, h / 5 * dc - local))
        dev_s.append(l2(prob.grid, h / 5 * ds - local))
    assert slope(hs, L) >= 4.7
    assert slope(hs, dev_c) >= 5.7
    assert slope(hs, dev_s) - slope(hs, dev_c) >= 0.8


def test_local_error_order():
    prob = cosine_problem(64, 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        psi0 = wave_packet(prob.grid, WavePacketParams(0.05, 0.3, 0.2))
    E = exact_flow(prob)
    hs = [3.2e-2, 1.6e-2, 8e-3, 4e-3]
    L = [l2(prob.grid, step(psi0, h, "zass6", prob, TIGHT)[0] - E(psi0, h)) for h in hs]
    assert slope(hs, L) >= 4.7


@pytest.mark.parametrize("scheme", ["zass6", "zass4"])
def test_time_reversibility_and_unitarity(lattice64, scheme):
    prob, psi0, _ = lattice64
    cfg = LanczosConfig(tol=1e-10)
    psi1, _ = step(psi0, 1e-2, scheme, prob, cfg)
    back, _ = _backward(psi1, 1e-2, scheme, prob, cfg)
    n0 = l2(prob.grid, psi0)
    assert l2(prob.grid, back - psi0) <= 50 * cfg.tol * n0
    n_lanczos = sum(1 for j, _, _ in get_scheme(scheme).factors if j >= 2)
    assert abs(l2(prob.grid, psi1) - n0) <= 10 * n_lanczos * cfg.tol * n0


def _backward(psi, h, scheme, prob, cfg):
    # S(-h): same palindrome with negated arguments (odd powers flip sign)
    spec = get_scheme(scheme)
    neg = SchemeSpec(spec.name + "-rev", tuple((j, n, -c) for j, n, c in spec.factors), spec.p)
    return step(psi, h, neg, prob, cfg)


def test_workspace_reproducible(lattice64):
    prob, psi0, _ = lattice64
    cfg = LanczosConfig(m_max=8, strategy="fixed_m")
    _, a = step(psi0, 3e-3, "zass6", prob, cfg)
    _, b = step(psi0, 3e-3, "zass6", prob, cfg)
    for x, y in zip(a.v + a.w, b.v + b.w):
        np.testing.assert_array_equal(x, y)
    assert a.psi1 is a.v[-1]
    # last stored weighted vector is R0 applied to the output (weight 1)
    np.testing.assert_allclose(a.w[-1], prob.apply_R0(a.psi1), atol=1e-14 * np.abs(a.w[-1]).max())


def test_stale_workspace(lattice64):
    prob, psi0, _ = lattice64
    psi1, ws = step(psi0, 2e-3, "zass6", prob)
    with pytest.raises(StaleWorkspace):
        step_derivative(ws, "zass6", prob, h=1e-3)
    with pytest.raises(StaleWorkspace):
        classical_defect(ws, psi1 * 2, "zass6", prob)
    with pytest.raises(StaleWorkspace):
        symmetrized_defect(ws, psi0 * 2, psi1, "zass6", prob)
    _, bare = step(psi0, 2e-3, "zass6", prob, store_derivative_terms=False)
    with pytest.raises(StaleWorkspace):
        step_derivative(bare, "zass6", prob)


def test_scheme_validation():
    assert ZASS6.n_exponentials == 7 and ZASS4.n_exponentials == 5
    assert ZASS6.p == ZASS4.p == 4
    with pytest.raises(ValueError):
        SchemeSpec("bad", ((0, 1, 1.0), (1, 1, 1.0)), 4)
    with pytest.raises(ValueError):
        SchemeSpec("bad", ((0, 1, 1.0), (1, 1, 1.0), (1, 1, 1.0)), 4)
    with pytest.raises(ValueError):
        get_scheme("zass8")


def test_zero_potential_any_grid():
    g = make_grid(0, 3, 32)
    prob = SemiclassicalProblem(g, zero_potential(g), 0.2)
    psi0 = np.exp(2j * np.pi * g.x / 3)
    psi1, ws = step(psi0, 0.1, "zass4", prob)
    assert l2(g, classical_defect(ws, psi1, "zass4", prob)) <= 1e-10 * l2(g, psi0)
