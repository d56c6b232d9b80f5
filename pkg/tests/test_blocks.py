import itertools
import math

import numpy as np
import pytest

from resospec.blocks import (
    IndexSet,
    IndexSetError,
    assemble_C,
    assemble_Dprime,
    assemble_E,
    build_B1,
    build_Bk,
    build_block_system,
    decompose_on_line,
    dprime_from,
    dump_matrix,
    interleave_key,
    line_separation,
)
from resospec.corpus import generic_potential
from resospec.lattice import BoxDomain, norm_sq
from resospec.potential import MatrixPotential, constant_potential, majorants, zero_potential
from resospec.resonance import ParameterSchedule

SWAP2 = [[0.0, 2.0], [2.0, 0.0]]  # cosine coefficient whose signed-lattice block is [[0,1],[1,0]]


@pytest.fixture
def sched20():
    return ParameterSchedule(2, 8, 20.0, p1=8, desk=True)


@pytest.fixture
def generic():
    return generic_potential()


def brute_members(gamma, core, radius, box):
    n = int(radius / box.scale.min()) + 1
    trans = [(i, j) for i in range(-n, n + 1) for j in range(-n, n + 1)
             if norm_sq((i, j), box) < radius**2]
    return {(gamma[0] + c[0] + t[0], gamma[1] + c[1] + t[1]) for c in core for t in trans}


def test_interleave_key():
    assert [interleave_key(n) for n in (0, -1, 1, -2, 2)] == [1, 2, 3, 4, 5]


def test_line_members_interleaved(generic, sched20):
    idx = build_B1((-8, 7), (1, 1), sched20, generic.box)
    assert idx.members[:3] == ((-8, 7), (-9, 6), (-7, 8))
    offs = idx.line_offsets()
    assert offs[:5] == [0, -1, 1, -2, 2]
    assert sorted(offs, key=interleave_key) == offs
    assert idx.a1 == 7


def test_B1_member_set_brute_force(generic, sched20):
    g = (-8, 7)
    idx = build_B1(g, (1, 1), sched20, generic.box)
    radius = 0.5 * sched20.rho ** (sched20.alpha2 / 2)
    core = [(n, n) for n in range(-3, 4) if norm_sq((n, n), generic.box) < radius**2]
    expected = brute_members(g, core, sched20.translate_radius, generic.box)
    assert set(idx.members) == expected
    assert len(idx.members) == len(expected) == idx.b
    on_line = {h for h in expected if h[0] - g[0] == h[1] - g[1]}
    assert set(idx.line_members) == on_line


def test_B1_deterministic(generic, sched20):
    a = build_B1((-8, 7), (1, 1), sched20, generic.box)
    assert a == build_B1((-8, 7), (1, 1), sched20, generic.box)


def test_B1_rejects_non_resonant(generic, sched20):
    with pytest.raises(IndexSetError):
        build_B1((-8, 9), (1, 1), sched20, generic.box)


def test_Bk_consistency(generic, sched20):
    a = build_B1((-8, 7), (1, 1), sched20, generic.box)
    b = build_Bk((-8, 7), [(1, 1)], sched20, generic.box)
    assert a == b


def brute_members_nd(gamma, core, radius, box):
    n = [int(radius / sc) + 1 for sc in box.scale]
    trans = [t for t in itertools.product(*(range(-k, k + 1) for k in n))
             if norm_sq(t, box) < radius**2]
    return {tuple(g + c + t for g, c, t in zip(gamma, cc, tt)) for cc in core for tt in trans}


def test_Bk_two_directions_tiny_radius():
    box = BoxDomain((math.pi / 3,) * 3)
    s = ParameterSchedule(3, 30, 30.0)
    dirs = [(1, 1, 0), (1, -1, 1)]  # both longer than the combination radius
    idx = build_Bk((3, 5, 2), dirs, s, box)
    expected = brute_members_nd((3, 5, 2), [(0, 0, 0)], s.translate_radius, box)
    assert set(idx.members) == expected and idx.a1 == 0
    assert list(idx.members) == sorted(idx.members)


def test_Bk_two_directions_brute_force():
    box = BoxDomain((math.pi, math.pi, math.pi))
    s = ParameterSchedule(3, 30, 30.0, p1=16)
    dirs = [(1, 0, 1), (0, 1, 0)]
    idx = build_Bk((0, 0, 0), dirs, s, box)
    radius = 0.5 * s.rho ** (s.alpha_k(3) / 2)
    core = set()
    for n1 in range(-5, 6):
        for n2 in range(-5, 6):
            v = (n1, n2, n1)
            if norm_sq(v, box) < radius**2:
                core.add(v)
    assert len(core) > 1
    assert set(idx.members) == brute_members_nd((0, 0, 0), core, s.translate_radius, box)


def test_Bk_rejects_dependent(unit_box):
    s = ParameterSchedule(2, 26, 30.0)
    with pytest.raises(IndexSetError):
        build_Bk((3, 5), [(1, 1), (2, 2)], s, unit_box)
    with pytest.raises(IndexSetError):
        build_Bk((3, 5), [(1, 1), (1, 0)], s, unit_box)


def manual_index(members, a1, box, gamma=None, delta=(1, 0)):
    return IndexSet(gamma or members[0], (delta,), tuple(members), a1, box)


def test_assemble_C_two_by_two_example(unit_box):
    V = MatrixPotential(2, unit_box, {(1, 0): SWAP2})
    idx = manual_index([(2, 0), (3, 0)], 2, unit_box)
    sysm = assemble_C(V, idx)
    expected = np.array([[4, 0, 0, 1], [0, 4, 1, 0], [0, 1, 9, 0], [1, 0, 0, 9]], dtype=float)
    assert np.array_equal(sysm.C, expected)
    eig = np.linalg.eigvalsh(sysm.C)
    lo, hi = (13 - math.sqrt(29)) / 2, (13 + math.sqrt(29)) / 2
    assert np.allclose(eig, [lo, lo, hi, hi], atol=1e-12)
    assert np.array_equal(sysm.C, sysm.A + sysm.B)


def test_assemble_C_trivial_potentials(generic, sched20):
    idx = build_B1((-8, 7), (1, 1), sched20, generic.box)
    zero = assemble_C(zero_potential(2, generic.box), idx)
    assert np.array_equal(zero.C, np.diag(np.repeat(idx.norms_sq(), 2)))
    const = assemble_C(constant_potential([[1, 0.5], [0.5, 2]], generic.box), idx)
    assert np.array_equal(const.C, const.A)


def test_assemble_C_invariants(generic, sched20):
    sysm = build_block_system(generic, (-8, 7), (1, 1), sched20)
    for X in (sysm.C, sysm.D, sysm.Dprime, sysm.E):
        assert np.array_equal(X, X.T)
    n = 2 * sysm.index.a1
    assert np.array_equal(sysm.D, sysm.C[:n, :n])
    assert np.linalg.norm(sysm.B, 2) <= 2 * majorants(generic).M


def test_mean_never_enters_C(generic, sched20):
    idx = build_B1((-8, 7), (1, 1), sched20, generic.box)
    no_mean = MatrixPotential(2, generic.box, {k: v for k, v in generic.coeffs.items() if any(k)})
    assert np.array_equal(assemble_C(generic, idx).C, assemble_C(no_mean, idx).C)


@pytest.mark.parametrize("gamma,delta,t,l,v,beta", [
    ((5, 7), (2, 0), 2.5, 2, 0.5, (0, 7)),
    ((5, 7), (1, 0), 5.0, 5, 0.0, (0, 7)),
    ((3, 3), (1, 1), 3.0, 3, 0.0, (0, 0)),
])
def test_decompose_on_line(unit_box, gamma, delta, t, l, v, beta):
    dec = decompose_on_line(gamma, delta, unit_box)
    assert (dec.t, dec.l, dec.v) == (t, l, v)
    assert np.allclose(dec.beta, beta, atol=1e-14)


def test_decompose_reconstructs(coarse_box):
    dec = decompose_on_line((-8, 7), (1, 1), coarse_box)
    g = np.array([-8, 7]) * coarse_box.scale
    d = np.array([1, 1]) * coarse_box.scale
    assert np.abs(dec.beta + dec.t * d - g).max() <= 1e-12 * np.linalg.norm(g)
    assert abs(dec.beta @ d) < 1e-12
    assert 0 <= dec.v < 1


def test_assemble_E_free(generic, sched20):
    g, delta = (-8, 7), (1, 1)
    idx = build_B1(g, delta, sched20, generic.box)
    dec = decompose_on_line(g, delta, generic.box)
    E = assemble_E(zero_potential(2, generic.box), idx, dec)
    dn = norm_sq(delta, generic.box)
    diag = np.repeat([dn * (n + dec.t) ** 2 for n in idx.line_offsets()], 2)
    assert np.allclose(np.diag(E), diag, atol=1e-10)
    assert np.array_equal(E, np.diag(np.diag(E)))


def test_assemble_E_two_member_closed_form(unit_box):
    delta = (1, 0)
    V = MatrixPotential(2, unit_box, {(1, 0): SWAP2})
    idx = manual_index([(2, 0), (3, 0)], 2, unit_box)
    dec = decompose_on_line((2, 0), delta, unit_box)
    E = assemble_E(V, idx, dec)
    e1, e2 = (dec.t) ** 2, (dec.t + 1) ** 2
    r = math.hypot((e1 - e2) / 2, 1.0)
    expected = sorted([(e1 + e2) / 2 - r] * 2 + [(e1 + e2) / 2 + r] * 2)
    assert np.allclose(np.linalg.eigvalsh(E), expected, atol=1e-12)


def test_E_plus_beta_is_D(generic, sched20):
    sysm = build_block_system(generic, (-8, 7), (1, 1), sched20)
    n = sysm.D.shape[0]
    assert np.allclose(sysm.E + sysm.decomposition.beta_norm_sq * np.eye(n), sysm.D, rtol=0, atol=1e-12)


def test_Dprime(generic, sched20):
    sysm = build_block_system(generic, (-8, 7), (1, 1), sched20)
    a1, m = sysm.index.a1, 2
    tail = np.repeat(sysm.index.norms_sq()[a1:], m)
    expected = np.sort(np.concatenate([np.linalg.eigvalsh(sysm.D), tail]))
    assert np.allclose(np.linalg.eigvalsh(sysm.Dprime), expected, atol=1e-9)
    idx = sysm.index
    assert np.array_equal(assemble_Dprime(zero_potential(2, generic.box), idx),
                          assemble_C(zero_potential(2, generic.box), idx).A)
    short = manual_index([(2, 0), (3, 0)], 2, BoxDomain((math.pi, math.pi)))
    Vs = MatrixPotential(2, short.box, {(1, 0): SWAP2})
    s2 = assemble_C(Vs, short)
    assert np.array_equal(dprime_from(s2), s2.D)


def test_line_separation_precursor(generic):
    for rho in (20.0, 40.0, 80.0):
        s = ParameterSchedule(2, 8, rho, p1=8, desk=True)
        from resospec.resonance import sample_single_resonance
        for g in sample_single_resonance((1, 1), s, generic.box, 4, 1):
            idx = build_B1(g, (1, 1), s, generic.box)
            assert line_separation(idx) >= rho**s.alpha2 / 3


def test_dump_matrix(tmp_path):
    X = np.array([[1.0, 0.5], [0.5, -2.0]])
    dump_matrix(X, tmp_path / "x.txt")
    assert np.array_equal(np.loadtxt(tmp_path / "x.txt"), X)
