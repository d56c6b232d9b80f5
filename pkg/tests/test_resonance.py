import math
from collections import Counter

import numpy as np
import pytest

from resospec.lattice import BoxDomain, norm_sq
from resospec.resonance import (
    ParameterSchedule,
    ScheduleError,
    classify,
    direction_set,
    in_E2,
    in_Vb,
    admissible_p_threshold,
    sample_single_resonance,
    single_resonance_check,
    slab_value,
    window_vectors,
)


def brute_order(g, sched, box):
    """Resonance order by a plain double loop over integer directions."""
    R = sched.direction_radius
    n = int(R) + 1
    bs = [(i, j) for i in range(-n, n + 1) for j in range(-n, n + 1)
          if (i, j) != (0, 0) and math.gcd(i, j) == 1 and i * i + j * j < R * R]
    order = 0
    for k in (1, 2):
        t = sched.rho ** sched.alpha_k(k)
        hits = [b for b in bs if abs(2 * (g[0] * b[0] + g[1] * b[1]) + b[0] ** 2 + b[1] ** 2) < t]
        if k == 1 and hits:
            order = 1
        if k == 2 and any(a[0] * b[1] - a[1] * b[0] != 0 for a in hits for b in hits):
            order = 2
    return order


@pytest.fixture
def sched30():
    return ParameterSchedule(2, 26, 30.0)


def test_schedule_values():
    s = ParameterSchedule(2, 26, 30.0)
    assert s.alpha == pytest.approx(1 / 28)
    assert s.alpha1 == pytest.approx(6 / 28)
    assert s.alpha2 == pytest.approx(13 / 28)
    assert s.p1 == 14 and s.p2 == 6
    d = ParameterSchedule(2, 8, 20.0, desk=True)
    assert (d.alpha, d.alpha1, d.alpha2, d.p1) == (pytest.approx(0.1), 0.0, pytest.approx(0.1), 5)
    assert d.alpha_k(3) == pytest.approx(2.7)
    assert s.level(1) == pytest.approx(30 ** (6 / 28))


def test_schedule_rejections():
    assert admissible_p_threshold(2) == 14
    with pytest.raises(ScheduleError):
        ParameterSchedule(2, 8, 20.0)  # below the admissible range without desk
    with pytest.raises(ScheduleError):
        ParameterSchedule(2, 7, 20.0, desk=True)  # negative alpha1
    with pytest.raises(ScheduleError):
        ParameterSchedule(2, 26, 20.0, p1=13)
    with pytest.raises(ScheduleError):
        ParameterSchedule(2, 26, 1.0)
    with pytest.raises(ScheduleError):
        ParameterSchedule(2, 26, 20.0, mode="other")


def test_schedule_dict_roundtrip():
    s = ParameterSchedule(2, 8, 40.0, p1=8, desk=True)
    assert ParameterSchedule.from_dict(s.to_dict()) == s
    assert s.with_rho(80.0).rho == 80.0
    with pytest.raises(ScheduleError):
        ParameterSchedule.from_dict({"d": 2, "p": 26})


def test_intro_mode_levels():
    s = ParameterSchedule(2, 26, 30.0, mode="intro")
    assert s.alpha1 == pytest.approx(3 / 28) and s.alpha2 == pytest.approx(9 / 28)


def test_in_Vb_examples(unit_box):
    assert in_Vb((10, 0), (1, 0), 25, unit_box)
    assert not in_Vb((10, 0), (0, 1), 0.5, unit_box)
    assert in_Vb((-3, 4), (2, 0), 8.1, unit_box)
    with pytest.raises(ValueError):
        in_Vb((1, 1), (0, 0), 1.0, unit_box)


def test_slab_value_is_norm_difference(unit_box):
    x, b = np.array([2.5, -1.0]), (1, 3)
    assert abs(slab_value(x, b, unit_box)) == pytest.approx(abs(x @ x - (x + b) @ (x + b)))


def test_direction_set(unit_box, sched30):
    bs = direction_set(sched30, unit_box)
    norms = [norm_sq(b, unit_box) for b in bs]
    assert norms == sorted(norms)
    assert all(math.gcd(*map(int, b)) == 1 for b in bs)
    assert len(bs) == 1640


def test_classify_examples(unit_box, sched30):
    assert classify((-31, -11), sched30, unit_box).tag == "NonResonance"
    one = classify((-23, 21), sched30, unit_box)
    assert one.order == 1 and one.directions == ((1, 1),)
    assert classify((0, 30), sched30, unit_box).order == 2


def test_classify_matches_brute_force(unit_box, sched30):
    bs = direction_set(sched30, unit_box)
    window = window_vectors(unit_box, 30.0)
    ours = [classify(tuple(g), sched30, unit_box, bs).order for g in window]
    brute = [brute_order(tuple(int(x) for x in g), sched30, unit_box) for g in window]
    assert ours == brute
    assert Counter(ours) == {2: 568, 0: 24, 1: 8}


def test_single_resonance_check(unit_box, sched30):
    assert single_resonance_check((-23, 21), (1, 1), sched30, unit_box)
    assert not single_resonance_check((-22, 21), (1, 1), sched30, unit_box)
    # near a coordinate plane: gamma in V_{e_2}
    assert not single_resonance_check((-1, 30), (1, 1), sched30, unit_box)
    assert not in_E2((-23, 21), sched30, unit_box)
    with pytest.raises(ValueError):
        single_resonance_check((-23, 21), (1, 0), sched30, unit_box)
    with pytest.raises(ValueError):
        single_resonance_check((-23, 21), (2, 2), sched30, unit_box)


def test_sampling(unit_box, sched30):
    assert sample_single_resonance((1, 1), sched30, unit_box, 0, 0) == []
    got = sample_single_resonance((1, 1), sched30, unit_box, 5, 3)
    assert got and got == sorted(got)
    assert all(single_resonance_check(g, (1, 1), sched30, unit_box) for g in got)
    assert all(30 <= math.sqrt(norm_sq(g, unit_box)) <= 33 for g in got)
    assert got == sample_single_resonance((1, 1), sched30, unit_box, 5, 3)


def test_sampling_empty_window_warns(caplog):
    box = BoxDomain((math.pi / 4, math.pi / 4))
    s = ParameterSchedule(2, 26, 20.0)
    with caplog.at_level("WARNING"):
        assert sample_single_resonance((1, 2), s, box, 3, 0) == []
    assert "no single-resonance" in caplog.text
