import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quartic_otoc.perturbation import (
    EnhancementWarning,
    ModelParams,
    energy,
    energy_correction,
    energy_series,
    p2_series,
    position_element,
    position_series,
    potential_element,
    state_coefficients,
    x2_series,
)

from _reference import rs_position, rs_series, x4_matrix

levels = st.integers(min_value=0, max_value=60)


# -- potential -------------------------------------------------------------

def test_potential_values():
    assert potential_element(0, 0) == 0.75
    assert potential_element(4, 0) == pytest.approx(math.sqrt(24) / 4, rel=1e-15)
    assert potential_element(2, 0) == pytest.approx(3 / math.sqrt(2), rel=1e-15)
    assert potential_element(1, 0) == 0.0
    assert potential_element(6, 0) == 0.0


def test_potential_matches_matrix_power():
    V = x4_matrix(40)
    ours = np.array([[potential_element(k, n) for n in range(40)] for k in range(40)])
    np.testing.assert_allclose(ours, V, atol=1e-9)


@given(levels, levels)
def test_potential_symmetric(k, n):
    assert potential_element(k, n) == pytest.approx(potential_element(n, k), rel=1e-14)


def test_negative_level_rejected():
    with pytest.raises(ValueError):
        potential_element(-1, 0)
    with pytest.raises(ValueError):
        energy_correction(-2, 1)


# -- energies --------------------------------------------------------------

def test_energy_tabulated_values():
    assert energy_correction(0, 0) == 0.5
    assert energy_correction(0, 1) == 0.75
    assert energy_correction(1, 2) == -20.625
    assert energy_correction(0, 3) == 22.9453125
    assert energy(0, ModelParams(0.001, order=2)) == pytest.approx(0.500747375, rel=1e-13)


def test_energy_third_order_example():
    assert energy(0, ModelParams(0.001)) == pytest.approx(0.5007473979, abs=5e-11)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 12])
def test_low_orders_match_numerical_rs(n):
    E, _ = rs_series(n)
    for j in range(3):
        assert energy_correction(n, j) == pytest.approx(E[j], rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 12])
def test_consistent_third_order_matches_numerical_rs(n):
    E, _ = rs_series(n)
    assert energy_correction(n, 3, e3="consistent") == pytest.approx(E[3], rel=1e-11)


def test_printed_third_order_differs_from_rs():
    E, _ = rs_series(3)
    assert abs(energy_correction(3, 3) - E[3]) > 100


def test_printed_third_order_grows_as_n6():
    ratio = energy_correction(200, 3) / energy_correction(100, 3)
    assert 60 < ratio < 68


def test_energy_order_nesting():
    g = 0.002
    for n in (0, 3, 9):
        s = energy_series(n, 3)
        for order in range(4):
            assert energy(n, ModelParams(g, order=order)) == pytest.approx(
                sum(s[: order + 1] * g ** np.arange(order + 1)), rel=1e-15)


def test_energy_zero_coupling():
    for n in range(10):
        assert energy(n, ModelParams(0.0)) == n + 0.5


def test_enhancement_warning():
    with pytest.warns(EnhancementWarning):
        energy(200, ModelParams(0.001))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        energy(50, ModelParams(0.001))


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(-0.1)
    with pytest.raises(ValueError):
        ModelParams(0.1, order=4)
    with pytest.raises(ValueError):
        ModelParams(0.1, e3="other")


# -- states ----------------------------------------------------------------

def test_first_order_ground_state():
    f = state_coefficients(0, 1)
    assert f[2] == pytest.approx(-3 * math.sqrt(2) / 4, rel=1e-15)
    assert f[4] == pytest.approx(-math.sqrt(24) / 16, rel=1e-15)
    assert f[-2] == 0.0 and f[-4] == 0.0


def test_second_order_ground_state_diagonal():
    assert state_coefficients(0, 2)[0] == -0.609375


@pytest.mark.parametrize("n", [0, 1, 2, 3, 5, 8, 13, 20])
@pytest.mark.parametrize("j", [1, 2, 3])
def test_state_tables_match_numerical_rs(n, j):
    _, states = rs_series(n)
    ours = state_coefficients(n, j).as_vector(len(states[j]))
    scale = np.max(np.abs(states[j]))
    np.testing.assert_allclose(ours, states[j], atol=1e-10 * scale)


@given(levels)
def test_state_offsets_respect_ground(n):
    for j in (1, 2, 3):
        table = state_coefficients(n, j)
        for k, v in table.entries.items():
            if n + k < 0:
                assert v == 0.0
            assert k % 2 == 0


# -- position --------------------------------------------------------------

def test_position_free_values():
    assert position_element(1, 0, ModelParams(0.0)) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    assert position_element(7, 0, ModelParams(0.0)) == 0.0


def test_position_band_seven():
    g = 0.001
    expected = g ** 3 * math.sqrt(5040) / (64 * math.sqrt(2))
    assert position_element(7, 0, ModelParams(g)) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("n", [0, 1, 2, 3, 5, 8, 12])
def test_position_series_matches_numerical_rs(n):
    for m in range(max(0, n - 7), n + 8):
        np.testing.assert_allclose(position_series(m, n), rs_position(m, n), atol=1e-8,
                                   rtol=1e-10, err_msg=f"x_{m},{n}")


@given(levels, st.integers(-9, 9))
def test_position_symmetry_and_parity(n, d):
    m = n + d
    if m < 0:
        return
    s = position_series(m, n)
    np.testing.assert_allclose(s, position_series(n, m), rtol=1e-13, atol=1e-300)
    if d % 2 == 0 or abs(d) > 7:
        assert not np.any(s)


@given(levels, st.sampled_from([-7, -5, -3, -1, 1, 3, 5, 7]))
def test_position_order_nesting(n, d):
    if n + d < 0:
        return
    full = position_series(n + d, n, 3)
    for order in range(4):
        np.testing.assert_array_equal(position_series(n + d, n, order), full[: order + 1])


# -- moments ---------------------------------------------------------------

@pytest.mark.parametrize("n", [0, 1, 4, 10])
def test_moments_match_numerical_rs(n):
    from _reference import ladder
    _, states = rs_series(n)
    N = len(states[0])
    a, X = ladder(N)
    Pm = 1j * (a.T - a) / np.sqrt(2)
    X2, P2 = X @ X, (Pm @ Pm).real
    for op, ours in ((X2, x2_series(n)), (P2, p2_series(n))):
        ref = [sum(states[i] @ op @ states[j - i] for i in range(j + 1)) for j in range(4)]
        # the truncated squares are wrong only in the top rows, far from these states
        np.testing.assert_allclose(ours, ref, rtol=1e-10)


@given(levels)
def test_virial_links_moments_to_consistent_energy(n):
    # virial plus Hellmann-Feynman: <x^2> = E - 3g dE/dg, order by order
    E = energy_series(n, 3, e3="consistent")
    x2 = x2_series(n)
    for j in range(4):
        assert x2[j] == pytest.approx(E[j] * (1 - 3 * j), rel=1e-12)


def test_position_first_order_example():
    assert position_element(1, 0, ModelParams(0.001)) == pytest.approx(
        (32 - 0.048 + 3.78e-4 - 4.527e-6) / (32 * math.sqrt(2)), rel=1e-9)


def test_ground_state_moments():
    np.testing.assert_allclose(x2_series(0), [0.5, -1.5, 105 / 8, -333 / 2])
    np.testing.assert_allclose(p2_series(0), [0.5, 1.5, -63 / 8, 333 / 4])
