import numpy as np
import pytest
from parameterized import parameterized

from cellarium.warp import constants, exceptions
from cellarium.warp.warping import (
    WarpPair,
    WarpSpec,
    default_delta,
    format_warp,
    is_monotone,
    parse_warp_pair,
    random_warp,
    warp_deriv,
    warp_value,
)

FIG3D_WARP = WarpSpec.piecewise_linear(alpha=3.0, k1=0.65, k2=1.5, delta=1.05)


@parameterized.expand(
    [
        ("pwl_at_zero", FIG3D_WARP, 0.0, 1.05),
        ("pwl_at_alpha", FIG3D_WARP, 3.0, 3.0),
        ("pwl_upper_branch", FIG3D_WARP, 5.0, 6.0),
        ("identity", WarpSpec.identity(), 7.2, 7.2),
        ("power", WarpSpec.power(2), 3.0, 9.0),
        ("scale", WarpSpec.scale(0.5), 3.0, 1.5),
    ]
)
def test_warp_value(_, spec, t_value, expected):
    assert warp_value(spec, t_value) == pytest.approx(expected, abs=1e-12)


@parameterized.expand(
    [
        ("pwl_lower", FIG3D_WARP, 2.9, 0.65),
        ("pwl_upper", FIG3D_WARP, 3.1, 1.5),
        ("pwl_kink_is_left_derivative", FIG3D_WARP, 3.0, 0.65),
        ("power", WarpSpec.power(2), 4.0, 8.0),
        ("identity", WarpSpec.identity(), 0.0, 1.0),
        ("scale", WarpSpec.scale(2.0), 10.0, 2.0),
    ]
)
def test_warp_deriv(_, spec, t_value, expected):
    assert warp_deriv(spec, t_value) == pytest.approx(expected)


def test_sqrt_derivative_is_finite_at_zero():
    assert np.isfinite(warp_deriv(WarpSpec.power(0.5), 0.0))


def test_negative_distance_is_rejected():
    with pytest.raises(exceptions.WarpSpecError):
        warp_value(WarpSpec.identity(), -1.0)
    with pytest.raises(exceptions.WarpSpecError):
        warp_deriv(WarpSpec.identity(), np.array([1.0, -1e-3]))


def test_warp_value_is_vectorised():
    values = warp_value(FIG3D_WARP, np.array([0.0, 3.0, 5.0]))
    assert isinstance(values, np.ndarray)
    np.testing.assert_allclose(values, [1.05, 3.0, 6.0])


@parameterized.expand(
    [
        ("power_zero", lambda: WarpSpec.power(0)),
        ("scale_negative", lambda: WarpSpec.scale(-1)),
        ("k1_above_one", lambda: WarpSpec.piecewise_linear(3.0, 1.2, 1.5)),
        ("k2_below_one", lambda: WarpSpec.piecewise_linear(3.0, 0.5, 0.9)),
        ("alpha_zero", lambda: WarpSpec.piecewise_linear(0.0, 0.5, 1.5, 0.0)),
        ("negative_delta", lambda: WarpSpec.piecewise_linear(3.0, 0.5, 1.5, -1.0)),
        ("infinite_exponent", lambda: WarpSpec.power(float("inf"))),
    ]
)
def test_invalid_warp_parameters(_, build):
    with pytest.raises(exceptions.WarpSpecError):
        build()


@parameterized.expand(
    [
        ("fig3", 3.0, 0.65, 1.0, 1.05),
        ("no_handicap", 3.0, 1 - 1e-12, 1.0, 0.0),
        ("margin", 3.0, 0.65, 2.0, 2.10),
    ]
)
def test_default_delta(_, alpha, k1, margin_k, expected):
    assert default_delta(alpha, k1, margin_k) == pytest.approx(expected, abs=1e-9)


def test_default_delta_restores_raw_distance_at_alpha():
    spec = WarpSpec.piecewise_linear(alpha=2.5, k1=0.3, k2=4.0)
    assert warp_value(spec, 2.5) == pytest.approx(2.5)


@parameterized.expand([("alpha", (0.0, 0.5, 1.0)), ("k1", (3.0, 1.0, 1.0)), ("margin", (3.0, 0.5, 0.5))])
def test_default_delta_rejects_out_of_range(_, args):
    with pytest.raises(exceptions.WarpSpecError):
        default_delta(*args)


@parameterized.expand(
    [
        ("t^2 - t^2", WarpSpec.power(2), WarpSpec.power(2)),
        ("0.5*t - t", WarpSpec.scale(0.5), WarpSpec.identity()),
        ("pwl(3.0,0.65,1.5,1.05) - t", FIG3D_WARP, WarpSpec.identity()),
        ("  pwl( 3 , 0.65, 1.5 )-t ", WarpSpec.piecewise_linear(3.0, 0.65, 1.5), WarpSpec.identity()),
        ("sqrt(t) - sqrt(t)", WarpSpec.power(0.5), WarpSpec.power(0.5)),
        ("t^3/2 - 2t", WarpSpec.power(1.5), WarpSpec.scale(2.0)),
        ("2.0*t - t", WarpSpec.scale(2.0), WarpSpec.identity()),
        ("1e-1*t - t", WarpSpec.scale(0.1), WarpSpec.identity()),
    ]
)
def test_parse_warp_pair(expression, f1, f2):
    assert parse_warp_pair(expression) == WarpPair(f1=f1, f2=f2)


@parameterized.expand(
    [
        ("missing_separator", "t^2", 3),
        ("unknown_warp", "exp(t) - t", 0),
        ("bad_character", "t + t", 2),
        ("trailing_input", "t - t t", 6),
        ("wrong_pwl_arity", "pwl(1,0.5) - t", 0),
        ("invalid_pwl_slopes", "pwl(1,2,3) - t", 0),
        ("empty", "", 0),
        ("bad_exponent", "t^x - t", 2),
    ]
)
def test_parse_warp_pair_errors(_, expression, position):
    with pytest.raises(exceptions.WarpExpressionError) as error:
        parse_warp_pair(expression)

    assert error.value.position == position
    assert error.value.expression == expression
    assert "^" in str(error.value)


@parameterized.expand(
    [
        ("identity", WarpSpec.identity(), "t"),
        ("power", WarpSpec.power(2), "t^2"),
        ("scale", WarpSpec.scale(0.5), "0.5*t"),
        ("pwl", FIG3D_WARP, "pwl(3,0.65,1.5,1.05)"),
    ]
)
def test_format_warp(_, spec, expected):
    assert format_warp(spec) == expected


def test_format_is_read_back_exactly():
    pair = WarpPair(f1=WarpSpec.piecewise_linear(1.0 / 3.0, 0.123456789, 1.1), f2=WarpSpec.power(2.0 / 3.0))
    assert parse_warp_pair(str(pair)) == pair


def test_every_variant_is_monotone():
    rng = np.random.RandomState(0)
    specs = [WarpSpec.identity(), WarpSpec.power(0.5), WarpSpec.power(2), WarpSpec.scale(0.5), FIG3D_WARP]
    for spec in specs:
        s, u = np.sort(rng.uniform(0, 20, size=(2, 1000)), axis=0)
        assert np.all(warp_value(spec, s) <= warp_value(spec, u))
        assert is_monotone(spec, t_max=20.0)


@parameterized.expand([(variant.value, variant) for variant in constants.WarpVariant])
def test_random_warp_draws_the_requested_variant(_, variant):
    rng = np.random.default_rng(0)
    specs = [random_warp(rng, variant) for _ in range(20)]

    assert all(spec.variant == variant for spec in specs)
    assert all(is_monotone(spec, t_max=20.0) for spec in specs)


def test_is_monotone_detects_non_monotone_callable():
    assert not is_monotone(lambda t_values: (t_values - 2.0) ** 2, t_max=10.0)
    assert is_monotone(lambda t_values: np.sqrt(t_values), t_max=10.0)


@parameterized.expand(
    [
        ("identity", WarpSpec.identity()),
        ("sqrt", WarpSpec.power(0.5)),
        ("cube", WarpSpec.power(3)),
        ("scale", WarpSpec.scale(0.7)),
        ("pwl", FIG3D_WARP),
    ]
)
def test_derivative_matches_finite_differences(_, spec):
    rng = np.random.RandomState(0)
    t_values = rng.uniform(0, 10, size=1000)
    h = 1e-7
    keep = t_values > 1e-4
    if spec.variant == constants.WarpVariant.PIECEWISE_LINEAR:
        keep &= np.abs(t_values - spec.alpha) > 1e-4
    t_values = t_values[keep]

    numeric = (warp_value(spec, t_values + h) - warp_value(spec, t_values - h)) / (2 * h)

    np.testing.assert_allclose(warp_deriv(spec, t_values), numeric, rtol=1e-6)


def test_piecewise_linear_reverses_derivative_inequality_at_alpha():
    t_values = np.linspace(0, 10, 1001)
    slopes = warp_deriv(FIG3D_WARP, t_values)
    identity_slopes = warp_deriv(WarpSpec.identity(), t_values)

    assert np.all(slopes[t_values < 3.0] < identity_slopes[t_values < 3.0])
    assert np.all(slopes[t_values > 3.0] > identity_slopes[t_values > 3.0])


def test_piecewise_linear_is_continuous_at_alpha():
    for eps in (1e-6, 1e-8, 1e-10):
        gap = abs(warp_value(FIG3D_WARP, 3.0 - eps) - warp_value(FIG3D_WARP, 3.0 + eps))
        assert gap <= (0.65 + 1.5) * eps + 1e-14
