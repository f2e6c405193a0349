"""Network variants: shapes, reductions, and gradient correctness."""

import numpy as np
import pytest

from opdyn import nn


def _spec(variant, **kw):
    defaults = dict(input_dim=5, depth=3, hidden_width=12,
                    frequencies=tuple(np.logspace(-1, 1, 4)))
    defaults.update(kw)
    return nn.NetworkSpec(variant=variant, **defaults)


def test_variant_validation():
    with pytest.raises(ValueError):
        _spec("mlp")
    with pytest.raises(ValueError):
        _spec("fan", fan_partition=(3, 3, 3))  # does not tile width 12
    with pytest.raises(ValueError):
        _spec("fan_time", append_time=True)


def test_parameter_layout_is_contiguous():
    for variant in nn.VARIANTS:
        spec = _spec(variant)
        layout = nn.build_layout(spec)
        offset = 0
        for name, shape, off in layout:
            assert off == offset
            offset += int(np.prod(shape))
        params = nn.init_parameters(spec, seed=0)
        assert params.size == offset
        # [TRIVIAL] views alias the flat vector
        params.view("b0")[:] = 7.0
        assert np.all(params.view("b0") == 7.0)


def test_zero_readout_gives_zero_field():
    # [DERIVED] freshly initialized networks define the zero vector field,
    # so the untrained ODE is trivially integrable.
    rng = np.random.default_rng(0)
    for variant in nn.VARIANTS:
        spec = _spec(variant)
        params = nn.init_parameters(spec, seed=1)
        out = nn.forward(spec, params, rng.standard_normal((4, 5)), t=0.7)
        assert np.all(out == 0.0)


def test_fan_with_zero_trig_blocks_equals_fcn():
    # [DERIVED] a fan network whose sin/cos blocks are empty is an fcn
    # with a narrower hidden stack: identical parameter count and output.
    fan = _spec("fan", fan_partition=(0, 0, 12))
    fcn = _spec("fcn", fan_partition=None)
    pa = nn.init_parameters(fan, seed=3)
    pb = nn.Parameters(pa.values.copy(), nn.build_layout(fcn))
    x = np.random.default_rng(4).standard_normal((6, 5))
    assert np.allclose(nn.forward(fan, pa, x), nn.forward(fcn, pb, x))


def test_fan_time_is_time_dependent_and_fan_is_not():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 5))
    for variant, depends in (("fan", False), ("fan_time", True)):
        spec = _spec(variant)
        params = nn.init_parameters(spec, seed=6)
        params.view("Wout")[:] = rng.standard_normal(
            params.view("Wout").shape) * 0.1
        a = nn.forward(spec, params, x, t=0.0)
        b = nn.forward(spec, params, x, t=1.3)
        assert (not np.allclose(a, b)) == depends


def test_forward_requires_time_for_fan_time():
    spec = _spec("fan_time")
    params = nn.init_parameters(spec, seed=0)
    with pytest.raises(ValueError):
        nn.forward(spec, params, np.zeros((1, 5)))


def test_unit_frequencies_tile_the_ladder():
    spec = _spec("fan", frequencies=(0.5, 2.0))
    assert np.allclose(spec.unit_frequencies(5), [0.5, 2.0, 0.5, 2.0, 0.5])


@pytest.mark.parametrize("variant", nn.VARIANTS)
def test_backward_matches_finite_differences(variant):
    # [DERIVED] reverse mode vs central differences on both the parameter
    # gradient and the state cotangent.
    spec = _spec(variant, depth=2, hidden_width=8,
                 frequencies=tuple(np.logspace(-1, 0.5, 4)))
    params = nn.init_parameters(spec, seed=7)
    rng = np.random.default_rng(8)
    params.values[:] = 0.2 * rng.standard_normal(params.size)
    x = rng.standard_normal((3, 5))
    g_out = rng.standard_normal((3, 5))
    t = 0.9

    caches = []
    nn.forward(spec, params, x, t=t, caches=caches)
    grad = nn.GradientBuffer(params)
    x_bar = nn.backward(spec, params, caches, g_out, grad)

    def scalar(values, xv):
        p = nn.Parameters(values, params.layout)
        return float(np.sum(nn.forward(spec, p, xv, t=t) * g_out))

    eps = 1e-6
    idx = rng.choice(params.size, size=25, replace=False)
    for i in idx:
        vp, vm = params.values.copy(), params.values.copy()
        vp[i] += eps
        vm[i] -= eps
        fd = (scalar(vp, x) - scalar(vm, x)) / (2 * eps)
        denom = max(abs(fd), abs(grad.values[i]), 1e-8)
        assert abs(fd - grad.values[i]) / denom < 1e-4

    flat = x.ravel()
    for j in rng.choice(flat.size, size=10, replace=False):
        xp, xm = x.copy().ravel(), x.copy().ravel()
        xp[j] += eps
        xm[j] -= eps
        fd = (scalar(params.values, xp.reshape(x.shape))
              - scalar(params.values, xm.reshape(x.shape))) / (2 * eps)
        got = x_bar.ravel()[j]
        denom = max(abs(fd), abs(got), 1e-8)
        assert abs(fd - got) / denom < 1e-4
