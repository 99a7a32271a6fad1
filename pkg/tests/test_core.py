import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgfwa import EvalBackend, Sphere, argmin_per_population, batch_cube, batched_apply, build_net, get_spec
from mgfwa.nets import MlpBlackBox, NetSpec


def test_constant_objective():
    cube = np.random.default_rng(0).normal(size=(2, 3, 4))
    out = batched_apply(lambda x: 7.0, cube, EvalBackend.serial())
    assert out.shape == (2, 3)
    assert np.all(out == 7.0)


def test_sum_of_zeros():
    out = batched_apply(lambda x: float(np.sum(x)), np.zeros((2, 3, 4)))
    assert np.all(out == 0.0)


def test_sphere_backends_bit_identical(parallel4):
    cube = np.random.default_rng(1).uniform(-10, 10, size=(4, 5, 10))
    a = batched_apply(Sphere(10), cube, EvalBackend.serial())
    b = batched_apply(Sphere(10), cube, parallel4)
    assert a.tobytes() == b.tobytes()


def test_plain_callable_backends_agree(parallel4):
    cube = np.random.default_rng(2).normal(size=(3, 7, 5))
    f = lambda x: float(np.prod(np.cos(x)))  # noqa: E731
    assert np.array_equal(batched_apply(f, cube, EvalBackend.serial(), group=3),
                          batched_apply(f, cube, parallel4))


def test_nan_becomes_inf_and_is_counted():
    backend = EvalBackend.serial()
    cube = np.arange(6, dtype=float).reshape(1, 6, 1)
    out = batched_apply(lambda x: float("nan") if x[0] % 2 else x[0], cube, backend)
    assert out.tolist() == [[0.0, np.inf, 2.0, np.inf, 4.0, np.inf]]
    assert backend.nan_count == 3


def test_argmin_examples():
    idx, val = argmin_per_population([[5, 3, 9]])
    assert (idx[0], val[0]) == (1, 3)
    idx, val = argmin_per_population([[2, 2, 2]])
    assert (idx[0], val[0]) == (0, 2)
    idx, val = argmin_per_population([[np.inf, np.inf]])
    assert idx[0] == 0 and val[0] == np.inf


def test_argmin_matches_exhaustive_scan(rng):
    fit = rng.integers(0, 5, size=(8, 16)).astype(float)
    idx, val = argmin_per_population(fit)
    for b in range(8):
        best_i, best_v = 0, fit[b, 0]
        for i in range(1, 16):
            if fit[b, i] < best_v:
                best_i, best_v = i, fit[b, i]
        assert idx[b] == best_i and val[b] == best_v


def test_batch_cube_validation():
    cube = batch_cube(np.ones((2, 3, 4)))
    assert not cube.flags.writeable
    with pytest.raises(ValueError):
        batch_cube(np.ones((2, 3)))
    with pytest.raises(ValueError):
        batch_cube(np.full((1, 1, 1), np.nan))


def test_backend_validation():
    with pytest.raises(ValueError):
        EvalBackend("gpu")
    with pytest.raises(ValueError):
        EvalBackend("serial", workers=2)
    with pytest.raises(ValueError):
        EvalBackend.data_parallel(0)


_NETS = {i: build_net(get_spec(i), weight_seed=i) for i in (1, 2, 3, 4)}


def _objective(kind, dim):
    if kind == "sphere":
        return Sphere(dim)
    return _NETS[kind]


@settings(max_examples=120, deadline=None)
@given(kind=st.sampled_from(["sphere", 1, 2, 3, 4]),
       b=st.integers(1, 4), n=st.integers(1, 9),
       workers=st.integers(2, 6), group=st.integers(1, 5),
       seed=st.integers(0, 2**32 - 1), scale=st.sampled_from([1.0, 10.0, 1e6]))
def test_backend_equivalence_property(kind, b, n, workers, group, seed, scale):
    obj = _objective(kind, 7)
    dim = obj.dim
    cube = np.random.default_rng(seed).uniform(-scale, scale, size=(b, n, dim))
    with EvalBackend.data_parallel(workers) as par:
        a = batched_apply(obj, cube, EvalBackend.serial(), group=group)
        p = batched_apply(obj, cube, par)
    assert a.tobytes() == p.tobytes()
    rows = cube.reshape(-1, dim)
    singles = np.array([obj(r) for r in rows]).reshape(b, n)
    assert a.tobytes() == singles.tobytes()


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 12))
def test_no_overflow_for_extreme_inputs(seed, dim):
    cube = np.random.default_rng(seed).uniform(-1e30, 1e30, size=(2, 3, dim))
    fit = batched_apply(Sphere(dim), cube)
    assert np.all(np.isfinite(fit))
    idx, val = argmin_per_population(fit)
    assert np.all(np.isfinite(val))
