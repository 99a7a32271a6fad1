import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgfwa import REGISTRY, MlpBlackBox, NetSpec, Sphere, build_net, forward, gelu, get_spec
from mgfwa import net_from_json, net_to_json, param_count, relu, sphere

PRINTED_PARAMS = {1: 465, 2: 4_609, 3: 1_441, 4: 4_929, 5: 35_649, 6: 128_641, 7: 42_049,
                  8: 141_441, 9: 914_433, 10: 3_137_585, 11: 1_173_433, 12: 3_657_585}


def hand_net(activation="relu"):
    spec = NetSpec(net_id=0, scale="small", activation=activation, input_dim=1, hidden_dim=1,
                   hidden_layers=1, reported_params=4)
    return MlpBlackBox(spec, weights=[[[2.0]], [[3.0]]], biases=[[-1.0], [0.5]])


def test_hand_net():
    net = hand_net()
    assert forward(net, [2.0]) == 9.5
    assert forward(net, [-2.0]) == 0.5


def test_forward_rejects_wrong_dimension():
    net = build_net(get_spec(1))
    with pytest.raises(ValueError):
        forward(net, np.zeros(11))
    with pytest.raises(ValueError):
        net.evaluate_rows(np.zeros((3, 9)))


def _straight_line_forward(net, x):
    a = [float(v) for v in x]
    n_layers = len(net.weights)
    for layer in range(n_layers):
        w = net.weights[layer].tolist()
        b = net.biases[layer].tolist()
        out = []
        for j in range(len(b)):
            s = 0.0
            for i in range(len(a)):
                s += w[i][j] * a[i]
            v = s + b[j]
            if layer < n_layers - 1:
                v = max(0.0, v) if net.spec.activation == "relu" else \
                    0.5 * v * (1.0 + math.tanh(math.sqrt(2.0 / math.pi) * (v + 0.044715 * v**3)))
            out.append(v)
        a = out
    return a[0]


def test_net1_at_origin_matches_independent_forward():
    net = build_net(get_spec(1), weight_seed=0)
    expected = _straight_line_forward(net, np.zeros(10))
    assert forward(net, np.zeros(10)) == pytest.approx(expected, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("net_id", [2, 3])
def test_registry_nets_match_independent_forward(net_id, rng):
    net = build_net(get_spec(net_id), weight_seed=5)
    for x in rng.uniform(-5, 5, size=(5, net.dim)):
        assert forward(net, x) == pytest.approx(_straight_line_forward(net, x), rel=1e-10, abs=1e-12)


def test_activations():
    assert relu(-3) == 0.0 and relu(2) == 2.0
    assert gelu(0.0) == 0.0


def test_gelu_three_high_precision():
    mpmath.mp.dps = 40
    x = mpmath.mpf(3)
    ref = 0.5 * x * (1 + mpmath.tanh(mpmath.sqrt(2 / mpmath.pi) * (x + mpmath.mpf("0.044715") * x**3)))
    assert abs(gelu(3.0) - float(ref)) < 1e-12
    assert gelu(3.0) == pytest.approx(2.9964, abs=1e-3)


def test_gelu_close_to_exact_form():
    xs = np.linspace(-6, 6, 601)
    exact = np.array([0.5 * x * (1 + math.erf(x / math.sqrt(2))) for x in xs])
    approx = np.array([gelu(x) for x in xs])
    assert np.max(np.abs(exact - approx)) < 1e-3


def test_gelu_tail_and_monotonicity():
    assert abs(gelu(20.0) - relu(20.0)) < 1e-6
    grid = np.linspace(-0.7, 30, 5000)
    vals = np.array([gelu(x) for x in grid])
    assert np.all(np.diff(vals) >= 0)


@pytest.mark.parametrize("net_id", range(1, 10))
def test_param_count_matches_printed_table(net_id):
    assert param_count(REGISTRY[net_id]) == PRINTED_PARAMS[net_id]


@pytest.mark.parametrize("net_id,expected", [(10, 3_139_585), (11, 1_170_433), (12, 3_651_585)])
def test_param_count_large_nets_follow_formula(net_id, expected):
    assert param_count(REGISTRY[net_id]) == expected
    assert REGISTRY[net_id].reported_params == PRINTED_PARAMS[net_id]


def test_minimal_param_count():
    assert param_count(hand_net().spec) == 4


@pytest.mark.parametrize("net_id", range(1, 13))
def test_realized_net_allocates_param_count(net_id):
    spec = REGISTRY[net_id]
    net = build_net(spec, weight_seed=1)
    counted = sum(w.size for w in net.weights) + sum(b.size for b in net.biases)
    assert counted == param_count(spec) == net.n_params


def test_registry_table_values():
    assert sorted(REGISTRY) == list(range(1, 13))
    assert [s.input_dim for s in REGISTRY.values()] == [10, 10, 20, 20, 100, 100, 200, 200,
                                                      1000, 1000, 2000, 2000]
    assert [s.hidden_dim for s in REGISTRY.values()] == [16, 32] * 2 + [64, 128] * 2 + [256, 512] * 2
    assert [s.hidden_layers for s in REGISTRY.values()] == [2, 5, 5, 5, 8, 8, 8, 8, 11, 11, 11, 11]
    assert [s.activation for s in REGISTRY.values()] == ["relu", "gelu"] * 6
    assert [s.scale for s in REGISTRY.values()] == ["small"] * 4 + ["medium"] * 4 + ["large"] * 4
    assert all(s.output_dim == 1 for s in REGISTRY.values())
    with pytest.raises(ValueError):
        get_spec(13)


def test_build_is_deterministic():
    a = build_net(get_spec(2), weight_seed=3)
    b = build_net(get_spec(2), weight_seed=3)
    c = build_net(get_spec(2), weight_seed=4)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_weights_are_immutable():
    net = build_net(get_spec(1))
    with pytest.raises(ValueError):
        net.weights[0][0, 0] = 1.0


def test_unit_fan_in_bounds():
    spec = NetSpec(0, "small", "relu", input_dim=1, hidden_dim=64, hidden_layers=1, reported_params=0)
    net = build_net(spec, weight_seed=9)
    assert np.all(np.abs(net.weights[0]) <= 1.0)
    assert np.all(np.abs(net.biases[0]) <= 1.0)


def test_weight_std_matches_uniform_law():
    spec = NetSpec(0, "small", "relu", input_dim=16, hidden_dim=6250, hidden_layers=1, reported_params=0)
    w = build_net(spec, weight_seed=2).weights[0]
    assert w.size == 10**5
    expected = 1.0 / (math.sqrt(16) * math.sqrt(3))
    assert abs(w.std() - expected) / expected < 0.05
    assert np.all(np.abs(w) <= 0.25)


def test_sphere_examples(rng):
    assert sphere(np.zeros(4)) == 0.0
    assert sphere([1.0, 2.0]) == 5.0
    x = rng.normal(size=10)
    total = 0.0
    for v in x:
        total += v * v
    assert sphere(x) == total
    assert Sphere(10)(x) == total


def test_json_round_trip(tmp_path):
    net = build_net(get_spec(3), weight_seed=17)
    text = net_to_json(net)
    doc = json.loads(text)
    assert doc["weight_seed"] == 17 and doc["input_dim"] == 20
    assert "weights" not in doc
    clone = net_from_json(text)
    x = np.linspace(-1, 1, 20)
    assert forward(clone, x) == forward(net, x)
    with pytest.raises(ValueError):
        net_to_json(hand_net())


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), rows=st.integers(1, 40), split=st.integers(1, 40))
def test_row_value_independent_of_block(seed, rows, split):
    net = build_net(get_spec(4), weight_seed=seed % 7)
    x = np.random.default_rng(seed).uniform(-5, 5, size=(rows, 20))
    whole = net.evaluate_rows(x)
    parts = np.concatenate([net.evaluate_rows(x[i:i + split]) for i in range(0, rows, split)])
    assert whole.tobytes() == parts.tobytes()
