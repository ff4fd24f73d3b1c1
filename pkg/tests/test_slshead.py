"""Head math: forward against a loop oracle, exact gradients, checkpoints."""

import io

import numpy as np
import pytest

from oracles import central_difference, forward_score_loop
from slskit.errors import CheckpointError, UsageError
from slskit.featstore import HiddenStack
from slskit.rng import SplitMix64, derive
from slskit.slshead import (
    SlsParams,
    init_params,
    layer_weights,
    load_params,
    save_params,
    score_stack,
    sls_backward,
    sls_forward,
    write_layer_weight_csv,
)


def random_case(L, N, D, seed):
    rng = SplitMix64(derive(seed, 17))
    values = (rng.uniform_block(L * N * D).reshape(L, N, D) * 2.0 - 1.0) * 1.5
    params = init_params(D, derive(seed, 3))
    return values, params


# ---------------------------------------------------------------------------
# forward


def test_forward_matches_frozen_loop_oracle():
    # hand-specified parameters, generator-drawn inputs, score frozen
    # from the loop oracle so both implementations are pinned
    rng = SplitMix64(2024)
    values = rng.uniform_block(3 * 5 * 4).reshape(3, 5, 4) * 2.0 - 1.0
    params = SlsParams(
        gate_weight=[0.1, -0.2, 0.3, -0.4],
        gate_bias=0.05,
        out_weight=[1.0, -0.5, 0.25, 2.0],
        out_bias=-0.1,
    )
    score, cache = sls_forward(values, params)
    oracle = forward_score_loop(
        values.tolist(), [0.1, -0.2, 0.3, -0.4], 0.05, [1.0, -0.5, 0.25, 2.0], -0.1
    )
    assert score == pytest.approx(oracle, abs=1e-12)
    assert score == pytest.approx(1.411001441876568, abs=1e-12)
    assert cache.alpha == pytest.approx(
        [0.503683236278675, 0.4640136853840582, 0.5608907829413722], abs=1e-15
    )


@pytest.mark.parametrize("L,N,D,seed", [(1, 1, 1, 0), (2, 5, 3, 1), (6, 4, 8, 2), (25, 10, 16, 3)])
def test_forward_matches_loop_oracle_random(L, N, D, seed):
    values, params = random_case(L, N, D, seed)
    score, _ = sls_forward(values, params)
    oracle = forward_score_loop(
        values.tolist(),
        params.gate_weight.tolist(),
        params.gate_bias,
        params.out_weight.tolist(),
        params.out_bias,
    )
    assert score == pytest.approx(oracle, rel=1e-12)


def test_forward_accepts_hidden_stack_and_upcasts():
    values, params = random_case(2, 3, 4, 9)
    stack = HiddenStack("u", values.astype(np.float32))
    s_stack, cache = sls_forward(stack, params)
    s_array, _ = sls_forward(stack.values, params)
    assert s_stack == s_array
    assert cache.values.dtype == np.float64


def test_max_pool_tie_takes_lowest_frame():
    # two identical frames: the argmax must report frame 0
    values = np.zeros((1, 3, 2))
    values[0, 0] = [1.0, -5.0]
    values[0, 1] = [1.0, -5.0]
    values[0, 2] = [0.0, -6.0]
    params = SlsParams(
        gate_weight=np.zeros(2), gate_bias=0.0, out_weight=np.ones(2), out_bias=0.0
    )
    _, cache = sls_forward(values, params)
    assert cache.argmax_frames.tolist() == [0, 0]


def test_gate_saturation_is_finite():
    values = np.full((2, 2, 2), 1e4)
    params = SlsParams(
        gate_weight=np.array([50.0, 50.0]),
        gate_bias=0.0,
        out_weight=np.array([1e-3, 1e-3]),
        out_bias=0.0,
    )
    score, cache = sls_forward(values, params)
    assert np.isfinite(score)
    assert cache.alpha == pytest.approx([1.0, 1.0])
    grads = sls_backward(cache, params, 1.0)
    assert grads.is_finite()
    # saturated gates pass no gradient
    assert grads.gate_weight == pytest.approx(np.zeros(2), abs=1e-300)


def test_feature_dim_mismatch_raises():
    values, params = random_case(2, 3, 4, 0)
    with pytest.raises(UsageError, match="feature dim"):
        sls_forward(values[:, :, :3], params)


def test_score_stack_is_forward_score():
    values, params = random_case(3, 4, 5, 11)
    assert score_stack(values, params) == sls_forward(values, params)[0]


# ---------------------------------------------------------------------------
# backward


@pytest.mark.parametrize("L,N,D,seed", [(1, 1, 1, 0), (3, 4, 2, 1), (4, 16, 16, 2), (25, 10, 8, 3)])
def test_backward_matches_finite_differences(L, N, D, seed):
    values, params = random_case(L, N, D, seed)
    upstream = 0.7

    def score_of(vec):
        s, _ = sls_forward(values, SlsParams.from_vector(D, vec))
        return upstream * s

    _, cache = sls_forward(values, params)
    analytic = sls_backward(cache, params, upstream).to_vector()
    numeric = central_difference(score_of, params.to_vector(), h=1e-5)
    assert analytic == pytest.approx(numeric, rel=1e-6, abs=1e-9)


def test_backward_is_linear_in_upstream():
    values, params = random_case(2, 3, 4, 5)
    _, cache = sls_forward(values, params)
    g1 = sls_backward(cache, params, 1.0).to_vector()
    g3 = sls_backward(cache, params, 3.0).to_vector()
    assert g3 == pytest.approx(3.0 * g1, rel=1e-15)


def test_backward_routes_through_argmax_only():
    # gradient w.r.t. out_weight is the pooled vector itself
    values, params = random_case(2, 4, 3, 8)
    _, cache = sls_forward(values, params)
    grads = sls_backward(cache, params, 1.0)
    assert grads.out_weight == pytest.approx(cache.pooled)
    assert grads.out_bias == 1.0


# ---------------------------------------------------------------------------
# init and parameter packing


def test_init_params_draw_order_and_range():
    d = 9
    params = init_params(d, 77)
    rng = SplitMix64(77)
    half = 1.0 / np.sqrt(d)
    expected_gate = [rng.uniform_in(-half, half) for _ in range(d)]
    expected_out = [rng.uniform_in(-half, half) for _ in range(d)]
    assert params.gate_weight.tolist() == expected_gate
    assert params.out_weight.tolist() == expected_out
    assert params.gate_bias == 0.0 and params.out_bias == 0.0
    assert np.max(np.abs(params.gate_weight)) <= half


def test_vector_roundtrip():
    params = init_params(5, 3)
    again = SlsParams.from_vector(5, params.to_vector())
    assert np.array_equal(again.gate_weight, params.gate_weight)
    assert np.array_equal(again.out_weight, params.out_weight)
    assert again.gate_bias == params.gate_bias
    assert again.out_bias == params.out_bias
    assert params.size == 12


def test_params_shape_validation():
    with pytest.raises(UsageError):
        SlsParams(gate_weight=np.zeros(3), gate_bias=0, out_weight=np.zeros(4), out_bias=0)
    with pytest.raises(UsageError):
        SlsParams.from_vector(3, np.zeros(7))


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    params = init_params(16, 123)
    path = tmp_path / "head.slsp"
    n = save_params(params, path)
    assert n == 10 + 8 * (2 * 16 + 2)  # fixed header + binary64 payload
    back = load_params(path)
    assert back.gate_weight.tobytes() == params.gate_weight.tobytes()
    assert back.out_weight.tobytes() == params.out_weight.tobytes()
    assert back.gate_bias == params.gate_bias
    assert back.out_bias == params.out_bias


def test_checkpoint_rejects_corruption(tmp_path):
    params = init_params(4, 5)
    buf = io.BytesIO()
    save_params(params, buf)
    blob = buf.getvalue()
    with pytest.raises(CheckpointError, match="not an SLSP"):
        load_params(io.BytesIO(b"XXXX" + blob[4:]))
    with pytest.raises(CheckpointError, match="version"):
        load_params(io.BytesIO(blob[:4] + b"\x09\x00" + blob[6:]))
    with pytest.raises(CheckpointError, match="truncated"):
        load_params(io.BytesIO(blob[:-1]))
    with pytest.raises(CheckpointError, match="trailing"):
        load_params(io.BytesIO(blob + b"\x00"))
    bad = bytearray(blob)
    bad[10:18] = np.array([np.nan]).tobytes()
    with pytest.raises(CheckpointError, match="non-finite"):
        load_params(io.BytesIO(bytes(bad)))


def test_save_refuses_nonfinite_params():
    params = init_params(2, 1)
    params.gate_bias = float("inf")
    with pytest.raises(Exception, match="non-finite"):
        save_params(params, io.BytesIO())


# ---------------------------------------------------------------------------
# layer weights


def test_layer_weights_are_gate_activations():
    values, params = random_case(5, 3, 4, 21)
    alpha = layer_weights(values, params)
    _, cache = sls_forward(values, params)
    assert np.array_equal(alpha, cache.alpha)
    assert alpha.shape == (5,)
    assert np.all((alpha > 0) & (alpha < 1))


def test_layer_weight_csv_format():
    buf = io.StringIO()
    write_layer_weight_csv(buf, [("u1", np.array([0.5, 0.25])), ("u2", np.array([1.0, 0.125]))])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "utterance_id,layer_0,layer_1"
    assert lines[1] == "u1,0.5,0.25"
    assert lines[2] == "u2,1,0.125"


def test_layer_weight_csv_rejects_ragged_rows():
    buf = io.StringIO()
    with pytest.raises(UsageError, match="layer count"):
        write_layer_weight_csv(buf, [("u1", np.zeros(2)), ("u2", np.zeros(3))])
