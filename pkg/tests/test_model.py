import dataclasses

import numpy as np
import pytest

from arrivalnet.backbones import inception_forward
from arrivalnet.errors import ConfigError, ContractError
from arrivalnet.model import (
    ArrivalNet,
    ModelConfig,
    block_forward,
    model_forward,
    persistence_forecast,
    predict_arrivals,
)
from arrivalnet.periods import detect_periods, to_1d, to_2d
from arrivalnet.samples import DELAY_CHANNEL, Batch, SequenceSample
from arrivalnet.tensor import Tensor, backward, mean, softmax
from conftest import central_diff, rel_err


def make_sample(rng, n_p=10, n_f=5):
    past = np.column_stack([
        rng.uniform(0.2, 0.9, n_p), rng.uniform(40, 140, n_p), np.cumsum(rng.normal(5, 10, n_p)),
        rng.integers(0, 2, n_p), rng.uniform(40, 140, n_p),
    ])
    return SequenceSample(past=past, peak=int(rng.integers(2)), weekday=1,
                          future_delays=past[-1, 2] + np.cumsum(rng.normal(5, 10, n_f)),
                          future_scheduled=np.cumsum(rng.uniform(60, 120, n_f)) + 900.0)


def zero_blocks(model):
    for block in model.blocks:
        for _, t in block.named_parameters("b"):
            t.data[:] = 0.0


def test_config_validation_and_roundtrip():
    cfg = ModelConfig(n_future=10, backbone="swin")
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        ModelConfig(top_k=8)
    with pytest.raises(ConfigError):
        ModelConfig(backbone="lstm")
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"d_model": 16, "dropout": 0.1})


def test_table_defaults():
    cfg = ModelConfig()
    assert (cfg.d_model, cfg.num_blocks, cfg.top_k, cfg.num_kernels, cfg.n_past, cfg.window_size,
            cfg.learning_rate) == (16, 2, 3, 6, 10, 2, 0.001)


def test_zero_blocks_are_identity():
    rng = np.random.default_rng(0)
    model = ArrivalNet(ModelConfig(), seed=1)
    zero_blocks(model)
    x = Tensor(rng.normal(size=(3, 15, 16)))
    for block in model.blocks:
        np.testing.assert_array_equal(block_forward(x, model.cfg, block).data, x.data)


def test_zero_swin_block_doubles_input():
    # the attention backbone carries its own residuals, so zero parameters make it the identity
    # and the block returns branch (= x, softmax weights sum to 1) plus the block residual
    rng = np.random.default_rng(0)
    model = ArrivalNet(ModelConfig(backbone="swin"), seed=1)
    zero_blocks(model)
    x = Tensor(rng.normal(size=(3, 15, 16)))
    np.testing.assert_allclose(block_forward(x, model.cfg, model.blocks[0]).data, 2 * x.data, rtol=1e-14)


def test_zero_head_predicts_past_mean_delay():
    rng = np.random.default_rng(1)
    model = ArrivalNet(ModelConfig(), seed=2)
    samples = [make_sample(rng) for _ in range(4)]
    pred = model.predict_delays(samples)
    for s, p in zip(samples, pred):
        np.testing.assert_allclose(p, s.past[:, DELAY_CHANNEL].mean(), rtol=1e-12)


def test_residual_representation_is_embedding():
    rng = np.random.default_rng(3)
    model = ArrivalNet(ModelConfig(), seed=3)
    zero_blocks(model)
    batch = Batch.from_samples([make_sample(rng)])
    x, _ = model.encode(batch.past, batch.context)
    h = x
    for block in model.blocks:
        h = block_forward(h, model.cfg, block)
    np.testing.assert_array_equal(h.data, x.data)


def test_single_period_branch_weight_is_one():
    rng = np.random.default_rng(4)
    cfg = ModelConfig(top_k=1)
    model = ArrivalNet(cfg, seed=4)
    x = rng.normal(size=(15, 16))
    p = detect_periods(x, 1).entries[0].period
    branch = to_1d(inception_forward(to_2d(x, p), model.blocks[0].backbone), 15).data
    np.testing.assert_allclose(block_forward(Tensor(x), cfg, model.blocks[0]).data, branch + x, atol=1e-12)


def test_aggregation_weights_sum_to_one():
    amps = np.abs(np.random.default_rng(5).normal(size=(6, 3))) * 10
    np.testing.assert_allclose(softmax(Tensor(amps), axis=-1).data.sum(axis=-1), 1.0, atol=1e-12)


@pytest.mark.parametrize("n_f", [5, 10])
@pytest.mark.parametrize("backbone", ["inception", "swin"])
def test_output_length(n_f, backbone):
    rng = np.random.default_rng(6)
    cfg = ModelConfig(n_future=n_f, backbone=backbone)
    model = ArrivalNet(cfg, seed=0)
    assert model_forward(make_sample(rng, n_f=n_f), cfg, model).shape == (n_f,)


def test_predict_arrivals():
    rng = np.random.default_rng(7)
    cfg = ModelConfig()
    model = ArrivalNet(cfg, seed=0)
    s = make_sample(rng)
    np.testing.assert_allclose(predict_arrivals(s, cfg, model) - s.future_scheduled,
                               model_forward(s, cfg, model), atol=1e-9)
    model.head_bias.data[:] = 0.0
    s2 = dataclasses.replace(s, past=s.past.copy())
    s2.past[:, DELAY_CHANNEL] = 0.0  # zero mean delay and zero head -> timetable
    np.testing.assert_allclose(predict_arrivals(s2, cfg, model), s2.future_scheduled)
    with pytest.raises(ContractError):
        predict_arrivals(dataclasses.replace(s, future_scheduled=None), cfg, model)


def test_arrival_arithmetic():
    sched = np.array([600.0, 720.0])
    assert list(np.array([55.0, 60.0]) + sched) == [655.0, 780.0]


def test_mismatched_window_rejected():
    rng = np.random.default_rng(8)
    model = ArrivalNet(ModelConfig(), seed=0)
    with pytest.raises(ContractError):
        model.predict_delays([make_sample(rng, n_f=10)])


def test_context_ablation_changes_channels():
    with_ctx = ArrivalNet(ModelConfig(context_enabled=True), seed=0)
    without = ArrivalNet(ModelConfig(context_enabled=False), seed=0)
    assert with_ctx.embedding.value_kernel.shape[1] == 7
    assert without.embedding.value_kernel.shape[1] == 5
    assert with_ctx.num_parameters() - without.num_parameters() == 3 * 2 * 16


def test_deterministic_forward():
    rng = np.random.default_rng(9)
    samples = [make_sample(rng) for _ in range(3)]
    a = ArrivalNet(ModelConfig(backbone="swin"), seed=5)
    b = ArrivalNet(ModelConfig(backbone="swin"), seed=5)
    for m in (a, b):
        m.head_weight.data[:] = 0.1
    np.testing.assert_array_equal(a.predict_delays(samples), b.predict_delays(samples))


def test_persistence_forecast():
    rng = np.random.default_rng(10)
    s = make_sample(rng)
    np.testing.assert_array_equal(persistence_forecast([s])[0], np.full(5, s.past[-1, DELAY_CHANNEL]))


@pytest.mark.parametrize("backbone", ["inception", "swin"])
def test_end_to_end_gradient(backbone):
    rng = np.random.default_rng(11)
    model = ArrivalNet(ModelConfig(backbone=backbone), seed=11)
    model.head_weight.data = rng.uniform(-0.3, 0.3, size=model.head_weight.shape)
    batch = Batch.from_samples([make_sample(rng) for _ in range(2)])

    def loss():
        y, _ = model.forward_normalized(batch.past, batch.context)
        return mean(y * y)

    model.zero_grad()
    backward(loss())
    params = list(model.named_parameters().items())
    for _ in range(10):
        name, t = params[rng.integers(len(params))]
        idx = tuple(int(rng.integers(s)) for s in t.shape)
        num = central_diff(lambda: float(loss().data), t.data, idx)
        assert rel_err(float(t.grad[idx]), num, floor=1e-7) < 1e-3, name
