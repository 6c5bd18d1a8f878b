import numpy as np
import pytest

from mmsarc import fusionnet as fn

from oracles import finite_difference_grads, net_forward_loops, net_loss_longdouble

SMALL = fn.NetConfig(text_in_dim=7, text_hidden=4, image_dim=5)


def random_batch(seed, cfg=SMALL, n=6):
    rng = np.random.default_rng(seed)
    text = (rng.random((n, cfg.text_in_dim)) < 0.4).astype(float)
    avr = rng.random((n, cfg.image_dim)) * (rng.random((n, cfg.image_dim)) < 0.7)
    y = rng.integers(0, cfg.n_classes, n)
    y[:2] = (0, 1)
    return fn.NetDataset(text, avr, y)


def random_net(seed, mode=fn.Mode.FUSION, cfg=SMALL):
    net = fn.FusionNet.init(cfg, seed, mode)
    rng = np.random.default_rng(seed + 1000)
    # non-zero biases so every parameter gets exercised
    net.params["b_text"][:] = rng.normal(scale=0.3, size=cfg.text_hidden)
    net.params["b_out"][:] = rng.normal(scale=0.3, size=cfg.n_classes)
    return net


def toy_separable():
    # 10 posts, one word each; words 0-4 sarcastic, 5-9 not
    text = np.eye(10)
    avr = np.zeros((10, 3))
    y = np.array([1] * 5 + [0] * 5)
    return fn.NetDataset(text, avr, y), fn.NetConfig(10, 8, 3)


# --------------------------------------------------------------------------
# forward


def test_zero_weights_uniform():
    net = fn.FusionNet.zeros(SMALL)
    p = net.predict_proba(np.ones((3, 7)), np.ones((3, 5)))
    assert p.tolist() == [[0.5, 0.5]] * 3


def test_uniform_loss_is_ln2():
    net = fn.FusionNet.zeros(SMALL)
    batch = fn.NetDataset(np.ones((1, 7)), np.ones((1, 5)), [0])
    assert fn.mean_loss(net, batch) == pytest.approx(np.log(2), abs=1e-15)


@pytest.mark.parametrize("mode", list(fn.Mode))
@pytest.mark.parametrize("seed", range(4))
def test_forward_matches_loop_oracle(seed, mode):
    net = random_net(seed, mode)
    b = random_batch(seed)
    got = net.predict_proba(b.text, b.avr)
    want = net_forward_loops(net.params, mode.value, b.text, b.avr)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    np.testing.assert_allclose(got.sum(axis=1), 1.0, rtol=0, atol=1e-15)
    assert np.all((got > 0) & (got < 1))


def test_dim_mismatch():
    net = fn.FusionNet.zeros(SMALL)
    with pytest.raises(ValueError):
        net.predict_proba(np.ones((1, 6)), np.ones((1, 5)))
    with pytest.raises(ValueError):
        net.predict_proba(np.ones((1, 7)), np.ones((1, 4)))


def test_topology_defaults():
    net = fn.FusionNet.zeros(fn.NetConfig(text_in_dim=3))
    t = net.topology()
    assert (t["text_hidden"], t["image_input"], t["concatenation"], t["output"]) == (512, 4096, 4608, 2)


# --------------------------------------------------------------------------
# gradients


def test_duplicate_example_same_gradient():
    net = random_net(1)
    b = random_batch(1).subset([2])
    _, g1 = fn.loss_and_grads(net, b)
    _, g2 = fn.loss_and_grads(net, b.subset([0, 0]))
    for k in g1:
        np.testing.assert_allclose(g1[k], g2[k], rtol=1e-14, atol=1e-17)


@pytest.mark.parametrize("mode", list(fn.Mode))
@pytest.mark.parametrize("seed", range(3))
def test_gradient_check(seed, mode):
    net = random_net(seed, mode)
    b = random_batch(seed)
    loss, g = fn.loss_and_grads(net, b)
    assert loss == pytest.approx(float(net_loss_longdouble(net.params, mode.value, b.text, b.avr, b.y)), rel=1e-13)
    fd = finite_difference_grads(net.params, mode.value, b.text, b.avr, b.y)
    for k in g:
        num = fd[k].astype(float)
        err = np.abs(g[k] - num) / np.maximum(np.maximum(np.abs(g[k]), np.abs(num)), 1e-8)
        assert err.max() <= 1e-4, k


# --------------------------------------------------------------------------
# training


def test_training_deterministic():
    data, cfg = toy_separable()
    tc = fn.NetTrainConfig(batch_size=3, epochs=5, seed=9)
    a, b = fn.train(data, cfg, tc), fn.train(data, cfg, tc)
    for k in a.params:
        assert a.params[k].tobytes() == b.params[k].tobytes()


def test_zero_momentum_is_plain_sgd():
    data, cfg = toy_separable()
    tc = fn.NetTrainConfig(batch_size=3, epochs=4, momentum=0.0, learning_rate=0.05, seed=2)
    got = fn.train(data, cfg, tc)

    rng = np.random.default_rng(tc.seed)
    net = fn.FusionNet.init(cfg, seed=int(rng.integers(2**63)), mode=tc.mode)
    for _ in range(tc.epochs):
        perm = rng.permutation(len(data))
        for s in range(0, len(data), tc.batch_size):
            _, g = fn.loss_and_grads(net, data.subset(perm[s : s + tc.batch_size]))
            for k in net.params:
                net.params[k] = net.params[k] - tc.learning_rate * g[k]
    for k in net.params:
        assert got.params[k].tobytes() == net.params[k].tobytes()


def test_separable_toy_reaches_full_accuracy():
    data, cfg = toy_separable()
    net = fn.train(data, cfg, fn.NetTrainConfig(batch_size=2, epochs=30))
    assert (net.predict(data.text, data.avr) == data.y).mean() == 1.0


def test_loss_mostly_decreasing():
    data = random_batch(4, fn.NetConfig(7, 16, 5), n=24)
    net = fn.train(data, fn.NetConfig(7, 16, 5), fn.NetTrainConfig(batch_size=128, epochs=60, learning_rate=0.01))
    drops = np.diff(net.history) <= 0
    assert drops.mean() >= 0.9


def test_zero_image_fusion_equals_text_only():
    data, cfg = toy_separable()
    a = fn.train(data, cfg, fn.NetTrainConfig(batch_size=4, epochs=10, mode=fn.Mode.FUSION))
    b = fn.train(data, cfg, fn.NetTrainConfig(batch_size=4, epochs=10, mode=fn.Mode.TEXT_ONLY))
    probe = np.random.default_rng(0).random((20, 10))
    zeros = np.zeros((20, 3))
    assert (a.predict(probe, zeros) == b.predict(probe, zeros)).all()


def test_degenerate_labels():
    data, cfg = toy_separable()
    with pytest.raises(ValueError):
        fn.train(fn.NetDataset(data.text, data.avr, np.ones(10, dtype=int)), cfg)


def test_config_invariants():
    for bad in ({"batch_size": 0}, {"epochs": 0}, {"momentum": 1.0}):
        with pytest.raises(ValueError):
            fn.NetTrainConfig(**bad)


def test_checkpoint_round_trip(tmp_path):
    data, cfg = toy_separable()
    net = fn.train(data, cfg, fn.NetTrainConfig(batch_size=4, epochs=3))
    fn.save_checkpoint(net, tmp_path / "n.net", vocab_hash="abc", extra={"lr": 0.01})
    back, header = fn.load_checkpoint(tmp_path / "n.net")
    assert header["vocab_hash"] == "abc" and header["extra"] == {"lr": 0.01}
    assert back.mode is net.mode and back.config == net.config and back.history == net.history
    for k in net.params:
        assert back.params[k].tobytes() == net.params[k].tobytes()
    fn.save_checkpoint(back, tmp_path / "m.net", vocab_hash="abc", extra={"lr": 0.01})
    assert fn.checkpoint_digest(tmp_path / "m.net") == fn.checkpoint_digest(tmp_path / "n.net")
