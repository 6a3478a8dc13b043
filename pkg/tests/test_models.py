"""Network tests: shapes, distribution math, gradients vs finite differences,
checkpoint round-trips."""

import math

import numpy as np
import pytest

from quadparkour.models import NetworkShape, Policy, load_checkpoint, save_checkpoint
from quadparkour.numerics import (
    Adam,
    DimensionError,
    Tape,
    set_default_dtype,
    tensor,
    tsum,
)


@pytest.fixture
def float64_mode():
    set_default_dtype(np.float64)
    yield
    set_default_dtype(np.float32)


# ---------------------------------------------------------------- shapes

def test_code_lengths():
    p = Policy(seed=0)
    rng = np.random.default_rng(0)
    assert p.encode_elevation(rng.normal(size=(34, 31))).data.shape == (32,)
    assert p.encode_history(rng.normal(size=(10, 51))).data.shape == (20,)
    assert NetworkShape().actor_input == 51 + 32 + 20


def test_history_intermediate_is_30x10():
    p = Policy(seed=0)
    assert p.params["hist.reduce.w"].data.shape == (51, 30)
    assert p.shape.history_len == 10


def test_encoders_deterministic():
    p = Policy(seed=0)
    m = np.random.default_rng(1).normal(size=(34, 31))
    assert np.array_equal(p.encode_elevation(m).data, p.encode_elevation(m.copy()).data)


def test_history_shift_changes_encoding():
    p = Policy(seed=0)
    rng = np.random.default_rng(2)
    h0 = rng.normal(size=(10, 51))
    h1 = np.vstack([h0[1:], rng.normal(size=(1, 51))])
    d = p.encode_history(h0).data - p.encode_history(h1).data
    assert np.linalg.norm(d) > 1e-6


def test_bad_shapes_rejected():
    p = Policy(seed=0)
    rng = np.random.default_rng(3)
    with pytest.raises(DimensionError):
        p.encode_elevation(rng.normal(size=(33, 31)))
    with pytest.raises(DimensionError):
        p.encode_history(rng.normal(size=(9, 51)))
    with pytest.raises(DimensionError):
        p.value(rng.normal(size=50), rng.normal(size=32), rng.normal(size=20))


# ---------------------------------------------------------------- distribution

def _codes(p, rng):
    e = p.encode_elevation(rng.normal(size=p.shape.elev_shape)).data
    h = p.encode_history(rng.normal(size=(p.shape.history_len, p.shape.proprio_dim))).data
    return rng.normal(size=p.shape.proprio_dim), e, h


def test_tiny_std_sample_equals_mean():
    p = Policy(seed=0)
    p.params["log_std"].data = np.asarray(-40.0, dtype=np.float32)
    rng = np.random.default_rng(4)
    obs, e, h = _codes(p, rng)
    a, _ = p.act(obs, e, h, stochastic=True, rng=rng)
    mean, _ = p.act(obs, e, h, stochastic=False)
    assert np.allclose(a, mean, atol=1e-8)


def test_log_prob_of_mean_at_unit_std(float64_mode):
    p = Policy(seed=0)
    p.params["log_std"].data = np.asarray(0.0)
    rng = np.random.default_rng(5)
    obs, e, h = _codes(p, rng)
    _, lp = p.act(obs, e, h, stochastic=False)
    assert lp == pytest.approx(12 * (-0.5 * math.log(2 * math.pi)), abs=1e-9)
    assert lp == pytest.approx(-11.0276, abs=1e-3)


def test_sampling_reproducible():
    p = Policy(seed=0)
    rng = np.random.default_rng(6)
    obs, e, h = _codes(p, rng)
    a1, lp1 = p.act(obs, e, h, stochastic=True, rng=np.random.default_rng(9))
    a2, lp2 = p.act(obs, e, h, stochastic=True, rng=np.random.default_rng(9))
    assert np.array_equal(a1, a2) and lp1 == lp2


def test_zero_weight_value_is_zero():
    p = Policy(seed=0)
    for k, t in p.params.items():
        if k.startswith("critic."):
            t.data = np.zeros_like(t.data)
    rng = np.random.default_rng(7)
    obs, e, h = _codes(p, rng)
    assert float(p.value(obs, e, h).data) == 0.0


def test_clamp_std_cases():
    p = Policy(seed=0)
    p.params["log_std"].data = np.asarray(0.7, dtype=np.float32)
    p.clamp_std()
    assert float(p.params["log_std"].data) == 0.0
    assert p.std == 1.0
    p.params["log_std"].data = np.asarray(-1.2, dtype=np.float32)
    p.clamp_std()
    assert float(p.params["log_std"].data) == pytest.approx(-1.2)
    off = Policy(seed=0, std_cap_enabled=False)
    off.params["log_std"].data = np.asarray(0.7, dtype=np.float32)
    off.clamp_std()
    assert float(off.params["log_std"].data) == pytest.approx(0.7)


def test_entropy_closed_form_and_monotone(float64_mode):
    p = Policy(NetworkShape.miniature(), seed=0)
    rng = np.random.default_rng(8)
    n = p.shape.n_actions
    ents = []
    for ls in (-1.0, -0.3, 0.0, 0.5):
        p.params["log_std"].data = np.asarray(ls)
        obs = rng.normal(size=p.shape.proprio_dim)
        emap = rng.normal(size=p.shape.elev_shape)
        hist = rng.normal(size=(p.shape.history_len, p.shape.proprio_dim))
        _, ent, _ = p.evaluate_actions(obs[None], emap[None], hist[None],
                                       np.zeros((1, n)))
        expect = n * (0.5 * math.log(2 * math.pi * math.e) + ls)
        assert float(ent.data) == pytest.approx(expect, abs=1e-12)
        ents.append(float(ent.data))
    assert all(a < b for a, b in zip(ents, ents[1:]))


# ---------------------------------------------------------------- gradients

def _policy_fd(policy, loss_fn, rtol, atol, eps=1e-6):
    """Central differences over every parameter component."""
    with Tape() as tape:
        loss = loss_fn()
        tape.backward(loss)
    for name, p in policy.params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        for i in range(p.data.size):
            keep = p.data.flat[i]
            p.data.flat[i] = keep + eps
            up = float(loss_fn().data)
            p.data.flat[i] = keep - eps
            dn = float(loss_fn().data)
            p.data.flat[i] = keep
            fd = (up - dn) / (2 * eps)
            a = analytic.flat[i] if analytic.ndim else float(analytic)
            assert a == pytest.approx(fd, rel=rtol, abs=atol), (
                f"{name}[{i}]: analytic {a} vs fd {fd}")


def test_actor_end_to_end_gradients(float64_mode):
    p = Policy(NetworkShape.miniature(), seed=3)
    rng = np.random.default_rng(10)
    obs = rng.normal(size=(2, p.shape.proprio_dim))
    emap = rng.normal(size=(2,) + p.shape.elev_shape)
    hist = rng.normal(size=(2, p.shape.history_len, p.shape.proprio_dim))
    w = rng.normal(size=(2, p.shape.n_actions))   # fixed mixing weights

    def loss():
        e = p.encode_elevation(emap)
        h = p.encode_history(hist)
        mean = p.action_mean(obs, e, h)
        return tsum(mean * tensor(w))

    _policy_fd(p, loss, rtol=1e-4, atol=1e-8)


def test_critic_end_to_end_gradients(float64_mode):
    p = Policy(NetworkShape.miniature(), seed=4)
    rng = np.random.default_rng(11)
    obs = rng.normal(size=(2, p.shape.proprio_dim))
    emap = rng.normal(size=(2,) + p.shape.elev_shape)
    hist = rng.normal(size=(2, p.shape.history_len, p.shape.proprio_dim))

    def loss():
        e = p.encode_elevation(emap)
        h = p.encode_history(hist)
        return tsum(p.value(obs, e, h))

    _policy_fd(p, loss, rtol=1e-4, atol=1e-8)


def test_elevation_gradient_wrt_map():
    # 32-bit mode on the full-size encoder, coarse finite differences
    p = Policy(seed=5)
    rng = np.random.default_rng(12)
    base = rng.normal(size=(34, 31)).astype(np.float32)

    t = tensor(base.copy(), requires_grad=True)
    with Tape() as tape:
        loss = tsum(p.encode_elevation(t))
        tape.backward(loss)
    analytic = t.grad.copy()

    eps = 1e-2
    idx = [(0, 0), (5, 7), (17, 15), (33, 30), (20, 3)]
    for (i, j) in idx:
        for sign in (1.0, -1.0):
            m = base.copy()
            m[i, j] += sign * eps
            val = float(tsum(p.encode_elevation(m)).data)
            if sign > 0:
                up = val
            else:
                dn = val
        fd = (up - dn) / (2 * eps)
        assert analytic[i, j] == pytest.approx(fd, rel=1e-2, abs=1e-3)


def test_log_prob_gradient_through_evaluate(float64_mode):
    p = Policy(NetworkShape.miniature(), seed=6)
    rng = np.random.default_rng(13)
    obs = rng.normal(size=(3, p.shape.proprio_dim))
    emap = rng.normal(size=(3,) + p.shape.elev_shape)
    hist = rng.normal(size=(3, p.shape.history_len, p.shape.proprio_dim))
    acts = rng.normal(size=(3, p.shape.n_actions))

    def loss():
        lp, ent, v = p.evaluate_actions(obs, emap, hist, acts)
        return tsum(lp) + ent * 0.01 + tsum(v * v)

    _policy_fd(p, loss, rtol=1e-4, atol=1e-8)


# ---------------------------------------------------------------- checkpoints

def test_checkpoint_round_trip(tmp_path):
    p = Policy(NetworkShape.miniature(), seed=7)
    opt = Adam(p.params, lr=1e-3)
    rng = np.random.default_rng(14)
    for t in p.params.values():                 # fake one update
        t.grad = rng.normal(size=t.data.shape).astype(t.data.dtype)
    opt.step()

    path = tmp_path / "ck.bin"
    save_checkpoint(path, p, config_hash="abc123", optimizer=opt)

    q = Policy(NetworkShape.miniature(), seed=99)
    opt2 = Adam(q.params, lr=1e-3)
    stored = load_checkpoint(path, q, optimizer=opt2)
    assert stored == "abc123"
    for k in p.params:
        assert np.array_equal(p.params[k].data, q.params[k].data), k
    s1, s2 = opt.state_dict(), opt2.state_dict()
    assert s1["t"] == s2["t"]
    for k in s1["m"]:
        assert np.array_equal(s1["m"][k], s2["m"][k])
        assert np.array_equal(s1["v"][k], s2["v"][k])


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(path, Policy(NetworkShape.miniature(), seed=0))


def test_checkpoint_shape_mismatch(tmp_path):
    p = Policy(NetworkShape.miniature(), seed=0)
    path = tmp_path / "mini.bin"
    save_checkpoint(path, p)
    with pytest.raises(ValueError):
        load_checkpoint(path, Policy(seed=0))
