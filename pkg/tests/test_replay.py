import numpy as np
import pytest
from scipy import stats

from ottalab import replay as rp
from ottalab.errors import ConfigurationError, UsageError


def brute_lambda(r, v, g, lam):
    """Forward expansion: V_t = sum_n weights over n-step returns plus the tail."""
    H = len(r)
    out = []
    for t in range(H):
        total = 0.0
        # n-step returns G_t^(n) for n = 1 .. H-t, weight (1-lam) lam^(n-1); the last one takes the rest
        for n in range(1, H - t + 1):
            disc, ret = 1.0, 0.0
            for k in range(t, t + n):
                ret += disc * r[k]
                disc *= g[k]
            ret += disc * v[t + n]
            w = (1 - lam) * lam ** (n - 1) if n < H - t else lam ** (n - 1)
            total += w * ret
        out.append(total)
    return np.array(out + [v[H]])


def test_cr_priority_examples_and_monotonicity():
    assert rp.cr_priority(2, 0.0, _cr(1.0, 0.5, 0.0, 1.0)) == 0.25
    d = rp.CRParams()
    assert rp.cr_priority(0, 0.3, d) == d.c + (0.3 + d.eps) ** d.alpha
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        # keep c * beta**nu well above one ulp of the loss term so strictness is observable in floats
        prm = _cr(rng.uniform(0.1, 10), rng.uniform(0.3, 0.95), rng.uniform(0, 1), rng.uniform(0.1, 2))
        nu, loss = int(rng.integers(0, 10)), rng.normal()
        base = rp.cr_priority(nu, loss, prm)
        assert rp.cr_priority(nu + 1, loss, prm) < base
        assert rp.cr_priority(nu, abs(loss) + 0.5, prm) > rp.cr_priority(nu, abs(loss), prm)


def _cr(c, beta, eps, alpha):
    return rp.CRParams(c=c, beta=beta, eps=eps, alpha=alpha)


def test_cr_params_validation():
    with pytest.raises(ConfigurationError):
        rp.CRParams(beta=1.0)


def test_per_iper_examples():
    assert np.allclose(rp.per_priority([2, 0]), [2 / 3, 1 / 3], atol=1e-15)
    assert np.allclose(rp.iper_priority([2, 0]), [1 / 3, 2 / 3], atol=1e-15)
    assert np.array_equal(rp.per_priority([0.1, -1, 0.5]), np.full(3, 1 / 3))
    assert np.array_equal(rp.iper_priority([0.1, -1, 0.5]), np.full(3, 1 / 3))
    with pytest.raises(UsageError):
        rp.per_priority([])


def test_per_matches_naive_and_iper_reverses_rank():
    rng = np.random.default_rng(1)
    for _ in range(500):
        d = rng.normal(scale=3, size=int(rng.integers(1, 30)))
        alpha = rng.uniform(0.2, 2)
        naive = [max(abs(x) ** alpha, 1.0) for x in d]
        s = sum(naive)
        assert np.max(np.abs(rp.per_priority(d, alpha) - np.array(naive) / s)) < 1e-12
        assert abs(rp.per_priority(d, alpha).sum() - 1) < 1e-9
        assert abs(rp.iper_priority(d, alpha).sum() - 1) < 1e-9
        big = rng.uniform(1.5, 10, size=8) * rng.choice([-1, 1], size=8)
        assert np.array_equal(np.argsort(rp.per_priority(big, alpha)), np.argsort(rp.iper_priority(big, alpha))[::-1])


def test_huber():
    assert rp.huber(0.5) == 0.125 and rp.huber(2.0) == 1.5 and rp.huber(-2.0) == 1.5
    assert rp.huber(1.0) == 0.5 == abs(1.0) - 0.5
    assert rp.huber_grad(1.0) == 1.0 and rp.huber_grad(np.nextafter(1.0, 2)) == 1.0
    assert np.all(np.abs(rp.huber_grad(np.linspace(-5, 5, 101))) <= 1)


def test_lambda_return_limits():
    r, v, g = [1.0, 2.0, 3.0], [0.5, 0.1, 0.2, 4.0], 0.9
    one_step = rp.lambda_return(r, v, g, 0.0)
    assert np.allclose(one_step[:3], [r[t] + g * v[t + 1] for t in range(3)], atol=1e-15)
    mc = rp.lambda_return(r, v, g, 1.0)
    assert abs(mc[0] - (1 + 0.9 * 2 + 0.81 * 3 + 0.729 * 4.0)) < 1e-12
    assert mc[3] == 4.0
    with pytest.raises(UsageError):
        rp.lambda_return(r, v[:3], g, 0.5)
    with pytest.raises(UsageError):
        rp.lambda_return(r, v, [0.9, 0.9], 0.5)


def test_lambda_return_matches_expansion():
    rng = np.random.default_rng(2)
    for _ in range(200):
        H = int(rng.integers(1, 9))
        r, v = rng.normal(size=H), rng.normal(size=H + 1)
        g, lam = rng.uniform(0, 1, size=H), rng.uniform()
        assert np.max(np.abs(rp.lambda_return(r, v, g, lam) - brute_lambda(r, v, g, lam))) < 1e-12


def test_td_errors():
    assert np.array_equal(rp.td_errors([1, 2], [1, 2]), [0, 0])
    assert np.allclose(rp.td_errors([1, 2, 3], [1.5, 2.5, 3.5]), 0.5)
    # hand-traced 3-step: rewards 1, 0, 1; values 0.5, 0.2, 0.4, 1.0; gamma 1; lambda 0
    R = rp.lambda_return([1, 0, 1], [0.5, 0.2, 0.4, 1.0], 1.0, 0.0)[:3]
    assert np.allclose(rp.td_errors(R, [0.5, 0.2, 0.4]), [0.5 - 1.2, 0.2 - 0.4, 0.4 - 2.0])
    with pytest.raises(UsageError):
        rp.td_errors([1], [1, 2])


def test_dops_examples():
    d = [5, 0.1, 3, 2, 0.2, 4]
    actor, critic = rp.dops_subsample(d, 0.5)
    assert len(actor) == len(critic) == 4
    assert len(set(actor) & set(critic)) == 2
    a1, c1 = rp.dops_subsample(d, 1.0)
    assert list(a1) == list(c1) == list(range(6))
    a0, c0 = rp.dops_subsample(d, 0.0)
    assert set(a0).isdisjoint(c0) and set(a0) | set(c0) == set(range(6))
    with pytest.raises(ConfigurationError):
        rp.dops_subsample(d, 1.5)


def test_dops_actor_priorities_below_critic():
    rng = np.random.default_rng(3)
    for _ in range(200):
        d = rng.normal(scale=3, size=int(rng.integers(4, 65)))
        actor, critic = rp.dops_subsample(d, rng.uniform())
        pa = np.sort(rp.per_priority(d)[actor])
        pc = np.sort(rp.per_priority(d)[critic])
        assert np.all(pa <= pc)


def test_sumtree_examples():
    t = rp.SumTree(2)
    t.update(0, 1.0)
    t.update(1, 3.0)
    assert rp.sumtree_sample(t, 0.5) == 0 and rp.sumtree_sample(t, 2.0) == 1
    assert rp.sumtree_sample(t, 0.999999) == 0 and rp.sumtree_sample(t, 1.0) == 1
    with pytest.raises(UsageError):
        rp.SumTree(4).sample(0.0)
    with pytest.raises(UsageError):
        t.update(0, -1.0)


def test_sumtree_update_touches_only_its_path():
    t = rp.SumTree(16)
    rng = np.random.default_rng(0)
    for i in range(16):
        t.update(i, float(rng.random()))
    before = t.tree.copy()
    t.update(5, 9.0)
    changed = np.flatnonzero(before != t.tree)
    assert len(changed) == int(np.log2(t.size)) + 1  # leaf plus its ancestors
    assert abs(t.total - t.leaves().sum()) < 1e-12


def test_sumtree_skips_zero_leaves():
    t = rp.SumTree(5)
    for i, p in enumerate([0.0, 2.0, 0.0, 0.0, 1.0]):
        t.update(i, p)
    rng = np.random.default_rng(0)
    draws = {t.sample(u) for u in rng.random(2000) * t.total}
    assert draws == {1, 4}


def test_replay_buffer_mixture_matches_analytic():
    rng = np.random.default_rng(4)
    buf = rp.ReplayBuffer(32)
    for i in range(20):
        buf.add(i, float(rng.exponential()))
    # give items distinct priorities and freeze visits for a stationary distribution
    buf.update_losses(range(20), rng.exponential(size=20) * 50)
    probs = buf.probabilities()
    assert abs(probs.sum() - 1) < 1e-9
    counts = np.bincount(buf.draw(50_000, rng), minlength=20)
    assert stats.chisquare(counts, probs * 50_000).pvalue > 0.01


def test_replay_buffer_visits_lower_priority_and_ring_wraps():
    buf = rp.ReplayBuffer(4, uniform_fraction=0.0, new_item_priority="count")
    for i in range(6):
        buf.add(i)
    assert len(buf) == 4 and buf.items[:2] == [4, 5]
    p0 = buf.tree[0]
    buf.visits[0] += 1
    buf._refresh(0)
    assert buf.tree[0] < p0
    with pytest.raises(ConfigurationError):
        rp.ReplayBuffer(4, new_item_priority="min")


def test_bench_reports_rates():
    out = rp.bench(n_items=256, n_ops=512, batch=32)
    assert out["sample_per_s"] > 0 and out["update_per_s"] > 0
