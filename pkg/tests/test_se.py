import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimopilot.correlation import ChannelStatistics, build_statistics
from mimopilot.estimation import estimation_stats
from mimopilot.se import (DL, UL, PowerAllocation, coupling, cross_traces, dl_sinr, evaluate,
                          network_min, prelog, se_from_sinr, ul_sinr, weighted_sum_se)
from mimopilot.topology import NetworkScenario, SystemConfig, generate_scenario

from conftest import make_stats, random_stats
from oracles import literal_dl_sinr, literal_ul_sinr


def sinrs(stats, pilots, p_ul, p_dl):
    c = coupling(stats, estimation_stats(stats, pilots), pilots)
    return c.sinr(UL, p_ul), c.sinr(DL, p_dl)


@pytest.mark.parametrize("seed, pilot_power", [(0, 1.0), (1, 1.0), (2, 4.0)])
def test_matches_literal_transcription(seed, pilot_power):
    rng = np.random.default_rng(seed)
    stats = random_stats(rng, 2, 2, 8, pilot_power=pilot_power, sigma2=0.05)
    pilots = np.array([[0, 1], [0, 1]]) if seed % 2 == 0 else np.array([[0, 1], [1, 0]])
    p_ul = rng.uniform(0.1, 2.0, size=(2, 2))
    p_dl = rng.uniform(0.1, 2.0, size=(2, 2))
    ul, dl = sinrs(stats, pilots, p_ul, p_dl)
    assert np.allclose(ul, literal_ul_sinr(stats, pilots, p_ul), rtol=1e-12, atol=0)
    assert np.allclose(dl, literal_dl_sinr(stats, pilots, p_dl), rtol=1e-12, atol=0)


def test_matches_literal_transcription_three_cells():
    rng = np.random.default_rng(5)
    stats = random_stats(rng, 3, 3, 4, sigma2=0.2)
    pilots = np.array([[0, 1, 2], [2, 1, 0], [1, 0, 2]])
    p = rng.uniform(0.1, 2.0, size=(3, 3))
    ul, dl = sinrs(stats, pilots, p, p[::-1])
    assert np.allclose(ul, literal_ul_sinr(stats, pilots, p), rtol=1e-12, atol=0)
    assert np.allclose(dl, literal_dl_sinr(stats, pilots, p[::-1]), rtol=1e-12, atol=0)


def test_scalar_single_user():
    beta, s2, p, E = 0.7, 0.2, 1.5, 1.0
    stats = ChannelStatistics(R=np.full((1, 1, 1, 1, 1), beta, dtype=complex), sigma2_ul=s2,
                              sigma2_dl=s2, tau_p=1)
    F = E ** 2 * beta + s2 * E
    expected = p * E ** 2 * beta ** 2 / F / (p * beta + s2)
    ul, dl = sinrs(stats, [[0]], [[p]], [[p]])
    assert ul[0, 0] == pytest.approx(expected, rel=1e-13)
    assert dl[0, 0] == pytest.approx(expected, rel=1e-13)


def test_zero_power_gives_zero_sinr(small):
    cfg, stats = small
    pilots = np.array([[0, 1], [1, 0]])
    est = estimation_stats(stats, pilots)
    powers = PowerAllocation.fixed(cfg)
    powers.p_ul[0, 1] = 0.0
    assert ul_sinr(0, 1, stats, est, pilots, powers) == 0.0
    assert ul_sinr(0, 0, stats, est, pilots, powers) > 0
    zero = PowerAllocation(p_ul=powers.p_ul, p_dl=np.zeros((2, 2)))
    assert dl_sinr(1, 0, stats, est, pilots, zero) == 0.0


def test_mirror_symmetric_network():
    rng = np.random.default_rng(3)
    base = random_stats(rng, 2, 1, 6)
    R = base.R.copy()
    # user of cell 1 sees BS 1 as user of cell 0 sees BS 0, and vice versa
    R[1, 0, 1] = R[0, 0, 0]
    R[1, 0, 0] = R[0, 0, 1]
    stats = ChannelStatistics(R=R, sigma2_ul=1.0, sigma2_dl=1.0, tau_p=1)
    ul, dl = sinrs(stats, np.array([[0], [0]]), np.ones((2, 1)), np.ones((2, 1)))
    assert dl[0, 0] == pytest.approx(dl[1, 0], rel=1e-12)
    assert ul[0, 0] == pytest.approx(ul[1, 0], rel=1e-12)


def test_se_from_sinr_examples():
    cfg = SystemConfig(K=4, tau_c=200)
    assert se_from_sinr(0.0, UL, cfg) == 0.0
    assert se_from_sinr(1.0, UL, cfg) == pytest.approx(0.49)
    assert prelog(DL, cfg) == pytest.approx(0.49)
    short = SystemConfig(K=4, L=4, tau_p=5, tau_c=6)
    assert se_from_sinr(3.0, UL, short) == pytest.approx(0.5 * (1 / 6) * 2)


def report_for(cfg, stats, pilots, w_ul=None, w_dl=None):
    est = estimation_stats(stats, pilots)
    return evaluate(stats, est, pilots, PowerAllocation.fixed(cfg), cfg, w_ul, w_dl)


def test_weighted_objective(small):
    cfg, stats = small
    pilots = np.array([[0, 1], [0, 1]])
    ul_only = report_for(cfg, stats, pilots, np.ones((2, 2)), np.zeros((2, 2)))
    assert np.array_equal(ul_only.f, ul_only.se_ul)
    both = report_for(cfg, stats, pilots)
    assert np.allclose(both.f, both.se_ul + both.se_dl, rtol=0, atol=0)
    assert weighted_sum_se(1, 0, both) == both.f[1, 0]
    assert network_min(both) == both.f.min() == both.min_f


def test_report_csv(small):
    cfg, stats = small
    rep = report_for(cfg, stats, np.array([[0, 1], [1, 0]]))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "cell,user,pilot,sinr_ul,sinr_dl,se_ul,se_dl,f"
    assert len(lines) == 5
    assert lines[2].startswith("1,2,2,")
    assert float(lines[4].split(",")[-1]) == rep.f[1, 1]


def test_report_bit_identical_after_serialization():
    cfg = SystemConfig(L=2, K=2, M=8)
    sc = generate_scenario(cfg, 11)
    pilots = np.array([[1, 0], [0, 1]])
    a = report_for(cfg, build_statistics(sc), pilots)
    sc2 = NetworkScenario.from_json(sc.to_json())
    b = report_for(sc2.config, build_statistics(sc2), np.array(pilots.tolist()))
    assert a.to_csv() == b.to_csv()


def test_coherent_term_zero_across_pilots(small):
    _, stats = small
    pilots = np.array([[0, 1], [1, 0]])
    est = estimation_stats(stats, pilots)
    c = coupling(stats, est, pilots)
    _, T2 = cross_traces(stats, est)
    # (0,0) and (1,0) use different pilots: only the noncoherent part couples them
    assert c.b_ul[0, 0, 1, 0] == pytest.approx(T2[0, 0, 1, 0] / est.trace_rfr[0, 0], rel=1e-14)
    assert c.b_ul[0, 0, 1, 1] > T2[0, 0, 1, 1] / est.trace_rfr[0, 0]


# property tests over random instances --------------------------------------

instance = st.tuples(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(1, 3),
                     st.integers(1, 6))


def _instance(seed, L, K, M):
    rng = np.random.default_rng(seed)
    stats = random_stats(rng, L, K, M, sigma2=10 ** rng.uniform(-2, 1))
    pilots = np.stack([rng.permutation(K) for _ in range(L)])
    c = coupling(stats, estimation_stats(stats, pilots), pilots)
    return rng, stats, pilots, c


@settings(max_examples=250, deadline=None)
@given(instance)
def test_sinr_increasing_in_own_power(args):
    rng, stats, pilots, c = _instance(*args)
    L, K = pilots.shape
    p = rng.uniform(0.1, 2.0, size=(L, K))
    l, k = rng.integers(L), rng.integers(K)
    for direction in (UL, DL):
        q = p.copy()
        q[l, k] *= 1.5
        assert c.sinr(direction, q)[l, k] > c.sinr(direction, p)[l, k]


@settings(max_examples=250, deadline=None)
@given(instance)
def test_silencing_an_interferer_never_hurts(args):
    rng, stats, pilots, c = _instance(*args)
    L, K = pilots.shape
    p = rng.uniform(0.1, 2.0, size=(L, K))
    l, k = rng.integers(L), rng.integers(K)
    q = p.copy()
    q[l, k] = 0.0
    for direction in (UL, DL):
        before, after = c.sinr(direction, p), c.sinr(direction, q)
        others = np.ones((L, K), dtype=bool)
        others[l, k] = False
        assert np.all(after[others] >= before[others] * (1 - 1e-13))


@settings(max_examples=250, deadline=None)
@given(instance, st.floats(1e-4, 1e4))
def test_sinr_scale_invariance(args, scale):
    rng, stats, pilots, c = _instance(*args)
    L, K = pilots.shape
    scaled = ChannelStatistics(R=scale * stats.R, sigma2_ul=scale * stats.sigma2_ul,
                               sigma2_dl=scale * stats.sigma2_dl, tau_p=stats.tau_p)
    c2 = coupling(scaled, estimation_stats(scaled, pilots), pilots)
    p = rng.uniform(0.1, 2.0, size=(L, K))
    for direction in (UL, DL):
        assert np.allclose(c.sinr(direction, p), c2.sinr(direction, p), rtol=1e-10, atol=0)


def test_batched_powers(small):
    cfg, stats = small
    pilots = np.array([[0, 1], [0, 1]])
    c = coupling(stats, estimation_stats(stats, pilots), pilots)
    p = np.random.default_rng(0).uniform(1, 200, size=(5, 2, 2))
    batch = c.sinr(UL, p)
    for b in range(5):
        assert np.allclose(batch[b], c.sinr(UL, p[b]), rtol=1e-14)


def test_power_allocation_check():
    cfg = SystemConfig(L=1, K=2)
    PowerAllocation.fixed(cfg).check(cfg)
    with pytest.raises(ValueError):
        PowerAllocation(p_ul=np.full((1, 2), 300.0), p_dl=np.zeros((1, 2))).check(cfg)
    with pytest.raises(ValueError):
        PowerAllocation(p_ul=np.zeros((1, 2)), p_dl=np.full((1, 2), 300.0)).check(cfg)
