"""Counter-mode SplitMix64 streams, seed splitting and core sampling."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorrp import rng
from tensorrp.rng import CoreDistribution, Stream, sample_mpo, sample_tt, split_seed

MASK = (1 << 64) - 1


def reference_splitmix64(seed: int, n: int) -> list[int]:
    """Textbook sequential SplitMix64 on Python integers."""
    out, state = [], seed
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_known_splitmix64_outputs_for_seed_zero():
    words = Stream(0).words(3)
    assert [int(w) for w in words] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


@pytest.mark.parametrize("seed", [0, 1, 42, 2**63, MASK])
def test_stream_matches_sequential_reference(seed):
    assert [int(w) for w in Stream(seed).words(50)] == reference_splitmix64(seed, 50)


def test_stream_chunks_continue_the_sequence():
    s = Stream(9)
    joined = np.concatenate([s.words(3), s.words(7)])
    np.testing.assert_array_equal(joined, Stream(9).words(10))


def test_seed_range_is_checked():
    with pytest.raises(ValueError):
        Stream(-1)
    with pytest.raises(ValueError):
        Stream(2**64)
    with pytest.raises(ValueError):
        split_seed(0, -1)


def test_split_seed_is_deterministic():
    assert split_seed(123, 7) == split_seed(123, 7)
    assert Stream(5).spawn(3).seed == split_seed(5, 3)


def test_split_seed_children_are_distinct():
    children = rng.split_seeds(2024, np.arange(10_000))
    assert len(set(children.tolist())) == 10_000
    assert all(int(children[i]) == split_seed(2024, i) for i in (0, 1, 9999))


def test_children_do_not_share_first_draws():
    first = {int(Stream(split_seed(0, i)).words(1)[0]) for i in range(101)}
    assert len(first) == 101


def test_uniforms_stay_inside_open_interval():
    words = np.array([0, MASK, 1 << 63], dtype=np.uint64)
    u = rng.words_to_uniform(words)
    assert np.all((u > 0.0) & (u < 1.0))
    assert np.all(np.isfinite(Stream(0).normal(1000)))


def test_rademacher_sample_support():
    t = sample_tt(CoreDistribution.RADEMACHER, (3, 4, 2), 3, seed=11)
    for core in t.cores:
        assert set(np.unique(core)) <= {-1.0, 1.0}
        assert np.all(core * core == 1.0)
    m = sample_mpo(CoreDistribution.RADEMACHER, (3, 2), (2, 2), 2, seed=11)
    assert all(np.all(c * c == 1.0) for c in m.cores)


@pytest.mark.parametrize("dist", list(CoreDistribution))
def test_sampling_is_bitwise_reproducible(dist):
    a = sample_tt(dist, (3, 4, 2), 2, seed=77)
    b = sample_tt(dist, (3, 4, 2), 2, seed=77)
    assert all(np.array_equal(x, y) for x, y in zip(a.cores, b.cores))
    c = sample_mpo(dist, (2, 3), (4, 1), 3, seed=77)
    d = sample_mpo(dist, (2, 3), (4, 1), 3, seed=77)
    assert all(np.array_equal(x, y) for x, y in zip(c.cores, d.cores))
    e = sample_tt(dist, (3, 4, 2), 2, seed=78)
    assert not np.array_equal(a.cores[0], e.cores[0])


def test_cores_fill_row_major_in_order():
    t = sample_tt(CoreDistribution.GAUSSIAN, (3, 2, 4), 2, seed=5)
    flat = np.concatenate([c.ravel() for c in t.cores])
    np.testing.assert_array_equal(flat, Stream(5).normal(flat.size))
    m = sample_mpo(CoreDistribution.RADEMACHER, (2, 3), (3, 1), 2, seed=5)
    assert m.cores[0].shape == (1, 2, 3, 2) and m.cores[1].shape == (2, 3, 1, 1)
    flat = np.concatenate([c.ravel() for c in m.cores])
    np.testing.assert_array_equal(flat, Stream(5).rademacher(flat.size))


def test_gaussian_moments_at_1e5():
    n = 10**5
    values = np.concatenate([c.ravel() for c in sample_tt(CoreDistribution.GAUSSIAN, (50,) * 3, 45, seed=3).cores])
    values = values[:n]
    assert values.size == n
    assert abs(values.mean()) < 4 / np.sqrt(n)
    assert abs(values.var() - 1.0) < 0.05


def test_mpo_moments_at_1e5():
    m = sample_mpo(CoreDistribution.GAUSSIAN, (10,) * 3, (5,) * 3, 45, seed=4)
    values = np.concatenate([c.ravel() for c in m.cores])
    assert values.size >= 10**5
    n = values.size
    assert abs(values.mean()) < 4 / np.sqrt(n)
    assert abs(values.var() - 1.0) < 0.05


def test_rademacher_moments_at_1e5():
    values = Stream(8).rademacher(10**5)
    assert abs(values.mean()) < 4 / np.sqrt(10**5)
    assert values.var() == pytest.approx(1.0, abs=1e-3)


@settings(max_examples=50)
@given(seed=st.integers(0, MASK), i=st.integers(0, 2**40), j=st.integers(0, 2**40))
def test_split_seed_is_injective_in_index(seed, i, j):
    assert (split_seed(seed, i) == split_seed(seed, j)) == (i == j)


@settings(max_examples=30)
@given(seed=st.integers(0, MASK), start=st.integers(0, 1000), n=st.integers(1, 50))
def test_words_are_addressable_by_counter(seed, start, n):
    full = rng.raw_words(seed, start + n)
    np.testing.assert_array_equal(rng.raw_words(seed, n, start), full[start:])
