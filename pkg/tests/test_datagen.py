import numpy as np
import pytest

from ucreduce import datagen, grid, mip, scuc
from ucreduce.datagen import NoiseParams
from ucreduce.errors import AttemptCapExceeded, ParseError, TooFewSamples


@pytest.fixture(scope="module")
def small_dataset(six_bus):
    return datagen.generate_dataset(six_bus, 5, NoiseParams(master_seed=11))


def test_zero_noise_identity(six_bus):
    base = grid.base_profile(six_bus)
    out = datagen.perturb_profile(base, NoiseParams(0.0, 0.0, 3), 17)
    assert out == base


def test_zero_entries_stay_zero(six_bus):
    base = grid.base_profile(six_bus)
    out = datagen.perturb_profile(base, NoiseParams(), 4)
    assert np.all(out.values[base.values == 0] == 0)
    assert np.all(out.values >= 0)


def test_perturbation_reproducible_in_any_order(six_bus):
    base = grid.base_profile(six_bus)
    p = NoiseParams(master_seed=9)
    forward = [datagen.perturb_profile(base, p, i) for i in range(5)]
    backward = [datagen.perturb_profile(base, p, i) for i in reversed(range(5))][::-1]
    assert forward == backward
    assert forward[0] != forward[1]
    assert datagen.perturb_profile(base, NoiseParams(master_seed=10), 0) != forward[0]


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        NoiseParams(global_sigma=-0.1)


def test_generated_samples_verify(six_bus, small_dataset):
    ds = small_dataset
    assert len(ds) == 5 and ds.system_hash == six_bus.digest()
    assert [s.sample_id for s in ds.samples] == sorted(s.sample_id for s in ds.samples)
    for s in ds.samples:
        assert set(np.unique(s.commitment)) <= {0, 1}
        assert s.demand == datagen.perturb_profile(grid.base_profile(six_bus), ds.params, s.sample_id)
        p = scuc.build(six_bus, s.demand)
        assert mip.fix_and_solve(p, s.commitment).optimal
        again = mip.solve_mip(p)
        assert abs(again.objective - s.objective) <= 2 * 0.01 * abs(again.objective)


def test_single_zero_noise_sample_is_base_solution(six_bus):
    ds = datagen.generate_dataset(six_bus, 1, NoiseParams(0.0, 0.0, 1))
    p = scuc.build(six_bus, grid.base_profile(six_bus))
    ref = mip.solve_mip(p)
    assert ds.samples[0].objective == ref.objective
    assert np.array_equal(ds.samples[0].commitment, p.commitment(ref.incumbent.values))


def test_wild_noise_rejects_or_raises(six_bus):
    params = NoiseParams(global_sigma=10.0, nodal_sigma=0.0, master_seed=3)
    try:
        ds = datagen.generate_dataset(six_bus, 2, params)
    except AttemptCapExceeded as exc:
        assert exc.feasible_count < 2
    else:
        assert len(ds) == 2 and ds.infeasible_ids
        assert not set(ds.infeasible_ids) & {s.sample_id for s in ds.samples}


def test_workers_do_not_change_results(six_bus, small_dataset):
    par = datagen.generate_dataset(six_bus, 5, NoiseParams(master_seed=11), workers=2)
    for a, b in zip(small_dataset.samples, par.samples):
        assert a.sample_id == b.sample_id and a.demand == b.demand
        assert np.array_equal(a.commitment, b.commitment) and a.objective == b.objective


def _fake(n):
    z = grid.DemandProfile(np.zeros((1, 1)))
    return datagen.Dataset([datagen.Sample(i, z, np.zeros((1, 1), dtype=np.int8), 0.0, 0.0)
                            for i in range(n)], "h")


@pytest.mark.parametrize("n, n_train", [(10, 8), (1446, 1157), (60, 48), (2, 2)])
def test_split_sizes(n, n_train):
    ds = datagen.shuffle_split(_fake(n), 0.8, seed=4)
    train, test = ds.split
    assert len(train) == n_train and len(test) == n - n_train
    assert set(train).isdisjoint(test) and set(train) | set(test) == set(range(n))


def test_split_deterministic():
    a = datagen.shuffle_split(_fake(30), 0.8, 7).split
    b = datagen.shuffle_split(_fake(30), 0.8, 7).split
    c = datagen.shuffle_split(_fake(30), 0.8, 8).split
    assert a == b and a != c


def test_split_too_few():
    with pytest.raises(TooFewSamples):
        datagen.shuffle_split(_fake(1))


def test_dataset_round_trip(small_dataset, tmp_path):
    ds = datagen.shuffle_split(small_dataset, 0.8, 1)
    datagen.write_dataset(ds, tmp_path / "a")
    back = datagen.read_dataset(tmp_path / "a")
    datagen.write_dataset(back, tmp_path / "b")
    for name in ("samples.jsonl", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert back.split == ds.split and back.params == ds.params
    assert [s.demand for s in back.samples] == [s.demand for s in ds.samples]


def test_malformed_jsonl(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text('{"sample_id": 1}\n')
    with pytest.raises(ParseError, match=":1:"):
        datagen.read_samples(path)
