from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from rclab import environment as env_mod
from rclab.environment import (
    Environment,
    alpha_threshold,
    bond_count,
    box_min_conductance,
    describe,
    environment_from_values,
    load,
    min_conductance_event,
    min_conductance_statistic,
    modify,
    plant,
    sample_environment,
    save,
)
from rclab.exceptions import (
    BudgetError,
    EnvironmentFileError,
    FormatVersionError,
    ParameterError,
    StorageError,
)
from rclab.models.environment import ConductanceLaw
from rclab.models.lattice import Bond, LatticePoint

P = LatticePoint.of


def _saved(tmp_path: Path, env: Environment) -> Path:
    path = tmp_path / "env.rclb"
    save(env, path)
    return path


class TestConductanceLaw:
    def test_parse_variants(self) -> None:
        assert ConductanceLaw.parse("polytail", 2.0) == ConductanceLaw.poly_tail(2.0)
        assert ConductanceLaw.parse("sitemin:0.5") == ConductanceLaw.site_min(0.5)
        assert ConductanceLaw.parse("constant") == ConductanceLaw.constant(1.0)
        assert ConductanceLaw.parse("Constant:0.25") == ConductanceLaw.constant(0.25)

    def test_parse_errors(self) -> None:
        with pytest.raises(ParameterError, match="needs a gamma"):
            ConductanceLaw.parse("polytail")
        with pytest.raises(ParameterError):
            ConductanceLaw.parse("polytail:abc")
        with pytest.raises(ParameterError):
            ConductanceLaw.parse("gaussian")

    def test_invalid_parameters(self) -> None:
        with pytest.raises(ParameterError):
            ConductanceLaw.poly_tail(0.0)
        with pytest.raises(ParameterError):
            ConductanceLaw.constant(1.5)

    def test_cdf(self) -> None:
        assert ConductanceLaw.poly_tail(2.0).cdf(0.5) == pytest.approx(0.25)
        assert ConductanceLaw.site_min(1.0).cdf(0.5) == pytest.approx(0.75)
        assert ConductanceLaw.constant(0.5).cdf(0.4) == 0.0
        assert ConductanceLaw.constant(0.5).cdf(0.5) == 1.0

    def test_tag_round_trip(self) -> None:
        law = ConductanceLaw.site_min(3.0)
        assert ConductanceLaw.from_tag(law.tag, law.parameter) == law

    def test_label(self) -> None:
        assert ConductanceLaw.poly_tail(0.5).label() == "PolyTail(gamma=0.5)"
        assert ConductanceLaw.field().label() == "Field"


class TestSampling:
    def test_bond_count(self) -> None:
        assert bond_count(2, 1) == 12
        env = sample_environment(2, 3, ConductanceLaw.poly_tail(1.0), 0)
        assert env.conductances().size == bond_count(2, 3)

    def test_reproducible_from_seed(self) -> None:
        law = ConductanceLaw.poly_tail(0.7)
        a = sample_environment(2, 8, law, 7)
        b = sample_environment(2, 8, law, 7)
        c = sample_environment(2, 8, law, 8)
        assert a == b
        assert a != c

    def test_threads_do_not_change_the_field(self) -> None:
        law = ConductanceLaw.poly_tail(1.0)
        assert sample_environment(2, 16, law, 3, threads=1) == sample_environment(2, 16, law, 3, threads=4)

    def test_values_in_unit_interval(self) -> None:
        values = sample_environment(3, 4, ConductanceLaw.site_min(0.3), 1).conductances()
        assert np.all(values > 0)
        assert np.all(values <= 1)

    def test_constant_law(self) -> None:
        env = sample_environment(2, 2, ConductanceLaw.constant(0.5), 0)
        assert np.all(env.conductances() == 0.5)

    @pytest.mark.parametrize("gamma", [0.1, 1.0, 45.0])
    def test_power_tail_matches_law(self, gamma: float) -> None:
        env = sample_environment(1, 500_000, ConductanceLaw.poly_tail(gamma), 12345)
        values = env.conductances()
        assert values.size == 1_000_000
        result = stats.kstest(values, lambda a: np.clip(a, 0.0, 1.0) ** gamma)
        assert result.statistic < 0.002

    def test_bad_parameters(self) -> None:
        with pytest.raises(ParameterError):
            sample_environment(0, 3, ConductanceLaw.poly_tail(1.0), 0)
        with pytest.raises(ParameterError):
            sample_environment(2, 0, ConductanceLaw.poly_tail(1.0), 0)
        with pytest.raises(ParameterError):
            sample_environment(2, 3, ConductanceLaw.field(), 0)

    @pytest.mark.parametrize("seed", [-1, 2 ** 64])
    def test_seed_out_of_range(self, seed: int) -> None:
        with pytest.raises(ParameterError, match="Seed must lie"):
            sample_environment(2, 3, ConductanceLaw.poly_tail(1.0), seed)
        with pytest.raises(ParameterError, match="Seed must lie"):
            Environment(1, 1, ConductanceLaw.constant(), seed, np.full((3, 1), 1.0))

    def test_largest_seed(self) -> None:
        assert sample_environment(1, 2, ConductanceLaw.poly_tail(1.0), 2 ** 64 - 1).seed == 2 ** 64 - 1

    def test_site_min_marginal(self) -> None:
        values = sample_environment(2, 300, ConductanceLaw.site_min(0.5), 8).conductances()
        law = ConductanceLaw.site_min(0.5)
        for a in (0.01, 0.1, 0.5):
            assert law.cdf(a) == pytest.approx(1 - (1 - a ** 0.5) ** 2)
            assert abs(float(np.mean(values <= a)) - law.cdf(a)) < 4 / np.sqrt(values.size)

    def test_memory_budget(self) -> None:
        with pytest.raises(BudgetError, match="bytes"):
            sample_environment(3, 50, ConductanceLaw.poly_tail(1.0), 0, max_bytes=1 << 20)


class TestEnvironmentArrays:
    def test_pi_and_transition_cdf(self) -> None:
        env = sample_environment(2, 3, ConductanceLaw.constant(1.0), 0)
        assert env.pi_array[3, 3] == 4.0
        # corner sites keep only their inward bonds
        assert env.pi_array[0, 0] == 2.0
        np.testing.assert_allclose(env.step_cdf[3, 3], [0.25, 0.5, 0.75, 1.0])

    def test_conductance_lookup(self) -> None:
        bond = Bond.between((0, 0), (0, 1))
        env = environment_from_values(2, 2, {bond: 0.3})
        assert env.conductance(bond) == pytest.approx(0.3)
        assert env.conductance_between(P(0, 1), P(0, 0)) == pytest.approx(0.3)
        assert env.conductance(Bond.between((1, 0), (2, 0))) == 1.0

    def test_conductance_outside_raises(self) -> None:
        env = environment_from_values(2, 2, {})
        with pytest.raises(StorageError):
            env.conductance(Bond.between((2, 0), (3, 0)))

    def test_invalid_values_rejected(self) -> None:
        forward = np.full((3, 3, 2), 2.0)
        with pytest.raises(ParameterError, match=r"\(0, 1\]"):
            Environment(2, 1, ConductanceLaw.field(), 0, forward)

    def test_wrong_shape_rejected(self) -> None:
        with pytest.raises(ParameterError, match="shape"):
            Environment(2, 1, ConductanceLaw.field(), 0, np.ones((3, 3, 3)))

    def test_plant_overrides(self) -> None:
        base = sample_environment(2, 4, ConductanceLaw.poly_tail(1.0), 2)
        bond = Bond.between((1, 1), (1, 2))
        planted = plant(base, {bond: 0.125})
        assert planted.conductance(bond) == 0.125
        assert planted.law.kind == "field"
        with pytest.raises(ParameterError):
            plant(base, {bond: 0.0})

    def test_describe(self) -> None:
        info = describe(sample_environment(2, 2, ConductanceLaw.constant(0.5), 4))
        assert info["bond_count"] == 40
        assert info["min"] == info["max"] == 0.5
        assert info["generator"] == "philox4x64"


class TestModifiedEnvironment:
    def test_reset_outside_protected_box(self) -> None:
        base = sample_environment(2, 6, ConductanceLaw.poly_tail(1.0), 5)
        modenv = modify(base, 2)
        inside = Bond.between((2, 3), (3, 3))
        outside = Bond.between((3, 3), (4, 3))
        assert modenv.conductance(inside) == base.conductance(inside)
        assert modenv.conductance(outside) == 1.0
        assert modenv.conductance(Bond.between((40, 0), (41, 0))) == 1.0

    def test_materialize_matches_lookup(self) -> None:
        base = sample_environment(2, 5, ConductanceLaw.poly_tail(2.0), 6)
        modenv = modify(base, 1)
        env = modenv.materialize(7)
        for p in env.box.points():
            for q in p.neighbors():
                if env.contains(q):
                    bond = Bond(p, q)
                    assert env.conductance(bond) == modenv.conductance(bond)

    def test_modify_needs_room(self) -> None:
        base = sample_environment(2, 3, ConductanceLaw.poly_tail(1.0), 0)
        with pytest.raises(StorageError):
            modify(base, 3)

    def test_modify_twice_keeps_smaller_box(self) -> None:
        base = sample_environment(2, 6, ConductanceLaw.poly_tail(1.0), 0)
        assert modify(modify(base, 3), 1).N == 1


class TestMinimumConductance:
    def test_box_minimum_ignores_outside(self) -> None:
        env = environment_from_values(2, 6, {
            Bond.between((1, 0), (2, 0)): 0.25,
            Bond.between((5, 0), (6, 0)): 0.01,
        })
        assert box_min_conductance(env, 2) == 0.25
        assert box_min_conductance(env, 6) == 0.01

    def test_statistic(self) -> None:
        env = environment_from_values(2, 5, {Bond.between((0, 0), (1, 0)): 0.25})
        assert min_conductance_statistic(env, 4) == pytest.approx(-1.0)

    def test_statistic_needs_n_two(self) -> None:
        env = environment_from_values(2, 3, {})
        with pytest.raises(ParameterError):
            min_conductance_statistic(env, 1)

    def test_alpha_threshold(self) -> None:
        assert alpha_threshold(2, 1.0, 0.1, 10) == pytest.approx(10 ** -2.1)

    def test_event(self) -> None:
        env = environment_from_values(2, 4, {Bond.between((0, 0), (1, 0)): 0.5})
        assert min_conductance_event(env, 2, 0.1, gamma=1.0)
        weak = environment_from_values(2, 4, {Bond.between((0, 0), (1, 0)): 1e-4})
        assert not min_conductance_event(weak, 2, 0.1, gamma=1.0)

    @pytest.mark.slow
    def test_event_frequency_grows_with_N(self) -> None:
        Ns = (50, 100, 200, 400)
        counts = dict.fromkeys(Ns, 0)
        for seed in range(300):
            env = sample_environment(2, 401, ConductanceLaw.poly_tail(1.0), seed)
            for N in Ns:
                counts[N] += min_conductance_event(env, N, 0.5)
        frequencies = [counts[N] / 300 for N in Ns]
        assert frequencies == sorted(frequencies)
        assert frequencies[-1] > frequencies[0]

    def test_event_needs_gamma(self) -> None:
        env = environment_from_values(2, 4, {})
        with pytest.raises(ParameterError):
            min_conductance_event(env, 2, 0.1)


class TestStorage:
    def test_round_trip(self, tmp_path: Path) -> None:
        env = sample_environment(2, 5, ConductanceLaw.poly_tail(1.5), 99)
        loaded = load(_saved(tmp_path, env))
        assert loaded == env
        assert loaded.seed == 99
        assert loaded.law == ConductanceLaw.poly_tail(1.5)

    def test_file_size(self, tmp_path: Path) -> None:
        env = sample_environment(2, 3, ConductanceLaw.constant(1.0), 0)
        path = _saved(tmp_path, env)
        assert path.stat().st_size == env_mod._HEADER.size + 8 * env.bond_count + 8

    def test_corruption_detected(self, tmp_path: Path) -> None:
        path = _saved(tmp_path, sample_environment(2, 3, ConductanceLaw.poly_tail(1.0), 1))
        data = bytearray(path.read_bytes())
        data[env_mod._HEADER.size + 3] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(EnvironmentFileError, match="Checksum"):
            load(path)

    def test_truncation_detected(self, tmp_path: Path) -> None:
        path = _saved(tmp_path, sample_environment(2, 3, ConductanceLaw.poly_tail(1.0), 1))
        path.write_bytes(path.read_bytes()[:-20])
        with pytest.raises(EnvironmentFileError, match="truncated"):
            load(path)

    def test_bad_magic(self, tmp_path: Path) -> None:
        path = _saved(tmp_path, sample_environment(2, 3, ConductanceLaw.poly_tail(1.0), 1))
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(EnvironmentFileError, match="magic"):
            load(path)

    def test_future_version(self, tmp_path: Path) -> None:
        path = _saved(tmp_path, sample_environment(2, 3, ConductanceLaw.poly_tail(1.0), 1))
        data = bytearray(path.read_bytes())
        data[4:6] = (env_mod.FORMAT_VERSION + 1).to_bytes(2, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(FormatVersionError):
            load(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(EnvironmentFileError, match="Cannot read"):
            load(tmp_path / "absent.rclb")

    def test_no_temp_files_left(self, tmp_path: Path) -> None:
        _saved(tmp_path, sample_environment(2, 2, ConductanceLaw.constant(1.0), 0))
        assert [p.name for p in tmp_path.iterdir()] == ["env.rclb"]

    def test_seed_is_exact(self, tmp_path: Path) -> None:
        seed = 2 ** 63 + 5
        env = sample_environment(1, 2, ConductanceLaw.poly_tail(1.0), seed)
        assert load(_saved(tmp_path, env)).seed == seed
