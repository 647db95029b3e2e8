# tests/test_power_system.py
import numpy as np
import pytest
import yaml

from src.models.power_system import CommitmentSchedule, PowerSystem
from src.utils.exceptions import DataParseError
from tests import factories


def test_scalars_broadcast_to_horizon():
    system = factories.system([10, 20, 30], generators=[factories.generator(p_max=80.0, p_min=5.0)],
                              renewables=[factories.renewable(p_max=40.0)])
    assert system.horizon == 3
    assert system.p_max.shape == (1, 3)
    np.testing.assert_allclose(system.p_max[0], [80.0, 80.0, 80.0])
    np.testing.assert_allclose(system.renewable_p_max[0], [40.0, 40.0, 40.0])
    # the stored model carries full-length lists
    assert system.generators[0].p_min == [5.0, 5.0, 5.0]


def test_bundled_systems_load(one_bus, three_bus, six_bus):
    assert one_bus.horizon == 6 and one_bus.n_storages == 1
    assert three_bus.n_lines == 2
    assert six_bus.horizon == 24 and six_bus.n_renewables == 3
    np.testing.assert_allclose(one_bus.total_demand, [100, 95, 110, 130, 140, 120])


def test_unknown_key_is_parse_error(tmp_path, one_bus):
    data = one_bus.model_dump()
    data["generators"][0]["colour"] = "blue"
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(data))
    with pytest.raises(DataParseError):
        PowerSystem.from_file(path)


def test_missing_file_is_parse_error(tmp_path):
    with pytest.raises(DataParseError):
        PowerSystem.from_file(tmp_path / "nope.yaml")


def test_invalid_limits_rejected():
    with pytest.raises(ValueError):
        factories.system([10, 10], generators=[factories.generator(p_min=90.0, p_max=50.0)])
    with pytest.raises(ValueError):
        factories.system([10, 10], generators=[factories.generator(initial_on=False, initial_output=5.0)])
    with pytest.raises(ValueError):
        factories.system([10, 10], storages=[factories.storage(initial_level=50.0, capacity=40.0)])


def test_demand_length_mismatch_rejected():
    with pytest.raises(ValueError):
        PowerSystem.model_validate(dict(generators=[factories.generator()],
                                        demand={"a": [1.0, 2.0], "b": [1.0]}))


def test_line_rows_must_match_units():
    line = dict(id="L1", flow_limit=10.0, alpha_demand=[1.0], alpha_generator=[], alpha_renewable=[])
    with pytest.raises(ValueError):
        factories.system([10, 10], lines=[line])


def test_file_round_trip(tmp_path, three_bus):
    path = three_bus.to_file("three_bus_copy", tmp_path)
    again = PowerSystem.from_file(path)
    assert again.model_dump() == three_bus.model_dump()


def test_commitment_schedule_from_on_off():
    system = factories.system([1, 1, 1, 1], generators=[factories.generator(initial_on=False, initial_output=0.0,
                                                                             no_load_cost=10.0, startup_cost=100.0,
                                                                             shutdown_cost=7.0)])
    schedule = CommitmentSchedule.from_on_off(system, [[0, 1, 1, 0]])
    np.testing.assert_array_equal(schedule.x_start, [[0, 1, 0, 0]])
    np.testing.assert_array_equal(schedule.x_shut, [[0, 0, 0, 1]])
    assert schedule.commitment_cost(system) == pytest.approx(2 * 10.0 + 100.0 + 7.0)
    assert CommitmentSchedule.from_dict(schedule.to_dict()).to_dict() == schedule.to_dict()
