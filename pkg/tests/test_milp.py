"""The solver-agnostic program representation and its text formats."""

import numpy as np
import pytest

from netsleep.milp import (BINARY, CONTINUOUS, INTEGER, MilpInstance, read_lp,
                           read_warm_start, write_lp, write_warm_start)


def small_instance():
    inst = MilpInstance("toy")
    x = inst.add_variable("x0", BINARY)
    y = inst.add_variable("y0", INTEGER, lb=0.0, ub=5.0)
    t = inst.add_variable("t0", CONTINUOUS, lb=-2.0)
    inst.add_objective_term(x, 3.0)
    inst.add_objective_term(y, 1.5)
    inst.add_objective_term(t, 1.0)
    inst.add_constraint("cover", [(x, 1.0), (y, 1.0)], ">=", 2.0)
    inst.add_constraint("link", [(y, 1.0), (t, -1.0)], "<=", 4.0)
    inst.add_constraint("pin", [(t, 2.0)], "=", 3.0)
    return inst


def test_duplicate_names_and_tags_rejected():
    inst = MilpInstance()
    inst.add_variable("a")
    with pytest.raises(ValueError, match="duplicate variable"):
        inst.add_variable("a")
    inst.add_constraint("c", [(0, 1.0)], "<=", 1.0)
    with pytest.raises(ValueError, match="duplicate constraint"):
        inst.add_constraint("c", [(0, 1.0)], "<=", 2.0)
    with pytest.raises(ValueError, match="undeclared"):
        inst.add_constraint("d", [(7, 1.0)], "<=", 1.0)
    with pytest.raises(ValueError, match="sense"):
        inst.add_constraint("e", [(0, 1.0)], "<", 1.0)


def test_frozen_instances_refuse_edits():
    inst = small_instance().freeze()
    with pytest.raises(RuntimeError):
        inst.add_variable("new")
    with pytest.raises(RuntimeError):
        inst.add_constraint("late", [(0, 1.0)], "<=", 1.0)


def test_objective_terms_accumulate():
    inst = MilpInstance()
    v = inst.add_variable("v")
    inst.add_objective_term(v, 1.0)
    inst.add_objective_term(v, 2.5)
    assert inst.objective_value(np.array([2.0])) == pytest.approx(7.0)


def test_assignment_round_trip():
    inst = small_instance()
    vec = inst.assignment_from_map({"x0": 1.0, "y0": 3.0, "t0": 1.5})
    assert vec.tolist() == [1.0, 3.0, 1.5]
    back = inst.assignment_to_map(vec)
    assert back == {"x0": 1.0, "y0": 3.0, "t0": 1.5}
    with pytest.raises(KeyError):
        inst.assignment_from_map({"x0": 1.0, "nope": 2.0})


def test_warm_start_validation():
    inst = small_instance()
    inst.set_warm_start({"x0": 1.0, "y0": 2.0, "t0": 1.5})
    assert inst.warm_start == {0: 1.0, 1: 2.0, 2: 1.5}
    with pytest.raises(ValueError, match="bounds"):
        inst.set_warm_start({"y0": 9.0})
    with pytest.raises(ValueError, match="integral"):
        inst.set_warm_start({"y0": 2.5})
    inst.set_warm_start(None)
    assert inst.warm_start is None


def test_matrices_shapes_and_senses():
    inst = small_instance()
    mats = inst.matrices()
    assert mats["A"].shape == (3, 3)
    assert mats["integrality"].tolist() == [1, 1, 0]
    assert mats["lb"].tolist() == [0.0, 0.0, -2.0]
    # senses are encoded as row bounds
    assert mats["row_lb"].tolist() == [2.0, -np.inf, 3.0]
    assert mats["row_ub"].tolist() == [np.inf, 4.0, 3.0]


def test_lp_text_round_trip():
    inst = small_instance()
    text = write_lp(inst)
    again = read_lp(text)
    assert again.variable_names == inst.variable_names
    assert [again.kind_of(i) for i in range(3)] == [inst.kind_of(i) for i in range(3)]
    m1, m2 = inst.matrices(), again.matrices()
    assert np.allclose(m1["A"].toarray(), m2["A"].toarray())
    assert np.allclose(m1["c"], m2["c"])
    assert m1["lb"].tolist() == m2["lb"].tolist()
    assert m1["ub"].tolist() == m2["ub"].tolist()
    assert [c.tag for c in again._constraints] == \
        [c.tag for c in inst._constraints]
    # a second pass through the writer is byte-stable
    assert write_lp(again) == text


def test_warm_start_file_round_trip(tmp_path):
    inst = small_instance()
    text = write_warm_start(inst, {"x0": 1.0, "y0": 2.0})
    parsed = read_warm_start(text)
    assert parsed == {"x0": 1.0, "y0": 2.0}


def test_constraint_lookup_by_tag():
    inst = small_instance()
    row = inst.constraint_by_tag("link")
    assert row.sense == "<=" and row.rhs == 4.0
    with pytest.raises(KeyError):
        inst.constraint_by_tag("missing")
