import json

import numpy as np
import pytest

from comotion.model import (
    FLOATING,
    PRISMATIC,
    REVOLUTE,
    SPHERICAL,
    LinkSpec,
    ModelError,
    comprehensive_selection,
    load_model,
    selection_matrix,
    spatial_inertia,
)


def serial_chain_doc(n=3):
    links = [{"id": "base", "mass": 1.0, "com": [0, 0, 0], "inertia": [0] * 6}]
    joints = []
    for i in range(1, n + 1):
        links.append(
            {"id": f"l{i}", "mass": 5.0, "com": [0.5, 0, 0], "inertia": [0.1, 0.1, 0.1, 0, 0, 0]}
        )
        joints.append(
            {
                "id": f"j{i}",
                "parent": "base" if i == 1 else f"l{i - 1}",
                "child": f"l{i}",
                "type": "revolute",
                "axis": 3,
                "xyz": [0, 0, 0] if i == 1 else [1, 0, 0],
                "rpy": [0, 0, 0],
            }
        )
    return {"name": "chain", "links": links, "joints": joints, "root": "base"}


def test_selection_matrices():
    assert np.array_equal(selection_matrix(REVOLUTE, 3).ravel(), [0, 0, 1, 0, 0, 0])
    assert np.array_equal(selection_matrix(PRISMATIC, 1).ravel(), [0, 0, 0, 1, 0, 0])
    s = selection_matrix(SPHERICAL)
    assert s.shape == (6, 3)
    assert np.array_equal(s[:3], np.eye(3))
    assert np.array_equal(selection_matrix(FLOATING), np.eye(6))


def test_selection_matrix_axis_errors():
    with pytest.raises(ModelError):
        selection_matrix(REVOLUTE, None)
    with pytest.raises(ModelError):
        selection_matrix(SPHERICAL, 2)


def test_comprehensive_selection_repeats_blocks():
    s = selection_matrix(REVOLUTE, 2)
    comp = comprehensive_selection(s, 4)
    assert comp.shape == (24, 4)
    for k in range(4):
        assert np.array_equal(comp[6 * k : 6 * k + 6, k : k + 1], s)
    comp_f = comprehensive_selection(selection_matrix(FLOATING), 2)
    assert np.array_equal(comp_f, np.eye(12))


def test_load_serial_chain_ancestry():
    model = load_model(json.dumps(serial_chain_doc(3)))
    i3 = model.index("l3")
    assert [model.link_order[a] for a in model.ancestors(i3)] == ["l1", "l2"]
    assert model.parent[model.index("l1")] == -1
    assert model.descendants(model.index("l1")) == [model.index("l2"), model.index("l3")]
    for i in range(model.nb):
        for j in model.ancestors(i):
            assert i in model.descendants(j)
        assert i not in model.ancestors(i)


def test_cycle_detection():
    doc = serial_chain_doc(3)
    doc["joints"][0]["parent"] = "l3"  # j1 now hangs l1 off its own descendant
    with pytest.raises(ModelError, match="cycle"):
        load_model(json.dumps(doc))


def test_unknown_fields_rejected():
    doc = serial_chain_doc(1)
    doc["joints"][0]["friction"] = 0.2
    with pytest.raises(ModelError, match="unknown field"):
        load_model(json.dumps(doc))


def test_nonpositive_mass_rejected():
    doc = serial_chain_doc(1)
    doc["links"][1]["mass"] = 0.0
    with pytest.raises(ModelError, match="mass"):
        load_model(json.dumps(doc))


def test_dangling_parent_rejected():
    doc = serial_chain_doc(2)
    doc["joints"][1]["parent"] = "nope"
    with pytest.raises(ModelError, match="unknown parent"):
        load_model(json.dumps(doc))


def test_malformed_json_rejected():
    with pytest.raises(ModelError, match="JSON"):
        load_model("{not json")


def test_paper_style_arm_loads():
    model = load_model(json.dumps(serial_chain_doc(3)))
    assert model.nb == 3
    assert model.dof == 3
    link = model.links["l1"]
    assert link.mass == 5.0
    assert np.array_equal(link.com, [0.5, 0, 0])


def test_spatial_inertia_point_mass():
    link = LinkSpec("pt", 1.0, [0, 0, 0], [0, 0, 0, 0, 0, 0])
    ii = spatial_inertia(link)
    assert np.array_equal(ii[:3, :3], np.zeros((3, 3)))
    assert np.array_equal(ii[3:, 3:], np.eye(3))
    assert np.array_equal(ii[:3, 3:], np.zeros((3, 3)))


def test_spatial_inertia_parallel_axis():
    # com offset along x shifts the yy and zz angular entries by m c^2
    link = LinkSpec("l", 5.0, [0.5, 0, 0], [0.1, 0.1, 0.1, 0, 0, 0])
    ii = spatial_inertia(link)
    assert np.allclose(np.diag(ii[:3, :3]), [0.1, 0.1 + 1.25, 0.1 + 1.25])
    assert np.allclose(ii[:3, 3:], 5.0 * np.array([[0, 0, 0], [0, 0, -0.5], [0, 0.5, 0]]))


def test_spatial_inertia_symmetry(rng):
    for _ in range(20):
        a = rng.uniform(-1, 1, (3, 3))
        i_c = 0.1 * (a @ a.T) + 0.05 * np.eye(3)
        link = LinkSpec(
            "r",
            rng.uniform(0.5, 3.0),
            rng.uniform(-0.5, 0.5, 3),
            [i_c[0, 0], i_c[1, 1], i_c[2, 2], i_c[0, 1], i_c[0, 2], i_c[1, 2]],
        )
        ii = spatial_inertia(link)
        assert np.abs(ii - ii.T).max() == 0.0
        assert np.linalg.eigvalsh(ii).min() > -1e-12
