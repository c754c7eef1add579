import json

import numpy as np
import pytest

from stalebc.channels import (ChannelError, StateChannel, SymmetryError, check_deterministic,
                              full_rank_matrices, make_blackwell_with_state, make_erasure,
                              make_finite_field, parse_channel_ref, validate_symmetry)


def test_erasure_layout():
    ch = make_erasure(0.3)
    assert (ch.x_size, ch.s_size, ch.y_size) == (2, 4, 3)
    np.testing.assert_allclose(ch.state_pmf.probs, [0.49, 0.21, 0.21, 0.09])
    assert ch.pi == (0, 2, 1, 3)
    w = validate_symmetry(ch)
    assert w.is_involution
    det = check_deterministic(ch)
    assert det is not None
    # state (1, 0): receiver 1 erased, receiver 2 clean
    assert det.y1_map[1, 2] == 2 and det.y2_map[1, 2] == 1


def test_erasure_domain():
    make_erasure(0.0)
    with pytest.raises(ChannelError):
        make_erasure(1.5)


def test_finite_field_gf2():
    assert len(full_rank_matrices(2)) == 6
    assert len(full_rank_matrices(3)) == 48
    ch = make_finite_field(2)
    assert (ch.x_size, ch.s_size, ch.y_size) == (4, 6, 2)
    validate_symmetry(ch)
    assert check_deterministic(ch) is not None
    with pytest.raises(ChannelError):
        make_finite_field(4)


def test_blackwell_maps():
    ch = make_blackwell_with_state()
    det = check_deterministic(ch)
    np.testing.assert_array_equal(det.y1_map[:, 0], [0, 0, 1])
    np.testing.assert_array_equal(det.y2_map[:, 0], [0, 1, 1])
    np.testing.assert_array_equal(det.y1_map[:, 1], det.y2_map[:, 0])
    assert validate_symmetry(ch).pi == (1, 0)


def test_symmetry_error_names_the_entry():
    ch = make_blackwell_with_state()
    with pytest.raises(SymmetryError, match=r"x=\d,s=\d"):
        validate_symmetry(ch, (0, 1))


def test_asymmetric_state_law_rejected():
    ch = make_blackwell_with_state()
    bad = StateChannel([0.3, 0.7], ch.kernel, (1, 0))
    with pytest.raises(SymmetryError, match="p_S"):
        validate_symmetry(bad)


def test_missing_pi():
    ch = make_blackwell_with_state()
    with pytest.raises(SymmetryError):
        validate_symmetry(StateChannel(ch.state_pmf, ch.kernel))


def test_kernel_validation():
    with pytest.raises(ChannelError):
        StateChannel([1.0], np.full((2, 1, 2, 2), 0.3))
    with pytest.raises(ChannelError):
        StateChannel([1.0], np.full((2, 1, 2, 3), 1 / 6))
    with pytest.raises(ChannelError):
        StateChannel([0.5, 0.5], np.full((2, 1, 2, 2), 0.25))
    with pytest.raises(ChannelError):
        StateChannel([1.0], np.full((2, 1, 2, 2), 0.25), pi=(1,))


def test_noisy_channel_not_deterministic():
    k = np.full((2, 1, 2, 2), 0.25)
    assert check_deterministic(StateChannel([1.0], k)) is None


def test_joint_marginals():
    ch = make_erasure(0.2)
    j = ch.joint([0.5, 0.5])
    assert j.names == ("X", "S", "Y1", "Y2")
    assert j.cmi("X", "Y1", "S") == pytest.approx(0.8, abs=1e-12)
    assert j.cmi("X", ("Y1", "Y2"), "S") == pytest.approx(0.96, abs=1e-12)


@pytest.mark.parametrize("ref", ["erasure:0.4", "ff:2", "blackwell"])
def test_json_round_trip(ref, tmp_path):
    ch = parse_channel_ref(ref)
    path = tmp_path / "ch.json"
    ch.save(path)
    back = StateChannel.load(path)
    np.testing.assert_array_equal(back.kernel, ch.kernel)
    np.testing.assert_array_equal(back.state_pmf.probs, ch.state_pmf.probs)
    assert back.pi == ch.pi
    assert json.loads(path.read_text())["kernel"][0][0] == ch.to_dict()["kernel"][0][0]


def test_load_errors(tmp_path):
    with pytest.raises(ChannelError):
        StateChannel.load(tmp_path / "missing.json")
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ChannelError):
        StateChannel.load(p)
    p.write_text(json.dumps({"x_size": 2, "y_size": 2, "s_size": 1,
                             "state_pmf": [1.0], "kernel": [[[1, 0, 0]]]}))
    with pytest.raises(ChannelError, match="kernel shape"):
        StateChannel.load(p)


def test_parse_channel_ref_errors():
    for bad in ["erasure:x", "ff:abc", "nope", "erasure:"]:
        with pytest.raises(ChannelError):
            parse_channel_ref(bad)
