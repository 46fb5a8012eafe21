"""Joint table and channel mechanics."""

import numpy as np
import pytest

from shiftlab.core import (
    Channel,
    JointTable,
    VariableSchema,
    conditional_channel,
    make_joint,
)
from shiftlab.errors import (
    NegativeProbability,
    NotNormalized,
    ShapeMismatch,
    StateLimitExceeded,
    UnknownVariable,
    VariableCollision,
    ZeroProbabilityEvidence,
)


def small_joint():
    schema = VariableSchema((("a", 2), ("b", 3)))
    probs = np.array([[0.1, 0.2, 0.3], [0.05, 0.15, 0.2]])
    return make_joint(schema, probs)


def test_schema_accessors():
    schema = VariableSchema((("a", 2), ("b", 3), ("c", 4)))
    assert schema.names == ("a", "b", "c")
    assert schema.shape == (2, 3, 4)
    assert schema.state_count == 24
    assert schema.axis("b") == 1
    assert schema.cardinality("c") == 4
    sub = schema.subset(("c", "a"))
    assert sub.names == ("a", "c")


def test_schema_rejects_duplicates_and_bad_cardinality():
    with pytest.raises(VariableCollision):
        VariableSchema((("a", 2), ("a", 3)))
    with pytest.raises(ShapeMismatch):
        VariableSchema((("a", 0),))
    with pytest.raises(UnknownVariable):
        VariableSchema((("a", 2),)).axis("zz")


def test_schema_state_limit():
    with pytest.raises(StateLimitExceeded):
        VariableSchema((("a", 100), ("b", 100)), state_limit=99)


def test_joint_validation():
    schema = VariableSchema((("a", 2),))
    with pytest.raises(NegativeProbability):
        make_joint(schema, [-0.1, 1.1])
    with pytest.raises(NotNormalized):
        make_joint(schema, [0.3, 0.3])
    with pytest.raises(ShapeMismatch):
        make_joint(schema, [0.2, 0.3, 0.5])


def test_joint_is_immutable():
    joint = small_joint()
    with pytest.raises(ValueError):
        joint.probs[0, 0] = 0.5


def test_marginal():
    joint = small_joint()
    np.testing.assert_allclose(joint.marginal_array(("a",)), [0.6, 0.4])
    np.testing.assert_allclose(joint.marginal_array(("b",)), [0.15, 0.35, 0.5])
    # keeping every variable is the identity
    kept = joint.marginal(("a", "b"))
    np.testing.assert_array_equal(kept.probs, joint.probs)


def test_condition_removes_evidence_and_renormalizes():
    joint = small_joint()
    given_a0 = joint.condition({"a": 0})
    assert given_a0.names == ("b",)
    np.testing.assert_allclose(given_a0.probs, np.array([0.1, 0.2, 0.3]) / 0.6)
    assert joint.condition({}) is joint


def test_condition_errors():
    joint = small_joint()
    with pytest.raises(UnknownVariable):
        joint.condition({"a": 5})
    zero = make_joint(VariableSchema((("a", 2), ("b", 2))),
                      [[0.5, 0.5], [0.0, 0.0]])
    with pytest.raises(ZeroProbabilityEvidence):
        zero.condition({"a": 1})


def test_channel_validation():
    with pytest.raises(NotNormalized):
        Channel(("a",), ("z", 2), [[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(NegativeProbability):
        Channel(("a",), ("z", 2), [[-0.5, 1.5], [0.5, 0.5]])
    with pytest.raises(ShapeMismatch):
        Channel(("a",), ("z", 3), [[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(ShapeMismatch):
        Channel(("a", "b"), ("z", 2), [[0.5, 0.5], [0.5, 0.5]])


def test_extend_with_channel_matches_manual_product():
    joint = small_joint()
    table = np.array([[0.7, 0.3], [0.2, 0.8], [0.5, 0.5]])
    chan = Channel(("b",), ("z", 2), table)
    ext = joint.extend_with_channel(chan)
    assert ext.names == ("a", "b", "z")
    manual = joint.probs[:, :, None] * table[None, :, :]
    np.testing.assert_allclose(ext.probs, manual, atol=1e-15)
    # the new variable's conditional is the channel itself
    np.testing.assert_allclose(conditional_channel(ext, "z", ("b",)).table, table)


def test_extend_with_channel_multi_input_order():
    joint = small_joint()
    # channel reading (b, a) in an order different from the schema's
    table = np.zeros((3, 2, 2))
    table[..., 0] = 0.25
    table[..., 1] = 0.75
    ext = joint.extend_with_channel(Channel(("b", "a"), ("z", 2), table))
    np.testing.assert_allclose(ext.marginal_array(("z",)), [0.25, 0.75])


def test_extend_with_channel_errors():
    joint = small_joint()
    with pytest.raises(VariableCollision):
        joint.extend_with_channel(Channel(("b",), ("a", 2), np.full((3, 2), 0.5)))
    with pytest.raises(ShapeMismatch):
        joint.extend_with_channel(Channel(("b",), ("z", 2), np.full((2, 2), 0.5)))
    with pytest.raises(UnknownVariable):
        joint.extend_with_channel(Channel(("q",), ("z", 2), np.full((4, 2), 0.5)))


def test_conditional_channel_zero_mass_rows_are_uniform():
    schema = VariableSchema((("a", 2), ("y", 2)))
    joint = make_joint(schema, [[0.6, 0.4], [0.0, 0.0]])
    chan = conditional_channel(joint, "y", ("a",))
    np.testing.assert_allclose(chan.table[0], [0.6, 0.4])
    np.testing.assert_allclose(chan.table[1], [0.5, 0.5])
