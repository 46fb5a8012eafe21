"""Information measures and the inequality suite."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftlab.core import Channel, VariableSchema, conditional_channel, make_joint
from shiftlab.datasets import DatasetVariant, build_joint, sufficient_statistic_view
from shiftlab.errors import OverlappingVariableSets, ZeroSupportZ
from shiftlab.infotheory import (
    check_propositions,
    entropy,
    fuzz_propositions,
    jsd,
    kl_conditional,
    kl_divergence,
    mutual_information,
    ordered_marginal,
    pinsker_latent_bound,
    shift_decomposition,
)

CARDS = st.tuples(st.integers(2, 4), st.integers(2, 4), st.integers(2, 3))


def random_joint(seed: int, cards: tuple[int, ...], names=("a", "b", "c")):
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.ones(int(np.prod(cards)))).reshape(cards)
    return make_joint(VariableSchema(tuple(zip(names, cards))), probs)


def views():
    return [sufficient_statistic_view(build_joint(v)) for v in DatasetVariant]


def test_entropy_uniform_and_deterministic():
    joint = make_joint(VariableSchema((("a", 4),)), np.full(4, 0.25))
    assert entropy(joint, ("a",)) == pytest.approx(math.log(4), abs=1e-12)
    point = make_joint(VariableSchema((("a", 4),)), [1.0, 0.0, 0.0, 0.0])
    assert entropy(point, ("a",)) == 0.0


def test_entropy_rejects_overlap():
    joint = random_joint(0, (2, 2, 2))
    with pytest.raises(OverlappingVariableSets):
        entropy(joint, ("a",), ("a", "b"))
    with pytest.raises(OverlappingVariableSets):
        mutual_information(joint, ("a",), ("a",))


def test_ordered_marginal_axis_order():
    joint = random_joint(3, (2, 3, 4))
    ab = joint.marginal_array(("a", "b"))
    np.testing.assert_array_equal(ordered_marginal(joint, ("b", "a")), ab.T)


@given(st.integers(0, 10**6), CARDS)
@settings(max_examples=60, deadline=None)
def test_entropy_chain_rule_and_bounds(seed, cards):
    joint = random_joint(seed, cards)
    h_ab = entropy(joint, ("a", "b"))
    h_a = entropy(joint, ("a",))
    h_b_given_a = entropy(joint, ("b",), ("a",))
    assert abs(h_ab - (h_a + h_b_given_a)) <= 1e-10
    assert -1e-12 <= h_a <= math.log(cards[0]) + 1e-12
    assert h_b_given_a >= -1e-12


@given(st.integers(0, 10**6), CARDS)
@settings(max_examples=60, deadline=None)
def test_mutual_information_symmetry_and_chain_rule(seed, cards):
    joint = random_joint(seed, cards)
    assert mutual_information(joint, ("a",), ("b",)) == pytest.approx(
        mutual_information(joint, ("b",), ("a",)), abs=1e-10
    )
    lhs = mutual_information(joint, ("a",), ("b", "c"))
    rhs = mutual_information(joint, ("a",), ("b",)) + mutual_information(
        joint, ("a",), ("c",), ("b",)
    )
    assert abs(lhs - rhs) <= 1e-10
    assert lhs >= 0.0


def test_mutual_information_independent_and_identical():
    probs = np.outer([0.3, 0.7], [0.2, 0.8])
    joint = make_joint(VariableSchema((("a", 2), ("b", 2))), probs)
    assert mutual_information(joint, ("a",), ("b",)) <= 1e-12
    copy = make_joint(
        VariableSchema((("a", 2), ("b", 2))), np.diag([0.3, 0.7])
    )
    assert mutual_information(copy, ("a",), ("b",)) == pytest.approx(
        entropy(copy, ("a",)), abs=1e-12
    )


@given(st.integers(0, 10**6), CARDS, st.integers(2, 4))
@settings(max_examples=40, deadline=None)
def test_data_processing_inequality(seed, cards, n_out):
    joint = random_joint(seed, cards)
    rng = np.random.default_rng(seed + 1)
    table = rng.dirichlet(np.ones(n_out), size=cards[1])
    ext = joint.extend_with_channel(Channel(("b",), ("z", n_out), table))
    assert mutual_information(ext, ("a",), ("z",)) <= (
        mutual_information(ext, ("a",), ("b",)) + 1e-10
    )


@given(st.integers(0, 10**6), st.integers(2, 6))
@settings(max_examples=60, deadline=None)
def test_kl_nonnegative_zero_iff_equal(seed, n):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(n), size=2)
    assert kl_divergence(p, q) >= 0.0
    assert kl_divergence(p, p) <= 1e-12
    assert jsd(p, q) == pytest.approx(jsd(q, p), abs=1e-12)
    assert 0.0 <= jsd(p, q) <= math.log(2) + 1e-12


def test_kl_infinite_on_support_violation():
    assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))


def test_kl_conditional_manual_case():
    schema = VariableSchema((("x", 2), ("y", 2)))
    joint = make_joint(schema, [[0.3, 0.1], [0.2, 0.4]])
    model = Channel(("x",), ("y", 2), [[0.5, 0.5], [0.5, 0.5]])
    expected = 0.4 * kl_divergence([0.75, 0.25], [0.5, 0.5]) + 0.6 * kl_divergence(
        [1 / 3, 2 / 3], [0.5, 0.5]
    )
    assert kl_conditional(joint, model, "y", ("x",)) == pytest.approx(expected, abs=1e-12)
    hard = Channel(("x",), ("y", 2), [[1.0, 0.0], [0.5, 0.5]])
    assert kl_conditional(joint, hard, "y", ("x",)) == math.inf


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_shift_decomposition_chain_rule(seed):
    rng = np.random.default_rng(seed)
    cards = (3, 2, 2)
    probs = rng.dirichlet(np.ones(12)).reshape(cards)
    joint = make_joint(VariableSchema((("x", 3), ("y", 2), ("t", 2))), probs)
    dec = shift_decomposition(joint, ("x",), target="y", selection="t")
    assert dec.distribution_shift == pytest.approx(
        dec.covariate_shift + dec.concept_shift, abs=1e-10
    )


@pytest.mark.parametrize("variant", list(DatasetVariant))
def test_dataset_shift_decompositions_on_picture(variant):
    view = sufficient_statistic_view(build_joint(variant))
    dec = shift_decomposition(view, ("xhat",))
    # selection acts on the label only through the conditional, never jointly zero
    assert dec.concept_shift > 0.2
    assert dec.distribution_shift >= dec.concept_shift - 1e-12


def digit_encoder():
    table = np.zeros((20, 10))
    table[np.arange(20), np.arange(20) % 10] = 1.0
    return Channel(("xhat",), ("z", 10), table)


def color_encoder():
    table = np.zeros((20, 2))
    table[np.arange(20), np.arange(20) // 10] = 1.0
    return Channel(("xhat",), ("z", 2), table)


def constant_encoder():
    return Channel(("xhat",), ("z", 1), np.ones((20, 1)))


def identity_encoder():
    return Channel(("xhat",), ("z", 20), np.eye(20))


@pytest.mark.parametrize("make_encoder",
                         [digit_encoder, color_encoder, constant_encoder,
                          identity_encoder])
@pytest.mark.parametrize("variant", list(DatasetVariant))
def test_deterministic_encoders_make_error_decomposition_tight(variant, make_encoder):
    view = sufficient_statistic_view(build_joint(variant))
    report = check_propositions(view, make_encoder())
    assert report.all_hold, report.violations()
    by_name = {r.name: r for r in report.records}
    # with a deterministic encoder and the train-optimal classifier the
    # error decomposition holds with equality on both splits
    for name in ("train_error_decomposition", "test_error_decomposition"):
        rec = by_name[name]
        assert abs(rec.lhs - rec.rhs) <= 1e-10, (name, rec)


def test_chain_identity_record_is_equality():
    view = sufficient_statistic_view(build_joint(DatasetVariant.Y_CMNIST))
    rng = np.random.default_rng(7)
    table = rng.dirichlet(np.ones(5), size=20)
    report = check_propositions(view, Channel(("xhat",), ("z", 5), table))
    rec = {r.name: r for r in report.records}["criteria_chain_identity"]
    assert abs(rec.lhs - rec.rhs) <= 1e-10
    assert rec.holds


def test_pinsker_bound_requires_two_sided_support():
    view = sufficient_statistic_view(build_joint(DatasetVariant.CMNIST))
    # digit encoder padded with two latent values that never fire
    table = np.zeros((20, 12))
    table[np.arange(20), np.arange(20) % 10] = 1.0
    ext = view.extend_with_channel(Channel(("xhat",), ("z", 12), table))
    classifier = conditional_channel(ext.condition({"t": 1}), "y", ("z",))
    with pytest.raises(ZeroSupportZ):
        pinsker_latent_bound(ext, classifier, z_value=10)
    bound = pinsker_latent_bound(ext, classifier, z_value=3)
    assert bound.holds
    # digit predictions are split-stable, so the divergence vanishes
    assert bound.lhs <= 1e-12
    assert bound.jsd_value <= 1e-12


def test_pinsker_bound_vacuous_when_model_support_misses():
    view = sufficient_statistic_view(build_joint(DatasetVariant.CMNIST))
    ext = view.extend_with_channel(constant_encoder())
    hard = Channel(("z",), ("y", 2), [[1.0, 0.0]])
    bound = pinsker_latent_bound(ext, hard, z_value=0)
    assert bound.infinite_ratio
    assert bound.holds
    assert bound.lhs == math.inf and bound.rhs == math.inf


@pytest.mark.parametrize("variant", list(DatasetVariant))
def test_fuzz_smoke_is_clean(variant):
    view = sufficient_statistic_view(build_joint(variant))
    report = fuzz_propositions(view, cases=40, seed=11)
    assert report.clean, report.violations[:3]
    assert report.cases == 40
    assert report.records_checked > 40 * 6
