"""Baselines, error decomposition, and the prior-shift correction."""

import math

import numpy as np
import pytest

from shiftlab.analysis import (
    BaselineKind,
    baseline,
    baseline_table,
    cross_entropy,
    decompose_test_error,
    induced_model,
    optimal_latent_classifier,
    prior_shift_correct,
    write_decomposition_csv,
)
from shiftlab.analysis import ErrorDecomposition
from shiftlab.core import Channel, VariableSchema, conditional_channel, make_joint
from shiftlab.datasets import DatasetVariant, build_joint, sufficient_statistic_view
from shiftlab.errors import DegeneratePrior, ShapeMismatch, ZeroSupportZ
from shiftlab.infotheory import entropy, kl_conditional

# frozen enumeration oracle: (train CE, test CE) per baseline per variant
BASELINE_EXPECTED = {
    "cmnist": {
        BaselineKind.COLOR_ONLY: (0.422709087806, 1.723659879347),
        BaselineKind.DIGIT_ONLY: (0.562335144619, 0.562335144619),
        BaselineKind.PICTURE: (0.354463204039, 1.381331179876),
        BaselineKind.PRIOR_ONLY: (math.log(2), math.log(2)),
    },
    "d-cmnist": {
        BaselineKind.COLOR_ONLY: (0.376625387030, 1.886364610738),
        BaselineKind.DIGIT_ONLY: (0.562335144619, 0.562335144619),
        BaselineKind.PICTURE: (0.317119099599, 1.526894364140),
        BaselineKind.PRIOR_ONLY: (math.log(2), math.log(2)),
    },
    "y-cmnist": {
        BaselineKind.COLOR_ONLY: (0.376189478516, 1.890942128981),
        BaselineKind.DIGIT_ONLY: (0.562335144619, 0.562335144619),
        BaselineKind.PICTURE: (0.317511968771, 1.526235122163),
        BaselineKind.PRIOR_ONLY: (math.log(2), math.log(2)),
    },
}

I_T0_XY = 0.416593364605        # test-split I(xhat; y)
I_T0_XY_GIVEN_D = 0.285781328663  # test-split I(xhat; y | d), digit left out


def view(variant):
    return sufficient_statistic_view(build_joint(variant))


def digit_encoder():
    table = np.zeros((20, 10))
    table[np.arange(20), np.arange(20) % 10] = 1.0
    return Channel(("xhat",), ("z", 10), table)


@pytest.mark.parametrize("variant", list(DatasetVariant))
def test_baseline_table_matches_frozen_enumeration(variant):
    table = baseline_table(variant)
    for kind, (train_want, test_want) in BASELINE_EXPECTED[variant.value].items():
        train_got, test_got = table[kind]
        assert train_got == pytest.approx(train_want, abs=1e-9), kind
        assert test_got == pytest.approx(test_want, abs=1e-9), kind


@pytest.mark.parametrize("variant", list(DatasetVariant))
def test_baseline_dominance_structure(variant):
    table = baseline_table(variant)
    digit_train, digit_test = table[BaselineKind.DIGIT_ONLY]
    picture_train, _ = table[BaselineKind.PICTURE]
    for kind, (train_ce, test_ce) in table.items():
        assert digit_test <= test_ce + 1e-12, kind
        assert picture_train <= train_ce + 1e-12, kind
    # color helps on train, hurts badly under the flipped environment
    color_train, color_test = table[BaselineKind.COLOR_ONLY]
    assert color_train < math.log(2) < color_test


def test_baseline_channel_reads_only_its_feature():
    chan = baseline(DatasetVariant.CMNIST, BaselineKind.COLOR_ONLY)
    assert chan.inputs == ("xhat",)
    table = chan.table.reshape(2, 10, 2)  # (color, digit, y)
    for c in range(2):
        for d in range(1, 10):
            np.testing.assert_array_equal(table[c, d], table[c, 0])
    prior = baseline(DatasetVariant.CMNIST, BaselineKind.PRIOR_ONLY)
    np.testing.assert_allclose(prior.table, 0.5, atol=1e-12)


def test_baseline_kind_parse():
    assert BaselineKind.parse("Digit-Only") is BaselineKind.DIGIT_ONLY
    with pytest.raises(ValueError):
        BaselineKind.parse("pixel")


@pytest.mark.parametrize("variant", list(DatasetVariant))
@pytest.mark.parametrize("seed", [0, 1])
def test_cross_entropy_identity(variant, seed):
    v = view(variant)
    rng = np.random.default_rng(seed)
    model = Channel(("xhat",), ("y", 2), rng.dirichlet(np.ones(2), size=20))
    for split in (0, 1):
        ce = cross_entropy(v, model, split=split)
        kl = kl_conditional(v.condition({"t": split}), model, "y", ("xhat",))
        cond_h = entropy(v.condition({"t": split}), ("y",), ("xhat",))
        assert ce == pytest.approx(kl + cond_h, abs=1e-10)


def test_cross_entropy_infinite_on_support_violation():
    v = view(DatasetVariant.CMNIST)
    table = np.tile([1.0, 0.0], (20, 1))
    model = Channel(("xhat",), ("y", 2), table)
    assert cross_entropy(v, model, split=1) == math.inf


def test_cross_entropy_checks_features():
    v = view(DatasetVariant.CMNIST)
    model = Channel(("z",), ("y", 2), [[0.5, 0.5]])
    with pytest.raises(ShapeMismatch):
        cross_entropy(v, model, features=("xhat",), split=1)


def test_induced_model_composes_tables():
    enc = digit_encoder()
    clf = Channel(("z",), ("y", 2), np.tile([0.25, 0.75], (10, 1)))
    model = induced_model(enc, clf)
    assert model.inputs == ("xhat",)
    np.testing.assert_allclose(model.table, enc.table @ clf.table, atol=1e-15)
    with pytest.raises(ShapeMismatch):
        induced_model(enc, Channel(("z",), ("y", 2), np.tile([0.25, 0.75], (9, 1))))


def test_optimal_latent_classifier_requires_train_support():
    ext = view(DatasetVariant.CMNIST).extend_with_channel(digit_encoder())
    clf = optimal_latent_classifier(ext)
    # digit predictions are split-stable: p(y|z,t=1) = p(y|d)
    want = [[3 / 4, 1 / 4]] * 5 + [[1 / 4, 3 / 4]] * 5
    np.testing.assert_allclose(clf.table, want, atol=1e-12)
    padded = np.zeros((20, 11))
    padded[np.arange(20), np.arange(20) % 10] = 1.0
    ext_bad = view(DatasetVariant.CMNIST).extend_with_channel(
        Channel(("xhat",), ("z", 11), padded)
    )
    with pytest.raises(ZeroSupportZ):
        optimal_latent_classifier(ext_bad)


def test_decomposition_identity_encoder_is_pure_latent_error():
    ext = view(DatasetVariant.CMNIST).extend_with_channel(
        Channel(("xhat",), ("z", 20), np.eye(20))
    )
    dec = decompose_test_error(ext, optimal_latent_classifier(ext))
    assert dec.info_loss <= 1e-10
    assert dec.latent_error == pytest.approx(dec.test_error, abs=1e-10)
    assert abs(dec.bound_gap) <= 1e-10
    assert dec.test_error > 0.2  # concept shift hits the picture model


def test_decomposition_constant_encoder_is_pure_info_loss():
    ext = view(DatasetVariant.CMNIST).extend_with_channel(
        Channel(("xhat",), ("z", 1), np.ones((20, 1)))
    )
    dec = decompose_test_error(ext, optimal_latent_classifier(ext))
    assert dec.info_loss == pytest.approx(I_T0_XY, abs=1e-9)
    assert dec.latent_error <= 1e-12
    # the constant model predicts the uniform label marginal everywhere
    assert dec.test_error == pytest.approx(I_T0_XY, abs=1e-9)
    assert abs(dec.bound_gap) <= 1e-10


@pytest.mark.parametrize("variant", list(DatasetVariant))
def test_decomposition_digit_encoder_keeps_digit_information(variant):
    ext = view(variant).extend_with_channel(digit_encoder())
    dec = decompose_test_error(ext, optimal_latent_classifier(ext))
    assert dec.latent_error <= 1e-12
    assert dec.info_loss == pytest.approx(dec.test_error, abs=1e-10)
    assert abs(dec.bound_gap) <= 1e-10


def test_decomposition_digit_encoder_value_on_base_variant():
    ext = view(DatasetVariant.CMNIST).extend_with_channel(digit_encoder())
    dec = decompose_test_error(ext, optimal_latent_classifier(ext))
    assert dec.info_loss == pytest.approx(I_T0_XY_GIVEN_D, abs=1e-9)


@pytest.mark.parametrize("seed", [2, 5, 8])
def test_decomposition_gap_nonnegative_for_stochastic_encoders(seed):
    rng = np.random.default_rng(seed)
    table = rng.dirichlet(np.ones(6), size=20)
    ext = view(DatasetVariant.D_CMNIST).extend_with_channel(
        Channel(("xhat",), ("z", 6), table)
    )
    dec = decompose_test_error(ext, optimal_latent_classifier(ext))
    assert dec.bound_gap >= -1e-10
    assert dec.test_error <= dec.info_loss + dec.latent_error + 1e-10


def test_prior_shift_correction_is_identity_without_label_shift():
    # the base variant keeps p(y|t) uniform on both splits
    ext = view(DatasetVariant.CMNIST).extend_with_channel(digit_encoder())
    clf = optimal_latent_classifier(ext)
    corrected = prior_shift_correct(clf, ext)
    np.testing.assert_allclose(corrected.table, clf.table, atol=1e-12)


def test_prior_shift_correction_matches_splits_on_digit_representation():
    ext = view(DatasetVariant.Y_CMNIST).extend_with_channel(digit_encoder())
    clf = optimal_latent_classifier(ext)
    train_err = kl_conditional(ext.condition({"t": 1}), clf, "y", ("z",))
    corrected = prior_shift_correct(clf, ext)
    test_err = kl_conditional(ext.condition({"t": 0}), corrected, "y", ("z",))
    assert abs(test_err - train_err) <= 1e-10
    np.testing.assert_allclose(corrected.table.sum(axis=1), 1.0, atol=1e-12)


def test_prior_shift_correction_repairs_a_genuine_label_shift():
    # z depends on y the same way on both splits, but the label marginal
    # moves: exactly the regime the reweighting is for
    p_t = np.array([0.5, 0.5])
    p_y_t = np.array([[0.8, 0.2], [0.3, 0.7]])  # test vs train label priors
    p_z_y = np.array([[0.9, 0.1], [0.25, 0.75]])
    probs = np.einsum("t,ty,yz->yzt", p_t, p_y_t, p_z_y)
    joint = make_joint(VariableSchema((("y", 2), ("z", 2), ("t", 2))), probs)
    clf = optimal_latent_classifier(joint)
    raw_test = kl_conditional(joint.condition({"t": 0}), clf, "y", ("z",))
    corrected = prior_shift_correct(clf, joint)
    test_err = kl_conditional(joint.condition({"t": 0}), corrected, "y", ("z",))
    train_err = kl_conditional(joint.condition({"t": 1}), clf, "y", ("z",))
    assert raw_test > 0.05
    assert test_err <= train_err + 1e-10
    assert test_err <= 1e-10


def test_prior_shift_correction_rejects_degenerate_prior():
    schema = VariableSchema((("y", 2), ("z", 2), ("t", 2)))
    probs = np.zeros((2, 2, 2))
    probs[1, :, 1] = 0.25      # train split has only y = 1
    probs[:, :, 0] = 0.125
    joint = make_joint(schema, probs)
    clf = conditional_channel(joint, "y", ("z",))
    with pytest.raises(DegeneratePrior):
        prior_shift_correct(clf, joint)


def test_write_decomposition_csv_golden(tmp_path):
    rows = [
        ("sufficiency", 1e6, ErrorDecomposition(0.2858, 0.2858, 1e-09, 0.0001)),
        ("bottleneck", 10.0, ErrorDecomposition(0.0, 0.416593365, 0.0, 0.0)),
    ]
    path = tmp_path / "dec.csv"
    write_decomposition_csv(rows, str(path))
    assert path.read_text() == (
        "criterion,lambda,test_error,info_loss,latent_error,bound_gap\n"
        "sufficiency,1000000,0.2858,0.2858,1e-09,0.0001\n"
        "bottleneck,10,0,0.416593365,0,0\n"
    )
