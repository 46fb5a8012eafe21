"""Latent classifiers, induced models, baselines, and error decomposition.

The classifier attached to a latent representation is always the train
conditional p(y|z, t=1); composing it with the encoder gives the induced
model q(y|x) = sum_z q(z|x) q(y|z). The test error of that model splits into
an information-loss part (what the representation discarded) and a latent
part (how wrong the classifier is on the latent variable), with a
nonnegative gap for stochastic encoders. A prior-shift reweighting corrects
the classifier when only the label marginal moves between splits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import Channel, JointTable, conditional_channel
from .datasets import DatasetVariant, XHAT_STATES, build_joint, sufficient_statistic_view
from .errors import DegeneratePrior, ShapeMismatch, ShiftLabError, ZeroSupportZ
from .infotheory import entropy, kl_conditional, mutual_information, ordered_marginal

__all__ = [
    "BaselineKind",
    "ErrorDecomposition",
    "optimal_latent_classifier",
    "induced_model",
    "cross_entropy",
    "baseline",
    "baseline_table",
    "decompose_test_error",
    "prior_shift_correct",
    "write_decomposition_csv",
]

# info_loss + latent_error upper-bounds the test error for any encoder and
# classifier; a gap beyond rounding signals a broken input.
_GAP_TOL = 1e-10


class BaselineKind(enum.Enum):
    COLOR_ONLY = "color-only"
    DIGIT_ONLY = "digit-only"
    PICTURE = "picture"
    PRIOR_ONLY = "prior-only"

    @classmethod
    def parse(cls, text: str) -> "BaselineKind":
        return cls(text.strip().lower())


def optimal_latent_classifier(
    joint_with_z: JointTable,
    target: str = "y",
    latent: str = "z",
    selection: str = "t",
) -> Channel:
    """q(y|z) = p(y|z, t=1) exactly; every z must have train support."""
    train = joint_with_z.condition({selection: 1})
    pzy = ordered_marginal(train, (latent, target))
    pz = pzy.sum(axis=1)
    if not np.all(pz > 0):
        bad = int(np.flatnonzero(pz == 0)[0])
        raise ZeroSupportZ(f"p(z={bad}|t=1) = 0; classifier undefined there")
    return Channel((latent,), (target, pzy.shape[1]), pzy / pz[:, None])


def induced_model(encoder: Channel, classifier: Channel) -> Channel:
    """q(y|x) = sum_z q(z|x) q(y|z), the model the encoder actually realizes."""
    if classifier.inputs != (encoder.output[0],):
        raise ShapeMismatch(
            f"classifier reads {classifier.inputs}, encoder emits {encoder.output[0]}"
        )
    if classifier.input_shape != (encoder.output[1],):
        raise ShapeMismatch(
            f"classifier expects {classifier.input_shape[0]} latent states, "
            f"encoder emits {encoder.output[1]}"
        )
    table = np.asarray(encoder.table) @ np.asarray(classifier.table)
    return Channel(encoder.inputs, classifier.output, table)


def cross_entropy(
    joint: JointTable,
    model: Channel,
    target: str = "y",
    features: tuple[str, ...] | None = None,
    split: int = 1,
    selection: str = "t",
) -> float:
    """E[-ln q(target | features) | t=split], exact; +inf if the model puts
    zero mass on a supported outcome."""
    if features is not None and tuple(features) != model.inputs:
        raise ShapeMismatch(f"model reads {model.inputs}, not {tuple(features)}")
    cond = joint.condition({selection: split})
    pfy = ordered_marginal(cond, model.inputs + (target,))
    q = np.asarray(model.table)
    mask = pfy > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return float(-(pfy[mask] * np.log(q[mask])).sum())


def _feature_channel(variant: DatasetVariant, feature_vars: tuple[str, ...]) -> Channel:
    """p(y | feature_vars, t=1) lifted to a channel over the 20 xhat states."""
    joint = build_joint(variant)
    digits = np.arange(XHAT_STATES) % 10
    colors = np.arange(XHAT_STATES) // 10
    if feature_vars:
        cond = conditional_channel(joint.condition({"t": 1}), "y", feature_vars)
        table = np.asarray(cond.table)
        index = {"d": digits, "c": colors}
        sel = tuple(index[v] for v in feature_vars)
        rows = table[sel]
    else:
        py = ordered_marginal(joint.condition({"t": 1}), ("y",))
        rows = np.tile(py, (XHAT_STATES, 1))
    return Channel(("xhat",), ("y", 2), rows)


def baseline(variant: DatasetVariant, kind: BaselineKind) -> Channel:
    """Train-conditional classifier reading only the named feature of xhat.

    color-only: p(y|c,t=1); digit-only: p(y|d,t=1); picture: p(y|xhat,t=1);
    prior-only: p(y|t=1). All are channels over the full xhat alphabet.
    """
    if kind is BaselineKind.PICTURE:
        return _feature_channel(variant, ("c", "d"))
    if kind is BaselineKind.COLOR_ONLY:
        return _feature_channel(variant, ("c",))
    if kind is BaselineKind.DIGIT_ONLY:
        return _feature_channel(variant, ("d",))
    return _feature_channel(variant, ())


def baseline_table(variant: DatasetVariant) -> dict[BaselineKind, tuple[float, float]]:
    """(train CE, test CE) for each baseline classifier."""
    view = sufficient_statistic_view(build_joint(variant))
    out = {}
    for kind in BaselineKind:
        model = baseline(variant, kind)
        out[kind] = (
            cross_entropy(view, model, split=1),
            cross_entropy(view, model, split=0),
        )
    return out


@dataclass(frozen=True)
class ErrorDecomposition:
    """Split of the induced model's test error, all in nats.

    test_error   D_KL(p(y|x,t=0) || q(y|x)) for the induced model
    info_loss    I_{t=0}(x;y|z), predictive information the encoder discarded
    latent_error D_KL(p(y|z,t=0) || q(y|z))
    bound_gap    info_loss + latent_error - test_error, >= 0 up to rounding;
                 0 for deterministic encoders with the train-optimal classifier
    """

    test_error: float
    info_loss: float
    latent_error: float
    bound_gap: float


def decompose_test_error(
    joint_with_z: JointTable,
    classifier: Channel,
    features: str = "xhat",
    target: str = "y",
    latent: str = "z",
    selection: str = "t",
) -> ErrorDecomposition:
    """Evaluate the two-part upper bound on the induced model's test error.

    The encoder is recovered from the joint (z depends on nothing but the
    features, so p(z|x) is split-independent); the model is its composition
    with the classifier.
    """
    encoder = conditional_channel(joint_with_z, latent, (features,))
    model = induced_model(encoder, classifier)
    test = joint_with_z.condition({selection: 0})
    test_error = kl_conditional(
        test.marginal((features, target)), model, target, (features,)
    )
    info_loss = mutual_information(test, (features,), (target,), (latent,))
    latent_error = kl_conditional(
        test.marginal((latent, target)), classifier, target, (latent,)
    )
    if math.isinf(test_error):
        gap = math.inf if math.isinf(latent_error) else -math.inf
    else:
        gap = info_loss + latent_error - test_error
    if gap < -_GAP_TOL:
        raise ShiftLabError(
            f"decomposition bound violated: gap={gap:.3e} "
            f"(test={test_error:.6f}, info={info_loss:.6f}, latent={latent_error:.6f})"
        )
    return ErrorDecomposition(
        test_error=test_error,
        info_loss=info_loss,
        latent_error=latent_error,
        bound_gap=gap,
    )


def prior_shift_correct(
    classifier: Channel,
    joint_with_z: JointTable,
    target: str = "y",
    selection: str = "t",
) -> Channel:
    """Reweight q(y|z) by p(y|t=0)/p(y|t=1) and renormalize per row.

    Undoes a pure label-prior shift: when p(z|y) is split-stable, the
    corrected classifier's latent test error equals the latent train error.
    """
    py_t = ordered_marginal(joint_with_z, (target, selection))
    py_train = py_t[:, 1] / py_t[:, 1].sum()
    py_test = py_t[:, 0] / py_t[:, 0].sum()
    if np.any(py_train <= 0):
        raise DegeneratePrior("p(y|t=1) has a zero entry; ratio undefined")
    weighted = np.asarray(classifier.table) * (py_test / py_train)
    norms = weighted.sum(axis=1, keepdims=True)
    if np.any(norms <= 0):
        raise DegeneratePrior("corrected classifier has an all-zero row")
    return Channel(classifier.inputs, classifier.output, weighted / norms)


def write_decomposition_csv(rows: list[tuple[str, float, ErrorDecomposition]],
                            path: str) -> None:
    """Header criterion,lambda,test_error,info_loss,latent_error,bound_gap."""
    lines = ["criterion,lambda,test_error,info_loss,latent_error,bound_gap"]
    for criterion, lam, dec in rows:
        lines.append(
            f"{criterion},{lam:.9g},{dec.test_error:.9g},{dec.info_loss:.9g},"
            f"{dec.latent_error:.9g},{dec.bound_gap:.9g}"
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
