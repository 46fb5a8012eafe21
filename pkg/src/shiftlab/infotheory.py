"""Exact information measures and the inequality suite for selection bias.

All quantities are in nats. Entropy-like sums use the 0*log(0) = 0 convention
throughout, so distributions with exact zeros never produce NaN. KL divergences
return math.inf when the second argument assigns zero mass where the first
does not; infinity is a sentinel value here, never an exception.

Mutual information values are computed as alternating-sign entropy sums, which
can land a few ulp below zero; anything in [-1e-9, 0) is reported as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from collections.abc import Iterable

import numpy as np

from .core import Channel, JointTable
from .errors import (
    MissingSelectionVariable,
    OverlappingVariableSets,
    SchemaMismatch,
    ShapeMismatch,
    ZeroSupportZ,
)

# Additive slack separating genuine inequality violations from rounding.
INEQUALITY_SLACK = 1e-9
# The chain-rule identity between the four criteria must hold to this tolerance.
IDENTITY_TOL = 1e-10

__all__ = [
    "INEQUALITY_SLACK",
    "IDENTITY_TOL",
    "ordered_marginal",
    "entropy",
    "mutual_information",
    "kl_conditional",
    "kl_divergence",
    "jsd",
    "shift_decomposition",
    "ShiftDecomposition",
    "pinsker_latent_bound",
    "PinskerBound",
    "InequalityRecord",
    "PropositionReport",
    "check_propositions",
    "FuzzReport",
    "fuzz_propositions",
]


def _entropy_of(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def ordered_marginal(joint: JointTable, order: tuple[str, ...]) -> np.ndarray:
    """Marginal over `order`, with axes permuted into exactly that order."""
    m = joint.marginal(order)
    return np.transpose(m.probs, [m.schema.axis(n) for n in order])


def _check_disjoint(*groups: Iterable[str]) -> None:
    seen: set[str] = set()
    for group in groups:
        for name in group:
            if name in seen:
                raise OverlappingVariableSets(f"variable {name!r} appears in two sets")
            seen.add(name)


def entropy(joint: JointTable, target: Iterable[str], given: Iterable[str] = ()) -> float:
    """Conditional Shannon entropy H(target | given) in nats."""
    target, given = tuple(target), tuple(given)
    _check_disjoint(target, given)
    h = _entropy_of(joint.marginal_array(target + given))
    if given:
        h -= _entropy_of(joint.marginal_array(given))
    return h


def mutual_information(
    joint: JointTable,
    a: Iterable[str],
    b: Iterable[str],
    given: Iterable[str] = (),
) -> float:
    """Conditional mutual information I(a; b | given) in nats.

    I(a;b|g) = H(a,g) + H(b,g) - H(a,b,g) - H(g); negative values within
    floating-point cancellation noise are clamped to 0.
    """
    a, b, given = tuple(a), tuple(b), tuple(given)
    _check_disjoint(a, b, given)
    value = (
        _entropy_of(joint.marginal_array(a + given))
        + _entropy_of(joint.marginal_array(b + given))
        - _entropy_of(joint.marginal_array(a + b + given))
        - (_entropy_of(joint.marginal_array(given)) if given else 0.0)
    )
    return value if value > 0.0 else 0.0


def kl_divergence(p, q) -> float:
    """D_KL(p || q) for two distributions on the same finite support."""
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise ShapeMismatch(f"support sizes differ: {p.shape} vs {q.shape}")
    nz = p > 0
    if np.any(q[nz] <= 0):
        return math.inf
    return float((p[nz] * (np.log(p[nz]) - np.log(q[nz]))).sum())


def jsd(p, q) -> float:
    """Jensen-Shannon divergence in nats; symmetric, bounded by ln 2."""
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise ShapeMismatch(f"support sizes differ: {p.shape} vs {q.shape}")
    m = 0.5 * (p + q)
    # the two KL halves are each >= 0, but cancellation can leave a tiny
    # negative sum when p == q
    return max(0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m), 0.0)


def kl_conditional(p: JointTable, q: Channel, target: str, features: Iterable[str]) -> float:
    """Expected KL divergence E_{p(features)}[ D_KL( p(target|features) || q ) ].

    Evaluates the model channel q against p's exact conditional under p's own
    feature marginal. Returns math.inf when q assigns zero mass to an outcome
    that p supports.
    """
    features = tuple(features)
    if q.inputs != features:
        raise SchemaMismatch(f"channel inputs {q.inputs} != features {features}")
    if q.output[0] != target:
        raise SchemaMismatch(f"channel output {q.output[0]!r} != target {target!r}")
    for name, card in zip(features, q.input_shape):
        if p.schema.cardinality(name) != card:
            raise SchemaMismatch(f"cardinality mismatch on {name!r}")
    if p.schema.cardinality(target) != q.output[1]:
        raise SchemaMismatch(f"cardinality mismatch on {target!r}")
    block = ordered_marginal(p, features + (target,))
    pf = block.sum(axis=-1, keepdims=True)
    mask = block > 0
    if np.any(q.table[mask] <= 0):
        return math.inf
    pw = block[mask]
    cond = pw / np.broadcast_to(pf, block.shape)[mask]
    value = float((pw * (np.log(cond) - np.log(q.table[mask]))).sum())
    return value if value > 0.0 else 0.0


@dataclass(frozen=True)
class ShiftDecomposition:
    """Chain-rule split of distribution shift into covariate and concept parts.

    distribution_shift = I(features, target; t)
    covariate_shift    = I(features; t)
    concept_shift      = I(target; t | features)
    """

    distribution_shift: float
    covariate_shift: float
    concept_shift: float


def shift_decomposition(
    joint: JointTable,
    features: Iterable[str],
    target: str = "y",
    selection: str = "t",
) -> ShiftDecomposition:
    """Decompose I(features, target; selection) along the chain rule."""
    features = tuple(features)
    if selection not in joint.names:
        raise MissingSelectionVariable(f"no variable {selection!r} in {joint.names}")
    return ShiftDecomposition(
        distribution_shift=mutual_information(joint, features + (target,), (selection,)),
        covariate_shift=mutual_information(joint, features, (selection,)),
        concept_shift=mutual_information(joint, (target,), (selection,), features),
    )


def _ratio_coefficient(m: float, big_m: float) -> float:
    """m*ln(m)/(1-m) + M*ln(M)/(M-1), with the limit values at m=1 or M=1.

    Both terms extend continuously: the first tends to -1 as m -> 1 (and is 0
    at m = 0), the second tends to +1 as M -> 1. The sum is nonnegative for
    0 <= m <= 1 <= M since x*ln(x) >= x-1.
    """
    if abs(m - 1.0) < 1e-9:
        low = -1.0
    elif m == 0.0:
        low = 0.0
    else:
        low = m * math.log(m) / (1.0 - m)
    if abs(big_m - 1.0) < 1e-9:
        high = 1.0
    else:
        high = big_m * math.log(big_m) / (big_m - 1.0)
    return low + high


@dataclass(frozen=True)
class PinskerBound:
    """Per-z record of the latent reverse-Pinsker bound.

    lhs: KL(p(y|z=z, t=0) || q(y|z=z));
    rhs: sqrt(2) * (m*ln(m)/(1-m) + M*ln(M)/(M-1)) * sqrt(JSD), where m and M
    are the extreme ratios p(y|z, t=0)/q(y|z) over outcomes. When the model's
    support does not cover the test conditional, M is infinite and the bound
    is vacuous (flagged, not failed).
    """

    z_value: int
    lhs: float
    rhs: float
    ratio_min: float
    ratio_max: float
    jsd_value: float
    infinite_ratio: bool
    holds: bool


def _pinsker_record(z_value: int, p_test: np.ndarray, q_row: np.ndarray) -> PinskerBound:
    lhs = kl_divergence(p_test, q_row)
    jsd_value = jsd(p_test, q_row)
    relevant = (p_test > 0) | (q_row > 0)
    if np.any((p_test > 0) & (q_row <= 0)):
        return PinskerBound(z_value, lhs, math.inf, 0.0, math.inf, jsd_value, True, True)
    ratios = p_test[relevant & (q_row > 0)] / q_row[relevant & (q_row > 0)]
    m, big_m = float(ratios.min()), float(ratios.max())
    rhs = math.sqrt(2.0) * _ratio_coefficient(m, big_m) * math.sqrt(jsd_value)
    return PinskerBound(
        z_value, lhs, rhs, m, big_m, jsd_value, False, lhs <= rhs + INEQUALITY_SLACK
    )


def pinsker_latent_bound(
    joint_with_z: JointTable,
    classifier: Channel,
    z_value: int,
    target: str = "y",
    latent: str = "z",
    selection: str = "t",
) -> PinskerBound:
    """Evaluate the latent reverse-Pinsker bound at one representation value.

    Requires p(z=z|t=0) > 0 and p(z=z|t=1) > 0 (ZeroSupportZ otherwise).
    """
    if classifier.inputs != (latent,) or classifier.output[0] != target:
        raise SchemaMismatch("classifier must map the latent variable to the target")
    pzt = ordered_marginal(joint_with_z, (latent, selection))
    if not (pzt[z_value, 0] > 0 and pzt[z_value, 1] > 0):
        raise ZeroSupportZ(f"z={z_value} lacks support on one split")
    pytz = ordered_marginal(joint_with_z, (target, latent, selection))
    p_test = pytz[:, z_value, 0] / pzt[z_value, 0]
    return _pinsker_record(z_value, p_test, np.asarray(classifier.table[z_value]))


@dataclass(frozen=True)
class InequalityRecord:
    """One evaluated bound: holds iff lhs <= rhs + slack tolerance.

    For the chain identity record, holds means |lhs - rhs| <= IDENTITY_TOL.
    """

    name: str
    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def _leq(name: str, lhs: float, rhs: float) -> InequalityRecord:
    return InequalityRecord(name, lhs, rhs, lhs <= rhs + INEQUALITY_SLACK)


@dataclass(frozen=True)
class PropositionReport:
    """Numeric evaluation of the full inequality suite for one configuration."""

    alpha: float
    records: tuple[InequalityRecord, ...]
    latent_jsd_bounds: tuple[InequalityRecord, ...]
    pinsker_bounds: tuple[PinskerBound, ...]

    @property
    def all_hold(self) -> bool:
        return not self.violations()

    def violations(self) -> list[str]:
        bad = [r.name for r in self.records + self.latent_jsd_bounds if not r.holds]
        bad += [f"latent_reverse_pinsker[z={b.z_value}]" for b in self.pinsker_bounds if not b.holds]
        return bad

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "records": [
                {"name": r.name, "lhs": r.lhs, "rhs": r.rhs,
                 "slack": r.slack, "holds": r.holds}
                for r in self.records + self.latent_jsd_bounds
            ],
            "reverse_pinsker": [
                {"z": b.z_value, "lhs": b.lhs, "rhs": b.rhs,
                 "ratio_min": b.ratio_min, "ratio_max": b.ratio_max,
                 "jsd": b.jsd_value, "infinite_ratio": b.infinite_ratio,
                 "holds": b.holds}
                for b in self.pinsker_bounds
            ],
            "violations": self.violations(),
        }


def check_propositions(
    joint: JointTable,
    encoder: Channel,
    classifier: Channel | None = None,
    model: Channel | None = None,
    features: str = "xhat",
    target: str = "y",
    env: str = "e",
    selection: str = "t",
) -> PropositionReport:
    """Evaluate every inequality of the framework on one concrete configuration.

    `joint` must cover (features, target, env, selection) with the selection
    variable a function of env alone (as in all dataset variants here); the
    encoder maps features to a latent z. The classifier defaults to the
    train-optimal p(y|z, t=1) and the model defaults to the one induced by
    encoder and classifier.

    Scalar records:
      error_sum_floor            train KL + test KL >= I(y;t|x) / (1 - alpha)
      train_error_decomposition  train KL <= train info loss + latent train error
      test_error_decomposition   test KL <= test info loss + latent test error
      sufficiency_shift_bound    I(y;t|z) <= I(y;e|z)
      separation_shift_bound     I(y;t|z) <= I(y;t) + I(e;z|y)
      criteria_chain_identity    I(e;z|y) + I(e;y) = I(e;y|z) + I(e;z)

    Per-z records (positive-support z only): the JSD bound on the test
    predictive distribution and the reverse-Pinsker bound.
    """
    latent = encoder.output[0]
    pt = ordered_marginal(joint, (selection,))
    alpha = float(min(pt[0], pt[1]))
    ext = joint.extend_with_channel(encoder)

    # train-optimal latent classifier unless one is supplied; rows for z with
    # zero train mass carry no weight anywhere, fill them with the train label
    # marginal to keep the channel well formed
    pytz = ordered_marginal(ext, (target, latent, selection))
    pz_t = pytz.sum(axis=0)  # (z, t)
    if classifier is None:
        py_train = pytz[:, :, 1].sum(axis=1) / pz_t[:, 1].sum()
        safe = np.maximum(pz_t[:, 1], np.finfo(np.float64).tiny)
        rows = np.where(pz_t[:, 1:2] > 0, (pytz[:, :, 1] / safe).T, py_train)
        classifier = Channel((latent,), (target, joint.schema.cardinality(target)), rows)
    if model is None:
        model = Channel(
            (features,),
            (target, joint.schema.cardinality(target)),
            encoder.table @ classifier.table,
        )

    train = joint.condition({selection: 1})
    test = joint.condition({selection: 0})
    ext_train = ext.condition({selection: 1})
    ext_test = ext.condition({selection: 0})

    train_kl = kl_conditional(train, model, target, (features,))
    test_kl = kl_conditional(test, model, target, (features,))
    concept_shift = mutual_information(joint, (target,), (selection,), (features,))

    latent_cls_train = kl_conditional(ext_train, classifier, target, (latent,))
    latent_cls_test = kl_conditional(ext_test, classifier, target, (latent,))
    info_loss_train = mutual_information(ext_train, (features,), (target,), (latent,))
    info_loss_test = mutual_information(ext_test, (features,), (target,), (latent,))

    records = (
        _leq("error_sum_floor", concept_shift / (1.0 - alpha), train_kl + test_kl),
        _leq("train_error_decomposition", train_kl, info_loss_train + latent_cls_train),
        _leq("test_error_decomposition", test_kl, info_loss_test + latent_cls_test),
        _leq(
            "sufficiency_shift_bound",
            mutual_information(ext, (target,), (selection,), (latent,)),
            mutual_information(ext, (target,), (env,), (latent,)),
        ),
        _leq(
            "separation_shift_bound",
            mutual_information(ext, (target,), (selection,), (latent,)),
            mutual_information(ext, (target,), (selection,))
            + mutual_information(ext, (env,), (latent,), (target,)),
        ),
    )
    chain_lhs = mutual_information(ext, (env,), (latent,), (target,)) + mutual_information(
        ext, (env,), (target,)
    )
    chain_rhs = mutual_information(ext, (env,), (target,), (latent,)) + mutual_information(
        ext, (env,), (latent,)
    )
    records += (
        InequalityRecord(
            "criteria_chain_identity",
            chain_lhs,
            chain_rhs,
            abs(chain_lhs - chain_rhs) <= IDENTITY_TOL,
        ),
    )

    # per-z bounds, restricted to z with positive mass on both splits
    jsd_records: list[InequalityRecord] = []
    pinsker_records: list[PinskerBound] = []
    pz = pytz.sum(axis=(0, 2))
    for k in np.nonzero((pz_t[:, 0] > 0) & (pz_t[:, 1] > 0))[0]:
        cond_yt = pytz[:, k, :] / pz[k]  # p(y, t | z=k)
        py_k, pt_k = cond_yt.sum(axis=1), cond_yt.sum(axis=0)
        nz = cond_yt > 0
        latent_shift_k = float(
            (cond_yt[nz] * np.log(cond_yt[nz] / np.outer(py_k, pt_k)[nz])).sum()
        )
        p_train_k = pytz[:, k, 1] / pz_t[k, 1]
        p_test_k = pytz[:, k, 0] / pz_t[k, 0]
        q_row = np.asarray(classifier.table[k])
        train_term = kl_divergence(p_train_k, q_row)
        # the split weight must be the local one: at fixed z the pointwise
        # conditional MI decomposes with weights p(t|z=k), and an encoder can
        # skew those well below the global min_t p(t)
        alpha_k = float(pt_k.min())
        rhs = (
            math.sqrt(max(latent_shift_k, 0.0) / (2.0 * alpha_k))
            + math.sqrt(train_term / 2.0)
        ) ** 2 if math.isfinite(train_term) else math.inf
        jsd_records.append(_leq(f"latent_jsd_bound[z={k}]", jsd(p_test_k, q_row), rhs))
        pinsker_records.append(_pinsker_record(int(k), p_test_k, q_row))

    return PropositionReport(alpha, records, tuple(jsd_records), tuple(pinsker_records))


@dataclass(frozen=True)
class FuzzReport:
    """Outcome of a randomized sweep of check_propositions."""

    cases: int
    records_checked: int
    violations: tuple[dict, ...]

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "cases": self.cases,
            "records_checked": self.records_checked,
            "violations": list(self.violations),
            "clean": self.clean,
        }


def _random_encoder(rng: np.random.Generator, n_inputs: int, features: str) -> Channel:
    n_latent = int(rng.integers(1, 9))
    kind = rng.integers(4)
    if kind == 0:
        logits = rng.normal(0.0, rng.uniform(0.3, 3.0), (n_inputs, n_latent))
        shifted = logits - logits.max(axis=1, keepdims=True)
        table = np.exp(shifted)
        table /= table.sum(axis=1, keepdims=True)
    elif kind == 1:
        # deterministic: exact one-hot rows, possibly leaving z values unused
        table = np.zeros((n_inputs, n_latent))
        table[np.arange(n_inputs), rng.integers(n_latent, size=n_inputs)] = 1.0
    elif kind == 2:
        # nearly deterministic, all entries still positive
        table = np.full((n_inputs, n_latent), 1e-6)
        table[np.arange(n_inputs), rng.integers(n_latent, size=n_inputs)] = 1.0
        table /= table.sum(axis=1, keepdims=True)
    else:
        table = rng.dirichlet(np.full(n_latent, rng.uniform(0.2, 2.0)), size=n_inputs)
    return Channel((features,), ("z", n_latent), table)


def _random_classifier(
    rng: np.random.Generator, n_latent: int, n_target: int, target: str
) -> Channel | None:
    kind = rng.integers(4)
    if kind == 0:
        return None  # let check_propositions build the train-optimal one
    if kind == 1:
        # hard labels: exercises the infinite-KL and infinite-ratio branches
        table = np.zeros((n_latent, n_target))
        table[np.arange(n_latent), rng.integers(n_target, size=n_latent)] = 1.0
    else:
        table = rng.dirichlet(np.full(n_target, rng.uniform(0.3, 3.0)), size=n_latent)
    return Channel(("z",), (target, n_target), table)


def fuzz_propositions(
    joint: JointTable,
    cases: int,
    seed: int,
    features: str = "xhat",
    target: str = "y",
    env: str = "e",
    selection: str = "t",
) -> FuzzReport:
    """Run check_propositions on `cases` random encoder/classifier pairs.

    Encoders range from soft to exactly deterministic; classifiers include
    hard (zero-mass) rows so the infinite-KL code paths get exercised. Any
    record that fails its tolerance lands in the violations list.
    """
    rng = np.random.default_rng(seed)
    n_inputs = joint.schema.cardinality(features)
    n_target = joint.schema.cardinality(target)
    checked = 0
    violations: list[dict] = []
    for i in range(cases):
        encoder = _random_encoder(rng, n_inputs, features)
        classifier = _random_classifier(rng, encoder.output[1], n_target, target)
        report = check_propositions(
            joint, encoder, classifier=classifier,
            features=features, target=target, env=env, selection=selection,
        )
        checked += (
            len(report.records) + len(report.latent_jsd_bounds) + len(report.pinsker_bounds)
        )
        for rec in report.records + report.latent_jsd_bounds:
            if not rec.holds:
                violations.append(
                    {"case": i, "name": rec.name, "lhs": rec.lhs, "rhs": rec.rhs}
                )
        for pb in report.pinsker_bounds:
            if not pb.holds:
                violations.append(
                    {"case": i, "name": f"latent_reverse_pinsker[z={pb.z_value}]",
                     "lhs": pb.lhs, "rhs": pb.rhs}
                )
    return FuzzReport(cases=cases, records_checked=checked, violations=tuple(violations))
