"""The three CMNIST generative processes, their measurement table, and sampling.

Each variant is an exact discrete joint over environment e (3 states), digit d
(10), label y (2), color c (2), and the selection bit t (train split t=1,
test split t=0). Pictures are reduced to their sufficient statistic: the
(color, digit) pair, indexed as xhat = c*10 + d.

All probability tables are written out as exact fractions of small integers,
so every downstream quantity is reproducible to float64 accuracy.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass

import numpy as np

from .core import Channel, JointTable, VariableSchema, conditional_channel
from .infotheory import mutual_information

__all__ = [
    "DatasetVariant",
    "SampleRecord",
    "build_joint",
    "sufficient_statistic_view",
    "measurement_table",
    "MEASUREMENT_QUANTITIES",
    "sample",
    "export_records",
    "read_records",
    "write_metadata",
    "XHAT_STATES",
]

XHAT_STATES = 20  # (color, digit) pairs

# p(c=1 | y, e): color-label correlation is positive on the first two
# environments and flips on the third; shared by all variants.
_COLOR_FLIP = np.array([
    [9 / 10, 4 / 5, 1 / 10],   # y = 0
    [1 / 10, 1 / 5, 9 / 10],   # y = 1
])

# p(y | d): digits 5-9 carry label 1 with probability 3/4, digits 0-4 with 1/4.
_LABEL_GIVEN_DIGIT = np.array(
    [[3 / 4, 1 / 4] if d < 5 else [1 / 4, 3 / 4] for d in range(10)]
)

# group weights p(d in [0,4] | .) used by the shifted variants
_LOW_DIGIT_GIVEN_ENV = np.array([3 / 5, 1 / 5, 1 / 2])
_LOW_DIGIT_GIVEN_LABEL = np.array([3 / 4, 1 / 4])

_SKEWED_ENV = np.array([1 / 2, 1 / 6, 1 / 3])


class DatasetVariant(enum.Enum):
    CMNIST = "cmnist"
    D_CMNIST = "d-cmnist"
    Y_CMNIST = "y-cmnist"

    @classmethod
    def parse(cls, text: str) -> "DatasetVariant":
        return cls(text.strip().lower())


_SCHEMA = VariableSchema((("e", 3), ("d", 10), ("y", 2), ("c", 2), ("t", 2)))


def _digit_table(low_weight: np.ndarray) -> np.ndarray:
    """Spread group mass uniformly over the five digits of each group."""
    out = np.empty((len(low_weight), 10))
    out[:, :5] = low_weight[:, None] / 5
    out[:, 5:] = (1 - low_weight)[:, None] / 5
    return out


def build_joint(variant: DatasetVariant) -> JointTable:
    """Exact joint p(e, d, y, c, t) for one dataset variant.

    CMNIST factorizes as p(e) p(d) p(y|d) p(c|y,e) p(t|e); the d-shifted
    variant reroutes digits through the environment (p(d|e)) and the y-shifted
    variant reroutes labels (p(y|e), then p(d|y)). The first two environments
    are always the training split.
    """
    e_idx = np.arange(3)
    t_of_e = (e_idx < 2).astype(float)  # p(t=1|e)
    probs = np.zeros((3, 10, 2, 2, 2))
    for e in range(3):
        for d in range(10):
            for y in range(2):
                if variant is DatasetVariant.CMNIST:
                    base = (1 / 3) * (1 / 10) * _LABEL_GIVEN_DIGIT[d, y]
                elif variant is DatasetVariant.D_CMNIST:
                    p_d_e = _digit_table(_LOW_DIGIT_GIVEN_ENV)[e, d]
                    base = _SKEWED_ENV[e] * p_d_e * _LABEL_GIVEN_DIGIT[d, y]
                elif variant is DatasetVariant.Y_CMNIST:
                    p_y_e = _LOW_DIGIT_GIVEN_ENV[e] if y == 0 else 1 - _LOW_DIGIT_GIVEN_ENV[e]
                    p_d_y = _digit_table(_LOW_DIGIT_GIVEN_LABEL)[y, d]
                    base = _SKEWED_ENV[e] * p_y_e * p_d_y
                else:  # pragma: no cover - closed enumeration
                    raise ValueError(variant)
                c1 = _COLOR_FLIP[y, e]
                probs[e, d, y, 0, 1] = base * (1 - c1) * t_of_e[e]
                probs[e, d, y, 1, 1] = base * c1 * t_of_e[e]
                probs[e, d, y, 0, 0] = base * (1 - c1) * (1 - t_of_e[e])
                probs[e, d, y, 1, 0] = base * c1 * (1 - t_of_e[e])
    return JointTable(_SCHEMA, probs)


def xhat_channel() -> Channel:
    """Deterministic channel folding (c, d) into the 20-state statistic."""
    table = np.zeros((2, 10, XHAT_STATES))
    for c in range(2):
        for d in range(10):
            table[c, d, c * 10 + d] = 1.0
    return Channel(("c", "d"), ("xhat", XHAT_STATES), table)


def sufficient_statistic_view(joint: JointTable, keep: tuple[str, ...] = ()) -> JointTable:
    """Joint over (xhat, y, e, t), optionally retaining extra raw variables.

    xhat = c*10 + d is a bijection of the (color, digit) pair, so every
    information quantity involving the picture equals the same quantity on
    xhat.
    """
    extended = joint.extend_with_channel(xhat_channel())
    return extended.marginal(("xhat", "y", "e", "t") + keep)


# label -> (mutual-information arguments, condition on train split?)
MEASUREMENT_QUANTITIES: tuple[tuple[str, tuple, bool], ...] = (
    ("I(y;t|x)", (("y",), ("t",), ("xhat",)), False),
    ("I(y;t|c)", (("y",), ("t",), ("c",)), False),
    ("I(y;t|d)", (("y",), ("t",), ("d",)), False),
    ("I(y;t)", (("y",), ("t",), ()), False),
    ("I_t1(e;x)", (("e",), ("xhat",), ()), True),
    ("I_t1(e;c)", (("e",), ("c",), ()), True),
    ("I_t1(e;d)", (("e",), ("d",), ()), True),
    ("I_t1(y;e)", (("y",), ("e",), ()), True),
    ("I_t1(y;e|x)", (("y",), ("e",), ("xhat",)), True),
    ("I_t1(y;e|c)", (("y",), ("e",), ("c",)), True),
    ("I_t1(y;e|d)", (("y",), ("e",), ("d",)), True),
    ("I_t1(e;x|y)", (("e",), ("xhat",), ("y",)), True),
    ("I_t1(e;c|y)", (("e",), ("c",), ("y",)), True),
    ("I_t1(e;d|y)", (("e",), ("d",), ("y",)), True),
)


def measurement_table(variant: DatasetVariant) -> dict[str, float]:
    """The 14 dataset information quantities, exactly enumerated, in nats."""
    full = build_joint(variant).extend_with_channel(xhat_channel())
    train = full.condition({"t": 1})
    out: dict[str, float] = {}
    for label, (a, b, given), on_train in MEASUREMENT_QUANTITIES:
        source = train if on_train else full
        out[label] = mutual_information(source, a, b, given)
    return out


@dataclass(frozen=True)
class SampleRecord:
    """One drawn observation; t is redundant given e but kept for export."""

    d: int
    c: int
    y: int
    e: int
    t: int


def sample(variant: DatasetVariant, n: int, seed: int, split: int = 1) -> list[SampleRecord]:
    """Draw n i.i.d. records from p(d, c, y, e | t=split).

    Two-stage ancestral draw: the digit comes from p(d|t) first, then
    (c, e, y) from the Bayes-rule conditional p(c, e, y | d, t). Deterministic
    given the seed (PCG64 stream).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    joint = build_joint(variant).condition({"t": split})  # over (e,d,y,c)
    p_digit = joint.marginal_array(("d",))
    # p(c,e,y | d): flatten (e,y,c) in a fixed order per digit
    block = np.transpose(joint.probs, (1, 0, 2, 3)).reshape(10, 12)  # d x (e,y,c)
    cond = block / block.sum(axis=1, keepdims=True)
    rng = np.random.default_rng(seed)
    digits = rng.choice(10, size=n, p=p_digit)
    u = rng.random(n)
    cum = np.cumsum(cond, axis=1)
    # inverse-CDF lookup; the clip guards u landing above the last cumsum ulp
    cells = np.minimum((u[:, None] > cum[digits]).sum(axis=1), cond.shape[1] - 1)
    e, rem = np.divmod(cells, 4)
    y, c = np.divmod(rem, 2)
    t = int(split)
    return [
        SampleRecord(int(dv), int(cv), int(yv), int(ev), t)
        for dv, cv, yv, ev in zip(digits, c, y, e)
    ]


def export_records(records: list[SampleRecord], path: str) -> None:
    """Write records as CSV with header d,c,y,e,t and LF line endings."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["d", "c", "y", "e", "t"])
        for r in records:
            writer.writerow([r.d, r.c, r.y, r.e, r.t])


def read_records(path: str) -> list[SampleRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            SampleRecord(int(row["d"]), int(row["c"]), int(row["y"]),
                         int(row["e"]), int(row["t"]))
            for row in reader
        ]


def write_metadata(path: str, variant: DatasetVariant, n: int, seed: int, split: int) -> None:
    """JSON sidecar describing a sample file; the generator id names the PRNG."""
    payload = {
        "variant": variant.value,
        "n": n,
        "seed": seed,
        "split": split,
        "generator": "numpy-default_rng-pcg64",
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dataset_conditional(variant: DatasetVariant, output: str, inputs: tuple[str, ...],
                        split: int | None = 1) -> Channel:
    """Exact conditional channel from one variant, optionally per split."""
    joint = build_joint(variant)
    if split is not None:
        joint = joint.condition({"t": split})
    return conditional_channel(joint, output, inputs)
