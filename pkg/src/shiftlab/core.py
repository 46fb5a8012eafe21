"""Joint probability tables and conditional channels over named finite variables.

Everything downstream (information measures, dataset constructions, encoder
objectives) manipulates probability mass through the two value types defined
here. Tables are dense float64 tensors, axes ordered as the schema lists its
variables. All instances in this project stay below ~16k states, so dense
storage is cheap and exact.

Values are immutable: arrays are copied on construction and marked read-only,
so tables can be shared freely.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NegativeProbability,
    NotNormalized,
    ShapeMismatch,
    StateLimitExceeded,
    UnknownVariable,
    VariableCollision,
    ZeroProbabilityEvidence,
)

# Construction-time check on total mass; deviations beyond this are an error,
# never silently renormalized.
NORMALIZATION_TOL = 1e-9
# Channel rows come from softmax or exact division, both accurate to ~1e-15.
ROW_SUM_TOL = 1e-12
DEFAULT_STATE_LIMIT = 10**7

_AXIS_LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class VariableSchema:
    """Ordered list of (name, cardinality) pairs defining a variable universe."""

    variables: tuple[tuple[str, int], ...]
    state_limit: int = field(default=DEFAULT_STATE_LIMIT, compare=False, repr=False)

    def __init__(self, variables, state_limit: int = DEFAULT_STATE_LIMIT):
        object.__setattr__(self, "variables", tuple((str(n), int(k)) for n, k in variables))
        object.__setattr__(self, "state_limit", int(state_limit))
        names = [n for n, _ in self.variables]
        if len(set(names)) != len(names):
            raise VariableCollision(f"duplicate variable names in {names}")
        for n, k in self.variables:
            if k < 1:
                raise ShapeMismatch(f"variable {n!r} has cardinality {k}; must be >= 1")
        if self.state_count > self.state_limit:
            raise StateLimitExceeded(
                f"{self.state_count} states exceeds limit {self.state_limit}"
            )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.variables)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(k for _, k in self.variables)

    @property
    def state_count(self) -> int:
        count = 1
        for _, k in self.variables:
            count *= k
        return count

    def axis(self, name: str) -> int:
        for i, (n, _) in enumerate(self.variables):
            if n == name:
                return i
        raise UnknownVariable(f"variable {name!r} not in schema {self.names}")

    def cardinality(self, name: str) -> int:
        return self.variables[self.axis(name)][1]

    def subset(self, keep: Iterable[str]) -> "VariableSchema":
        """Sub-schema of the named variables, preserving this schema's order."""
        keep = set(keep)
        for name in keep:
            self.axis(name)  # raises UnknownVariable
        return VariableSchema(
            tuple((n, k) for n, k in self.variables if n in keep), self.state_limit
        )


@dataclass(frozen=True)
class JointTable:
    """Dense joint probability mass function over a schema's variables.

    Entries are nonnegative and sum to 1 within NORMALIZATION_TOL; both are
    checked on every construction path.
    """

    schema: VariableSchema
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.shape != self.schema.shape:
            raise ShapeMismatch(
                f"probs shape {probs.shape} does not match schema shape {self.schema.shape}"
            )
        if np.any(probs < 0):
            raise NegativeProbability(f"min entry {probs.min()} is negative")
        total = probs.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise NotNormalized(f"total mass {total!r} deviates from 1 beyond tolerance")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def names(self) -> tuple[str, ...]:
        return self.schema.names

    def marginal(self, keep: Iterable[str]) -> "JointTable":
        """Sum out every variable not in `keep`; keeping everything is the identity."""
        keep = set(keep)
        axes = tuple(self.schema.axis(n) for n in keep)
        drop = tuple(i for i in range(self.probs.ndim) if i not in axes)
        probs = self.probs.sum(axis=drop) if drop else self.probs
        return JointTable(self.schema.subset(keep), probs)

    def marginal_array(self, keep: Iterable[str]) -> np.ndarray:
        """Marginal probabilities as a bare array (axes in schema order)."""
        return self.marginal(keep).probs

    def condition(self, evidence: Mapping[str, int]) -> "JointTable":
        """Condition on a partial assignment; evidence variables are removed.

        Raises ZeroProbabilityEvidence when the evidence event carries no mass.
        """
        if not evidence:
            return self
        index: list[object] = [slice(None)] * self.probs.ndim
        for name, value in evidence.items():
            axis = self.schema.axis(name)
            card = self.schema.cardinality(name)
            if not 0 <= int(value) < card:
                raise UnknownVariable(f"value {value} out of range for {name!r} (0..{card - 1})")
            index[axis] = int(value)
        sliced = self.probs[tuple(index)]
        mass = sliced.sum()
        if mass <= 0.0:
            raise ZeroProbabilityEvidence(f"evidence {dict(evidence)} has probability 0")
        remaining = self.schema.subset(set(self.names) - set(evidence))
        return JointTable(remaining, sliced / mass)

    def extend_with_channel(self, channel: "Channel") -> "JointTable":
        """Append channel output: p'(.., out) = p(..) * q(out | inputs)."""
        out_name, out_card = channel.output
        if out_name in self.names:
            raise VariableCollision(f"variable {out_name!r} already present")
        axes = [self.schema.axis(n) for n in channel.inputs]  # raises UnknownVariable
        for name, card in zip(channel.inputs, channel.input_shape):
            if self.schema.cardinality(name) != card:
                raise ShapeMismatch(
                    f"channel expects {name!r} with {card} states, "
                    f"schema has {self.schema.cardinality(name)}"
                )
        n = self.probs.ndim
        joint_sub = _AXIS_LETTERS[:n]
        out_letter = _AXIS_LETTERS[n]
        chan_sub = "".join(joint_sub[a] for a in axes) + out_letter
        probs = np.einsum(f"{joint_sub},{chan_sub}->{joint_sub}{out_letter}",
                          self.probs, channel.table)
        schema = VariableSchema(
            self.schema.variables + ((out_name, out_card),), self.schema.state_limit
        )
        return JointTable(schema, probs)


def make_joint(schema: VariableSchema, probs) -> JointTable:
    """Validated JointTable from a raw tensor. Does not renormalize."""
    return JointTable(schema, np.asarray(probs, dtype=np.float64))


@dataclass(frozen=True)
class Channel:
    """Conditional distribution q(output | inputs) as a dense tensor.

    `table` has one axis per input (in `inputs` order) plus a trailing output
    axis; each output slice sums to 1.
    """

    inputs: tuple[str, ...]
    output: tuple[str, int]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "output", (self.output[0], int(self.output[1])))
        table = np.array(self.table, dtype=np.float64)
        if table.ndim != len(self.inputs) + 1:
            raise ShapeMismatch(
                f"table has {table.ndim} axes, expected {len(self.inputs) + 1}"
            )
        if table.shape[-1] != self.output[1]:
            raise ShapeMismatch(
                f"output axis has {table.shape[-1]} states, declared {self.output[1]}"
            )
        if np.any(table < 0):
            raise NegativeProbability(f"min entry {table.min()} is negative")
        row_sums = table.sum(axis=-1)
        worst = np.abs(row_sums - 1.0).max()
        if worst > ROW_SUM_TOL:
            raise NotNormalized(f"output slices deviate from 1 by up to {worst!r}")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self.table.shape[:-1]


def conditional_channel(joint: JointTable, output: str, inputs: Iterable[str]) -> Channel:
    """Extract q(output | inputs) from a joint by exact division.

    Input assignments with zero marginal mass get uniform rows; they carry no
    weight in any expectation under the source joint.
    """
    inputs = tuple(inputs)
    keep = inputs + (output,)
    sub = joint.marginal(keep)
    # reorder marginal axes to (inputs..., output)
    order = [sub.schema.axis(n) for n in keep]
    block = np.transpose(sub.probs, order)
    denom = block.sum(axis=-1, keepdims=True)
    out_card = joint.schema.cardinality(output)
    safe = np.where(denom > 0, denom, 1.0)
    table = np.where(denom > 0, block / safe, 1.0 / out_card)
    return Channel(inputs, (output, out_card), table)
