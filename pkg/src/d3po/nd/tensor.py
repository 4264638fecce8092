"""Dense float64 tensors and named parameter sets.

A Tensor is a thin invariant-enforcing wrapper over a C-contiguous float64
ndarray: finite everywhere, shape/data length consistent by construction.
ParamSet is an ordered name->Tensor map with a role; reference-role sets are
deep-frozen (numpy writeable flag cleared) so accidental mutation raises.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np


class ShapeError(ValueError):
    """Raised when an operation receives incompatibly shaped arguments."""


def require_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite values in {what}")


def as_f64(data, what: str = "tensor") -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    require_finite(arr, what)
    return arr


class Tensor:
    """Finite float64 array in row-major order."""

    __slots__ = ("data",)

    def __init__(self, data, check: bool = True):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if check:
            require_finite(arr, "Tensor")
        self.data = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), check=False)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


TRAINABLE = "trainable"
REFERENCE = "reference"


class ParamSet:
    """Ordered map of named tensors with a trainable/reference role.

    Iteration order is insertion order and therefore deterministic.  A
    reference-role set has every backing array marked read-only.
    """

    def __init__(self, role: str = TRAINABLE):
        if role not in (TRAINABLE, REFERENCE):
            raise ValueError(f"unknown role {role!r}")
        self.role = role
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> None:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        if self.role == REFERENCE:
            tensor.data.setflags(write=False)
        self._entries[name] = tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._entries.items())

    def require_trainable(self, what: str) -> None:
        if self.role != TRAINABLE:
            raise PermissionError(f"{what} requires a trainable ParamSet, got role={self.role}")

    def n_scalars(self) -> int:
        return sum(t.size for _, t in self.items())

    def copy(self, role: str | None = None) -> "ParamSet":
        out = ParamSet(role=role or self.role)
        for name, t in self.items():
            out.add(name, t.copy())
        return out

    def freeze(self) -> "ParamSet":
        """Deep copy with reference role; the copy rejects mutation."""
        return self.copy(role=REFERENCE)

    def allclose(self, other: "ParamSet", rtol: float = 0.0, atol: float = 0.0) -> bool:
        if self.names() != other.names():
            return False
        return all(
            np.allclose(t.data, other[name].data, rtol=rtol, atol=atol)
            for name, t in self.items()
        )

    def equal_bitwise(self, other: "ParamSet") -> bool:
        if self.names() != other.names():
            return False
        return all(np.array_equal(t.data, other[name].data) for name, t in self.items())
