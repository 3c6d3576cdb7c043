"""Layer manifests and flat parameter / gradient storage."""

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
import itertools
import math
from typing import Any, Literal, Self

import numpy as np

from .exceptions import ContractViolation, ShapeError

LayerKind = Literal["dense", "self-attention", "cross-attention", "layer-norm", "embedding"]
Activation = Literal["linear", "gelu"]

_tokens = itertools.count(1)


@dataclass(frozen=True)
class LayerSpec:
    """One manifest entry: named tensors of a layer in storage order."""

    name: str
    kind: LayerKind
    tensors: tuple[tuple[str, tuple[int, ...]], ...]
    activation: Activation = "linear"
    heads: int = 1

    @property
    def size(self) -> int:
        """Number of scalars in all tensors."""
        return sum(math.prod(shape) for _, shape in self.tensors)

    def shape(self, tensor: str) -> tuple[int, ...]:
        """Shape of a named tensor."""
        for name, shape in self.tensors:
            if name == tensor:
                return shape
        raise ShapeError(f"Layer {self.name} has no tensor {tensor!r}")

    def as_dict(self) -> dict[str, Any]:
        """JSON-friendly representation."""
        return {
            "name": self.name,
            "kind": self.kind,
            "tensors": [[name, list(shape)] for name, shape in self.tensors],
            "activation": self.activation,
            "heads": self.heads,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        """Inverse of as_dict."""
        return cls(
            name=data["name"],
            kind=data["kind"],
            tensors=tuple((name, tuple(shape)) for name, shape in data["tensors"]),
            activation=data.get("activation", "linear"),
            heads=data.get("heads", 1),
        )


def dense(name: str, n_in: int, n_out: int, activation: Activation = "linear", bias: bool = True) -> LayerSpec:
    """Spec of a dense layer y = act(x W + b)."""
    tensors: tuple[tuple[str, tuple[int, ...]], ...] = (("w", (n_in, n_out)),)
    if bias:
        tensors += (("b", (n_out,)),)
    return LayerSpec(name, "dense", tensors, activation)


def attention(name: str, dim: int, heads: int, cross: bool = False) -> LayerSpec:
    """Spec of a bias-free multi-head attention block."""
    if dim % heads:
        raise ShapeError(f"Attention width {dim} is not divisible by {heads} heads")
    kind: LayerKind = "cross-attention" if cross else "self-attention"
    tensors = tuple((t, (dim, dim)) for t in ("wq", "wk", "wv", "wo"))
    return LayerSpec(name, kind, tensors, heads=heads)


def layer_norm(name: str, dim: int) -> LayerSpec:
    """Spec of a layer norm over the last axis."""
    return LayerSpec(name, "layer-norm", (("gamma", (dim,)), ("beta", (dim,))))


def embedding(name: str, rows: int, dim: int) -> LayerSpec:
    """Spec of a lookup table."""
    return LayerSpec(name, "embedding", (("table", (rows, dim)),))


@dataclass(frozen=True)
class Manifest:
    """Ordered layer specs with the flat offset of every tensor."""

    layers: tuple[LayerSpec, ...]
    offsets: dict[tuple[str, str], tuple[int, tuple[int, ...]]] = field(
        init=False, repr=False, compare=False
    )
    size: int = field(init=False, compare=False)

    def __post_init__(self) -> None:
        """Compute tensor offsets."""
        offsets: dict[tuple[str, str], tuple[int, tuple[int, ...]]] = {}
        position = 0
        seen: set[str] = set()
        for layer in self.layers:
            if layer.name in seen:
                raise ShapeError(f"Duplicate layer name {layer.name!r}")
            seen.add(layer.name)
            for tensor, shape in layer.tensors:
                offsets[(layer.name, tensor)] = (position, shape)
                position += math.prod(shape)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "size", position)

    @classmethod
    def of(cls, layers: Iterable[LayerSpec]) -> Self:
        """Build a manifest from layer specs."""
        return cls(tuple(layers))

    def __iter__(self) -> Iterator[LayerSpec]:
        """Iterate the layers in order."""
        return iter(self.layers)

    def layer(self, name: str) -> LayerSpec:
        """Spec of a named layer."""
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise ShapeError(f"No layer named {name!r}")

    def slice(self, layer: str, tensor: str) -> tuple[slice, tuple[int, ...]]:
        """Flat slice and shape of a tensor."""
        try:
            start, shape = self.offsets[(layer, tensor)]
        except KeyError as err:
            raise ShapeError(f"No tensor {layer}.{tensor} in manifest") from err
        return slice(start, start + math.prod(shape)), shape

    def as_list(self) -> list[dict[str, Any]]:
        """JSON-friendly representation."""
        return [layer.as_dict() for layer in self.layers]

    @classmethod
    def from_list(cls, data: Sequence[dict[str, Any]]) -> Self:
        """Inverse of as_list."""
        return cls(tuple(LayerSpec.from_dict(d) for d in data))


class ParameterSet:
    """Immutable flat float64 parameters described by a manifest.

    Every instance carries a unique token; forward caches remember it so that
    a backward pass against other parameters is detected.
    """

    __slots__ = ("_values", "manifest", "token")

    def __init__(self, manifest: Manifest, values: np.ndarray) -> None:
        """Initialize the parameter set.

        Raises:
            ShapeError: If the flat length does not match the manifest.
            ContractViolation: If a value is not finite.

        """
        values = np.array(values, dtype=np.float64).reshape(-1)
        if values.shape[0] != manifest.size:
            raise ShapeError(f"Expected {manifest.size} parameters, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ContractViolation("Parameters must be finite")
        values.setflags(write=False)
        self._values = values
        self.manifest = manifest
        self.token = next(_tokens)

    @classmethod
    def zeros(cls, manifest: Manifest) -> Self:
        """All-zero parameters."""
        return cls(manifest, np.zeros(manifest.size))

    @classmethod
    def initialize(cls, manifest: Manifest, rng: np.random.Generator, scale: float = 1.0) -> Self:
        """Fan-in scaled Gaussian weights, zero biases, unit layer-norm gains."""
        values = np.zeros(manifest.size)
        for layer in manifest:
            for tensor, shape in layer.tensors:
                region, _ = manifest.slice(layer.name, tensor)
                if tensor == "gamma":
                    values[region] = 1.0
                elif tensor in ("b", "beta"):
                    continue
                elif tensor == "table":
                    values[region] = rng.normal(0.0, 0.02 * scale, math.prod(shape))
                else:
                    std = scale / math.sqrt(shape[0])
                    values[region] = rng.normal(0.0, std, math.prod(shape))
        return cls(manifest, values)

    @property
    def values(self) -> np.ndarray:
        """Read-only flat array."""
        return self._values

    def __len__(self) -> int:
        """Number of parameters."""
        return self._values.shape[0]

    def view(self, layer: str, tensor: str) -> np.ndarray:
        """Read-only shaped view of one tensor."""
        region, shape = self.manifest.slice(layer, tensor)
        return self._values[region].reshape(shape)

    def replace(self, values: np.ndarray) -> Self:
        """New parameter set with the same manifest."""
        return type(self)(self.manifest, values)

    def __repr__(self) -> str:
        """Get the string representation of the parameter set."""
        return f"ParameterSet(layers={len(self.manifest.layers)}, size={len(self)})"


class GradientSet:
    """Flat gradient aligned with a ParameterSet, plus optional input gradients."""

    __slots__ = ("context_grad", "input_grad", "manifest", "values")

    def __init__(
        self,
        manifest: Manifest,
        values: np.ndarray | None = None,
        input_grad: np.ndarray | None = None,
        context_grad: np.ndarray | None = None,
    ) -> None:
        """Initialize the gradient, zero-filled when no values are given."""
        self.manifest = manifest
        self.values = np.zeros(manifest.size) if values is None else np.asarray(values, dtype=np.float64)
        if self.values.shape != (manifest.size,):
            raise ShapeError(f"Gradient length {self.values.shape} does not match {manifest.size}")
        self.input_grad = input_grad
        self.context_grad = context_grad

    @classmethod
    def like(cls, params: ParameterSet) -> Self:
        """Zero gradient for a parameter set."""
        return cls(params.manifest)

    def view(self, layer: str, tensor: str) -> np.ndarray:
        """Writable shaped view of one tensor's gradient."""
        region, shape = self.manifest.slice(layer, tensor)
        return self.values[region].reshape(shape)

    def accumulate(self, layer: str, tensor: str, grad: np.ndarray) -> None:
        """Add into one tensor's gradient."""
        region, _ = self.manifest.slice(layer, tensor)
        self.values[region] += np.asarray(grad).reshape(-1)

    def __add__(self, other: "GradientSet") -> "GradientSet":
        """Sum of two aligned gradients."""
        if other.manifest is not self.manifest and other.manifest != self.manifest:
            raise ShapeError("Cannot add gradients of different manifests")
        return GradientSet(self.manifest, self.values + other.values)

    def scaled(self, factor: float) -> "GradientSet":
        """Gradient multiplied by a scalar."""
        return GradientSet(self.manifest, self.values * factor)

    def is_finite(self) -> bool:
        """Whether every entry is finite."""
        return bool(np.all(np.isfinite(self.values)))

    def norm(self) -> float:
        """Euclidean norm."""
        return float(np.linalg.norm(self.values))
