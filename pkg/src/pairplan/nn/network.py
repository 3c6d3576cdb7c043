"""Sequential stacks of primitive layers."""

from dataclasses import dataclass
import logging
from typing import Any

import numpy as np

from .exceptions import ContractViolation, ShapeError
from .layers import (
    attention_backward,
    attention_forward,
    dense_backward,
    dense_forward,
    layer_norm_backward,
    layer_norm_forward,
)
from .params import GradientSet, Manifest, ParameterSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForwardCache:
    """Per-layer caches of one forward pass and the parameters it ran against."""

    token: int
    layers: tuple[Any, ...]
    has_context: bool


class Sequential:
    """Applies the manifest's layers in order.

    Dense and layer-norm layers act on the last axis. Self-attention attends
    over the rows of a 2-D input; cross-attention attends from the rows to a
    context matrix. Embedding layers are lookup tables and cannot be chained.
    """

    def __init__(self, manifest: Manifest) -> None:
        """Initialize the network."""
        for layer in manifest:
            if layer.kind == "embedding":
                raise ShapeError(f"Embedding layer {layer.name} cannot be applied sequentially")
        self.manifest = manifest

    def input_dim(self) -> int:
        """Width of the input's last axis."""
        first = self.manifest.layers[0]
        return first.shape("w")[0] if first.kind == "dense" else first.tensors[0][1][0]

    def forward(
        self, params: ParameterSet, inputs: np.ndarray, context: np.ndarray | None = None
    ) -> tuple[np.ndarray, ForwardCache]:
        """Run the stack.

        Raises:
            ShapeError: On a dimension mismatch or a missing cross-attention context.

        """
        if params.manifest != self.manifest:
            raise ShapeError("Parameters do not belong to this network")
        x = np.asarray(inputs, dtype=np.float64)
        caches: list[Any] = []
        for layer in self.manifest:
            match layer.kind:
                case "dense":
                    b = params.view(layer.name, "b") if len(layer.tensors) > 1 else None
                    x, cache = dense_forward(params.view(layer.name, "w"), b, x, layer.activation)
                case "layer-norm":
                    x, cache = layer_norm_forward(
                        params.view(layer.name, "gamma"), params.view(layer.name, "beta"), x
                    )
                case "self-attention" | "cross-attention":
                    if layer.kind == "cross-attention" and context is None:
                        raise ShapeError(f"Layer {layer.name} needs a context")
                    source = x if layer.kind == "self-attention" else np.asarray(context)
                    x, cache = attention_forward(
                        *(params.view(layer.name, t) for t in ("wq", "wk", "wv", "wo")),
                        x,
                        source,
                        layer.heads,
                    )
            caches.append(cache)
        return x, ForwardCache(params.token, tuple(caches), context is not None)

    def backward(
        self, params: ParameterSet, cache: ForwardCache, output_grad: np.ndarray
    ) -> GradientSet:
        """Reverse-mode gradients of the stack.

        The returned set carries the input gradient and, when a context was
        used, the context gradient.

        Raises:
            ContractViolation: If the cache came from other parameters.

        """
        if cache.token != params.token:
            raise ContractViolation("Forward cache is stale for these parameters")
        grads = GradientSet.like(params)
        dx = np.asarray(output_grad, dtype=np.float64)
        dcontext: np.ndarray | None = None
        for layer, layer_cache in zip(reversed(self.manifest.layers), reversed(cache.layers), strict=True):
            match layer.kind:
                case "dense":
                    dx, dw, db = dense_backward(params.view(layer.name, "w"), layer_cache, dx)
                    grads.accumulate(layer.name, "w", dw)
                    if len(layer.tensors) > 1:
                        grads.accumulate(layer.name, "b", db)
                case "layer-norm":
                    dx, dgamma, dbeta = layer_norm_backward(layer_cache, dx)
                    grads.accumulate(layer.name, "gamma", dgamma)
                    grads.accumulate(layer.name, "beta", dbeta)
                case "self-attention" | "cross-attention":
                    dxq, dxkv, weights = attention_backward(
                        *(params.view(layer.name, t) for t in ("wq", "wk", "wv", "wo")),
                        layer_cache,
                        dx,
                    )
                    for tensor, g in weights.items():
                        grads.accumulate(layer.name, tensor, g)
                    if layer.kind == "self-attention":
                        dx = dxq + dxkv
                    else:
                        dx = dxq
                        dcontext = dxkv if dcontext is None else dcontext + dxkv
        grads.input_grad = dx
        grads.context_grad = dcontext
        return grads
