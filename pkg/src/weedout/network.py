"""The overparameterized parent network: layer stack, masked passes, SGD.

A network is a flat list of :class:`LayerSpec` plus per-layer parameter
tensors. Sparsity is applied at run time: each maskable layer's output is
multiplied by a binary node mask (structured mode) or its weight tensor is
multiplied by a binary weight mask (unstructured mode). Backpropagation is
hand-written per layer kind, which keeps the masked gradient flow exact:
weights incident only to deactivated nodes receive gradients that are zero
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .errors import MaskMismatchError, ShapeMismatchError, SpecValidationError
from .numerics import RngStream, Tensor, he_normal

if TYPE_CHECKING:
    from .sparsity import MaskSet

PARAM_KINDS = ("dense", "conv2d")
LAYER_KINDS = PARAM_KINDS + ("relu", "flatten")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the stack.

    ``width`` is the output feature count: units for dense layers, output
    channels for conv2d. ``maskable`` marks layers whose output nodes may be
    deactivated; the final logits layer must never be maskable.
    """

    kind: str
    width: int | None = None
    kernel_size: int | None = None
    stride: int = 1
    maskable: bool = False


def dense(width: int, maskable: bool = True) -> LayerSpec:
    return LayerSpec("dense", width=width, maskable=maskable)


def conv2d(channels: int, kernel_size: int, stride: int = 1, maskable: bool = True) -> LayerSpec:
    return LayerSpec("conv2d", width=channels, kernel_size=kernel_size,
                     stride=stride, maskable=maskable)


def relu_layer() -> LayerSpec:
    return LayerSpec("relu")


def flatten_layer() -> LayerSpec:
    return LayerSpec("flatten")


def default_conv_spec(num_classes: int = 10) -> list[LayerSpec]:
    """Desk-scale conv architecture: two conv blocks then two dense layers."""
    return [
        conv2d(16, 3), relu_layer(),
        conv2d(32, 3), relu_layer(),
        flatten_layer(),
        dense(128), relu_layer(),
        dense(num_classes, maskable=False),
    ]


def default_dense_spec(num_classes: int = 10, hidden: tuple[int, ...] = (64, 32)) -> list[LayerSpec]:
    """Desk-scale dense architecture for vector inputs."""
    spec: list[LayerSpec] = []
    for width in hidden:
        spec.append(dense(width))
        spec.append(relu_layer())
    spec.append(dense(num_classes, maskable=False))
    return spec


def layer_output_shapes(spec: list[LayerSpec], input_shape) -> list[tuple[int, ...]]:
    """Shape after each layer, validating the stack along the way."""
    spec = list(spec)
    if not spec:
        raise SpecValidationError("layer stack is empty")
    shape = tuple(int(s) for s in input_shape)
    if not shape or any(s < 1 for s in shape):
        raise SpecValidationError(f"invalid input shape {shape}")
    shapes: list[tuple[int, ...]] = []
    for i, layer in enumerate(spec):
        where = f"layer {i} ({layer.kind})"
        if layer.kind == "conv2d":
            if len(shape) != 3:
                raise SpecValidationError(f"{where}: expects [H, W, C] input, got {shape}")
            if layer.width is None or layer.width < 1:
                raise SpecValidationError(f"{where}: channel count must be positive")
            k, s = layer.kernel_size, layer.stride
            if k is None or k < 1 or s < 1:
                raise SpecValidationError(f"{where}: bad kernel/stride ({k}, {s})")
            h, w, _ = shape
            if h < k or w < k:
                raise SpecValidationError(f"{where}: kernel {k} exceeds input {h}x{w}")
            shape = ((h - k) // s + 1, (w - k) // s + 1, layer.width)
        elif layer.kind == "dense":
            if len(shape) != 1:
                raise SpecValidationError(
                    f"{where}: expects flat input, got {shape} (missing flatten?)")
            if layer.width is None or layer.width < 1:
                raise SpecValidationError(f"{where}: width must be positive")
            shape = (layer.width,)
        elif layer.kind == "relu":
            pass
        elif layer.kind == "flatten":
            shape = (int(np.prod(shape)),)
        else:
            raise SpecValidationError(f"{where}: unknown layer kind {layer.kind!r}")
        shapes.append(shape)
    last = spec[-1]
    if last.kind != "dense":
        raise SpecValidationError("final layer must be a dense logits layer")
    if last.maskable:
        raise SpecValidationError("the logits layer must not be maskable")
    return shapes


def maskable_indices(spec: list[LayerSpec]) -> list[int]:
    return [i for i, layer in enumerate(spec)
            if layer.kind in PARAM_KINDS and layer.maskable]


@dataclass
class LayerParams:
    weight: Tensor
    bias: Tensor


Gradients = list  # list[LayerParams | None], congruent with Network.params


@dataclass
class Network:
    """Layer stack with materialized parameters.

    Before any training, ``init_network(spec, input_shape, init_seed)``
    reconstructs ``params`` bit-exactly.
    """

    spec: list[LayerSpec]
    input_shape: tuple[int, ...]
    params: list[LayerParams | None]
    init_seed: int

    @property
    def num_classes(self) -> int:
        return self.spec[-1].width

    def copy(self) -> "Network":
        params = [LayerParams(p.weight.copy(), p.bias.copy()) if p is not None else None
                  for p in self.params]
        return Network(list(self.spec), tuple(self.input_shape), params, self.init_seed)

    def parameter_count(self) -> int:
        return sum(p.weight.size + p.bias.size for p in self.params if p is not None)


def init_network(spec: list[LayerSpec], input_shape, seed: int) -> Network:
    """Materialize a network: He-normal weights, zero biases."""
    spec = list(spec)
    shapes = layer_output_shapes(spec, input_shape)
    input_shape = tuple(int(s) for s in input_shape)
    rng = RngStream(seed).split("init")
    params: list[LayerParams | None] = []
    prev_shape = input_shape
    for i, layer in enumerate(spec):
        if layer.kind == "dense":
            fan_in = prev_shape[0]
            w = he_normal(fan_in, (fan_in, layer.width), rng.split(f"layer{i}"))
            params.append(LayerParams(w, np.zeros(layer.width)))
        elif layer.kind == "conv2d":
            k = layer.kernel_size
            c_in = prev_shape[2]
            fan_in = k * k * c_in
            w = he_normal(fan_in, (k, k, c_in, layer.width), rng.split(f"layer{i}"))
            params.append(LayerParams(w, np.zeros(layer.width)))
        else:
            params.append(None)
        prev_shape = shapes[i]
    return Network(spec, input_shape, params, int(seed))


def _check_mask(net: Network, mask: "MaskSet | None") -> None:
    if mask is None:
        return
    allowed = set(maskable_indices(net.spec))
    keys = set(mask.masks)
    if keys != allowed:
        raise MaskMismatchError(
            f"mask covers layers {sorted(keys)} but maskable layers are {sorted(allowed)}")
    for i, m in mask.masks.items():
        values = np.unique(m)
        if not np.isin(values, (0.0, 1.0)).all():
            raise MaskMismatchError(f"mask for layer {i} has non-binary entries")
        if mask.mode == "structured":
            width = net.spec[i].width
            if m.shape != (width,):
                raise MaskMismatchError(
                    f"structured mask for layer {i} has shape {m.shape}, expected ({width},)")
        elif mask.mode == "unstructured":
            if m.shape != net.params[i].weight.shape:
                raise MaskMismatchError(
                    f"unstructured mask for layer {i} has shape {m.shape}, "
                    f"expected {net.params[i].weight.shape}")
        else:
            raise MaskMismatchError(f"unknown mask mode {mask.mode!r}")


def _conv_forward(x: Tensor, w: Tensor, b: Tensor, stride: int) -> Tensor:
    n, h, wd, c_in = x.shape
    kh, kw, _, c_out = w.shape
    oh = (h - kh) // stride + 1
    ow = (wd - kw) // stride + 1
    acc = np.zeros((n * oh * ow, c_out))
    for a in range(kh):
        for bb in range(kw):
            xs = x[:, a:a + stride * oh:stride, bb:bb + stride * ow:stride, :]
            acc += xs.reshape(-1, c_in) @ w[a, bb]
    return acc.reshape(n, oh, ow, c_out) + b


def _conv_backward(x: Tensor, w: Tensor, stride: int, dout: Tensor):
    n, h, wd, c_in = x.shape
    kh, kw, _, c_out = w.shape
    oh, ow = dout.shape[1], dout.shape[2]
    dflat = dout.reshape(-1, c_out)
    dw = np.zeros_like(w)
    dx = np.zeros_like(x)
    for a in range(kh):
        for bb in range(kw):
            xs = x[:, a:a + stride * oh:stride, bb:bb + stride * ow:stride, :]
            dw[a, bb] = xs.reshape(-1, c_in).T @ dflat
            dx[:, a:a + stride * oh:stride, bb:bb + stride * ow:stride, :] += \
                (dflat @ w[a, bb].T).reshape(n, oh, ow, c_in)
    db = dout.sum(axis=(0, 1, 2))
    return dw, db, dx


def _effective_weight(net: Network, mask, i: int) -> Tensor:
    w = net.params[i].weight
    if mask is not None and mask.mode == "unstructured" and i in mask.masks:
        return w * mask.masks[i]
    return w


def _node_mask(mask, i: int):
    if mask is not None and mask.mode == "structured" and i in mask.masks:
        return mask.masks[i]
    return None


def _forward_pass(net: Network, mask, x: Tensor, keep_inputs: bool):
    """Run the stack; optionally keep each layer's input for backprop."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != net.input_shape:
        raise ShapeMismatchError(
            f"batch shape {x.shape[1:]} does not match input shape {net.input_shape}")
    inputs: list[Tensor | None] = []
    h = x
    for i, layer in enumerate(net.spec):
        inputs.append(h if keep_inputs else None)
        if layer.kind == "dense":
            w = _effective_weight(net, mask, i)
            h = h @ w + net.params[i].bias
            m = _node_mask(mask, i)
            if m is not None:
                h = h * m
        elif layer.kind == "conv2d":
            w = _effective_weight(net, mask, i)
            h = _conv_forward(h, w, net.params[i].bias, layer.stride)
            m = _node_mask(mask, i)
            if m is not None:
                h = h * m
        elif layer.kind == "relu":
            h = np.maximum(h, 0.0)
        elif layer.kind == "flatten":
            h = h.reshape(h.shape[0], -1)
    return h, inputs


def forward(net: Network, mask: "MaskSet | None", batch: Tensor) -> Tensor:
    """Logits of the masked network on a batch; logits are never masked."""
    _check_mask(net, mask)
    logits, _ = _forward_pass(net, mask, batch, keep_inputs=False)
    return logits


def _forward_backward(net: Network, mask, x: Tensor, labels):
    from .numerics import softmax_cross_entropy

    logits, inputs = _forward_pass(net, mask, x, keep_inputs=True)
    loss, dh = softmax_cross_entropy(logits, labels)
    grads: Gradients = [None] * len(net.spec)
    for i in range(len(net.spec) - 1, -1, -1):
        layer = net.spec[i]
        h_in = inputs[i]
        if layer.kind == "dense":
            m = _node_mask(mask, i)
            if m is not None:
                dh = dh * m
            w = _effective_weight(net, mask, i)
            dw = h_in.T @ dh
            db = dh.sum(axis=0)
            dh = dh @ w.T
            if mask is not None and mask.mode == "unstructured" and i in mask.masks:
                dw *= mask.masks[i]
            grads[i] = LayerParams(dw, db)
        elif layer.kind == "conv2d":
            m = _node_mask(mask, i)
            if m is not None:
                dh = dh * m
            w = _effective_weight(net, mask, i)
            dw, db, dh = _conv_backward(h_in, w, layer.stride, dh)
            if mask is not None and mask.mode == "unstructured" and i in mask.masks:
                dw *= mask.masks[i]
            grads[i] = LayerParams(dw, db)
        elif layer.kind == "relu":
            dh = dh * (h_in > 0.0)
        elif layer.kind == "flatten":
            dh = dh.reshape(h_in.shape)
    return loss, grads, logits


def loss_and_grads(net: Network, mask: "MaskSet | None", batch: Tensor, labels):
    """Mean cross-entropy plus exact backprop gradients through the masked graph."""
    _check_mask(net, mask)
    loss, grads, _ = _forward_backward(net, mask, batch, labels)
    return loss, grads


def mean_loss(net: Network, mask: "MaskSet | None", batch: Tensor, labels) -> float:
    """Forward-only mean cross-entropy (no gradient work)."""
    from .numerics import softmax_cross_entropy

    logits = forward(net, mask, batch)
    loss, _ = softmax_cross_entropy(logits, labels)
    return loss


class EvalResult(NamedTuple):
    accuracy: float
    mean_loss: float


def evaluate(net: Network, mask: "MaskSet | None", dataset, batch_size: int = 512) -> EvalResult:
    """Accuracy and mean loss over a dataset; deterministic, in dataset order."""
    from .numerics import softmax_cross_entropy

    n = len(dataset.labels)
    if n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    _check_mask(net, mask)
    correct = 0
    loss_sum = 0.0
    for start in range(0, n, batch_size):
        x = dataset.inputs[start:start + batch_size]
        y = dataset.labels[start:start + batch_size]
        logits, _ = _forward_pass(net, mask, x, keep_inputs=False)
        loss, _ = softmax_cross_entropy(logits, y)
        loss_sum += loss * len(y)
        correct += int((logits.argmax(axis=1) == y).sum())
    return EvalResult(accuracy=correct / n, mean_loss=loss_sum / n)


@dataclass
class SgdState:
    """Per-parameter velocity buffers for momentum SGD."""

    velocities: list[LayerParams | None] = field(default_factory=list)

    @classmethod
    def zeros(cls, net: Network) -> "SgdState":
        vel = [LayerParams(np.zeros_like(p.weight), np.zeros_like(p.bias))
               if p is not None else None for p in net.params]
        return cls(vel)


def sgd_step(net: Network, grads: Gradients, lr: float, momentum: float,
             state: SgdState) -> Network:
    """One momentum-SGD update, in place on an exclusively-owned network.

    velocity <- momentum * velocity + grads; params <- params - lr * velocity.
    """
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if not 0 <= momentum < 1:
        raise ValueError(f"momentum must lie in [0, 1), got {momentum}")
    for p, g, v in zip(net.params, grads, state.velocities):
        if p is None:
            continue
        if g is None or v is None:
            raise ValueError("gradients/state are not congruent with the network")
        if g.weight.shape != p.weight.shape or g.bias.shape != p.bias.shape:
            raise ValueError("gradient shapes are not congruent with the network")
        v.weight *= momentum
        v.weight += g.weight
        v.bias *= momentum
        v.bias += g.bias
        p.weight -= lr * v.weight
        p.bias -= lr * v.bias
    return net


def parent_checksum(net: Network) -> str:
    """Order-stable SHA-256 over all parameter bytes."""
    import hashlib

    h = hashlib.sha256()
    for p in net.params:
        if p is not None:
            h.update(np.ascontiguousarray(p.weight).tobytes())
            h.update(np.ascontiguousarray(p.bias).tobytes())
    return h.hexdigest()
