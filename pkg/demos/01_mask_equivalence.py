#!/usr/bin/env python3
"""Masking a node is the same as deleting it from the compute graph.

Walks one sparse sub-network end to end: sample a structured mask over a
small conv net, physically delete the deactivated channels/units, and compare
logits, loss, and gradients between the masked parent and the reduced copy.
"""

import numpy as np

from weedout import RngStream, forward, init_network, loss_and_grads, reduce_network
from weedout.network import conv2d, dense, flatten_layer, relu_layer
from weedout.sparsity import per_layer_sparsity, realized_sparsity, sample_structured

spec = [
    conv2d(8, 3), relu_layer(),
    conv2d(12, 3), relu_layer(),
    flatten_layer(),
    dense(32), relu_layer(),
    dense(10, maskable=False),
]
input_shape = (12, 12, 1)

net = init_network(spec, input_shape, seed=7)
print(f"parent network: {net.parameter_count()} parameters")

rng = RngStream(2024)
mask = sample_structured(spec, eta=0.6, rng=rng.split("mask"))
print(f"\nsampled a structured mask at eta=0.6 "
      f"(realized sparsity {realized_sparsity(mask):.3f})")
for i, frac in per_layer_sparsity(mask).items():
    kind = spec[i].kind
    width = spec[i].width
    off = int(width * frac)
    print(f"  layer {i} ({kind}, width {width}): {off} nodes off")

reduced = reduce_network(net, mask)
print(f"\nreduced network: {reduced.parameter_count()} parameters "
      f"({net.parameter_count() - reduced.parameter_count()} deleted)")

x = rng.split("x").normal((16,) + input_shape)
y = np.asarray(rng.split("y").integers(0, 10, size=16))

logits_masked = forward(net, mask, x)
logits_reduced = forward(reduced, None, x)
print(f"\nmax |masked logits - reduced logits| = "
      f"{np.abs(logits_masked - logits_reduced).max():.3e}")

loss_masked, grads = loss_and_grads(net, mask, x, y)
loss_reduced, _ = loss_and_grads(reduced, None, x, y)
print(f"loss difference = {abs(loss_masked - loss_reduced):.3e}")

# gradients incident to a deactivated channel are exactly zero
off_channels = np.where(mask.masks[0] == 0.0)[0]
g = grads[0].weight  # [kh, kw, in, out]
print(f"\nfirst conv layer: channels {off_channels.tolist()} are off; "
      f"max |gradient| into them = {np.abs(g[:, :, :, off_channels]).max():.1f} "
      f"(exactly zero)")
