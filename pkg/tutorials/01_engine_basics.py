"""
A small network, trained by hand
================================

The engine is plain numpy: layers return a cache from ``forward`` and consume
it in ``backward``. This walk-through fits a two-layer network to a noisy sine
and checks its gradients against finite differences.
"""

import numpy as np

from clad.engine import Adam, Dense, MSELoss, Network, ReLU, grad_check

rng = np.random.default_rng(0)
x = rng.uniform(-3, 3, size=(256, 1))
y = np.sin(x) + rng.normal(0, 0.05, size=x.shape)

net = Network([Dense(1, 32, rng), ReLU(), Dense(32, 1, rng)], input_shape=(1,))

# Before training anything, make sure backward agrees with the numbers.
print("grad check, max relative error:", grad_check(net, MSELoss(y[:8]), x[:8]))

opt = Adam(learning_rate=0.01)
for epoch in range(300):
    out, trace = net.forward(x)
    loss, grad, _ = MSELoss(y)(out)
    grads, _ = net.backward(trace, grad)
    opt.step(net.parameters(), grads)
    net.mark_updated()  # old traces are now stale
    if epoch % 100 == 0:
        print(f"epoch {epoch:3d}  mse {loss:.4f}")

net.eval()
grid = np.linspace(-3, 3, 7)[:, None]
for xi, yi in zip(grid[:, 0], net(grid)[:, 0]):
    print(f"x={xi:+.1f}  net={yi:+.3f}  sin={np.sin(xi):+.3f}")
