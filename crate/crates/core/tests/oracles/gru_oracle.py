"""Scalar-arithmetic GRU reference for the 2-dimensional fixture in math/gru.rs."""
import math

sig = lambda x: 1.0 / (1.0 + math.exp(-x))

Wz = [[0.5, -0.3], [0.2, 0.1]]; Uz = [[0.4, 0.0], [-0.2, 0.3]]; bz = [0.1, -0.1]
Wr = [[-0.6, 0.2], [0.3, 0.5]]; Ur = [[0.1, 0.2], [0.3, -0.4]]; br = [0.0, 0.2]
Wh = [[0.7, -0.5], [0.4, 0.6]]; Uh = [[-0.3, 0.8], [0.5, 0.2]]; bh = [0.05, -0.05]
m = [1.0, -2.0]; h = [0.3, -0.6]

def lin(W, x):
    return [W[k][0] * x[0] + W[k][1] * x[1] for k in range(2)]

z = [sig(a + b + c) for a, b, c in zip(lin(Wz, m), lin(Uz, h), bz)]
r = [sig(a + b + c) for a, b, c in zip(lin(Wr, m), lin(Ur, h), br)]
rh = [r[k] * h[k] for k in range(2)]
cand = [math.tanh(a + b + c) for a, b, c in zip(lin(Wh, m), lin(Uh, rh), bh)]
out = [(1 - z[k]) * h[k] + z[k] * cand[k] for k in range(2)]
print(repr(out[0]), repr(out[1]))
