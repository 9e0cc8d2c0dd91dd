"""Lagrange shape functions on the reference triangle.

P2 local ordering: the three vertices, then the midpoints of the local
edges (0,1), (1,2), (2,0).
"""
import numpy as np


def p1_values(xy):
    x, y = xy[:, 0], xy[:, 1]
    return np.column_stack([1.0 - x - y, x, y])


def p1_gradients(xy):
    g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return np.broadcast_to(g, (len(xy), 3, 2)).copy()


def p2_values(xy):
    x, y = xy[:, 0], xy[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    return np.column_stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0]
    )


def p2_gradients(xy):
    x, y = xy[:, 0], xy[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    # dl/dx, dl/dy for l0, l1, l2
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    lam = (l0, l1, l2)
    out = np.empty((len(xy), 6, 2))
    for k in range(3):
        out[:, k, :] = (4 * lam[k] - 1)[:, None] * dl[k]
    for k, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
        out[:, 3 + k, :] = 4 * (lam[a][:, None] * dl[b] + lam[b][:, None] * dl[a])
    return out


def p2_reference_nodes():
    return np.array([[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]], dtype=float)
