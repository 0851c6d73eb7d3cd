"""Independent small-instance topology oracle for grid masks.

Euler characteristic as b0 - b1: components by union-find over the painted
cubical complex, holes by union-find over the complement of the same image.
Shares no code with the package's alternating cell-count implementation.
"""

import numpy as np


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def paint_doubled(active: np.ndarray) -> np.ndarray:
    """Pixel image of the cubical complex: vertex pixels at even coordinates,
    edge/face pixels painted iff all their lattice vertices are active."""
    nx, ny = active.shape
    img = np.zeros((2 * nx - 1, 2 * ny - 1), dtype=bool)
    img[::2, ::2] = active
    img[1::2, ::2] = active[:-1, :] & active[1:, :]
    img[::2, 1::2] = active[:, :-1] & active[:, 1:]
    img[1::2, 1::2] = (
        active[:-1, :-1] & active[1:, :-1] & active[:-1, 1:] & active[1:, 1:]
    )
    return img


def component_count(img: np.ndarray) -> int:
    nx, ny = img.shape
    uf = UnionFind(nx * ny)

    def idx(i, j):
        return i * ny + j

    for i in range(nx):
        for j in range(ny):
            if not img[i, j]:
                continue
            if i + 1 < nx and img[i + 1, j]:
                uf.union(idx(i, j), idx(i + 1, j))
            if j + 1 < ny and img[i, j + 1]:
                uf.union(idx(i, j), idx(i, j + 1))
    roots = {uf.find(idx(i, j)) for i in range(nx) for j in range(ny) if img[i, j]}
    return len(roots)


def betti_euler_oracle(active: np.ndarray) -> int:
    """chi = b0 - b1 for a 2-d mask."""
    img = paint_doubled(active)
    b0 = component_count(img)
    framed = np.pad(~img, 1, constant_values=True)
    b1 = component_count(framed) - 1  # drop the unbounded outside component
    return b0 - b1
