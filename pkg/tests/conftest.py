import numpy as np

# Frozen ground truth shared across test modules: the displayed order-3
# degree-2 reference square (0-based symbols) and the 6x9 mapping matrix it
# expands to.
REFERENCE_CELLS = np.array([
    [(0, 0), (1, 1), (2, 2)],
    [(1, 2), (2, 0), (0, 1)],
    [(2, 1), (0, 2), (1, 0)],
])
REFERENCE_MAPPING = np.array([
    [1, 0, 0, 0, 0, 1, 0, 1, 0],
    [0, 1, 0, 1, 0, 0, 0, 0, 1],
    [0, 0, 1, 0, 1, 0, 1, 0, 0],
    [1, 0, 0, 0, 1, 0, 0, 0, 1],
    [0, 1, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 1, 1, 0, 0, 0, 1, 0],
], dtype=np.uint8)
