"""Built-in plant presets."""

from __future__ import annotations

import numpy as np

from ..lifting import StateSpace

BOEING747 = {
    "A": [[0.9801, 0.0003, -0.0980, 0.0038],
          [-0.3868, 0.9071, 0.0471, -0.0008],
          [0.1591, -0.0015, 0.9691, 0.0003],
          [-0.0198, 0.0958, 0.0021, 1.000]],
    "B": [[-0.0001, 0.0058],
          [0.0296, 0.0153],
          [0.0012, -0.0908],
          [0.0015, 0.0008]],
    "C": [[1.0, 0.0, 0.0, 0.0],
          [0.0, 0.0, 0.0, 1.0]],
}

PRESETS = {"boeing747": BOEING747}

# radius grid of the reference experiment
BOEING747_RADII = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0, 4.0, 8.0, 16.0, 32.0, 126.0]


def preset_system(name: str) -> StateSpace:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    return StateSpace(np.array(spec["A"]), np.array(spec["B"]), np.array(spec["C"]))
