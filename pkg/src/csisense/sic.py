"""Self-interference and static-clutter suppression by zero-Doppler removal."""
from __future__ import annotations

import numpy as np


def remove_dc(grid: np.ndarray) -> np.ndarray:
    """Subtract each subcarrier's mean over frames.

    Tx/Rx coupling and static clutter are constant across frames, so they
    live entirely in the zero-Doppler component; subtracting the per-column
    complex mean nulls that component while leaving movers on nonzero
    Doppler bins intact. Subtracting before the range transform equals
    subtracting per range bin after it, by linearity of the DFT. The mean
    is taken over the current window only. Movers slower than one Doppler
    bin lose part of their energy too; that loss is the cost of the
    cancellation at very low velocities.
    """
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.shape[0] < 2:
        raise ValueError("need a 2-D grid with at least 2 frames")
    out = grid - np.mean(grid, axis=0, keepdims=True)
    # Cancelling a frame-invariant column leaves summation-order rounding
    # residue (no mean can be exact for every frame count); flush anything
    # that far below the input scale to true zero so an all-static window
    # comes out silent instead of as numerical dust.
    tolerance = 32.0 * np.finfo(float).eps * np.max(np.abs(grid))
    out[np.abs(out) <= tolerance] = 0.0
    return out
