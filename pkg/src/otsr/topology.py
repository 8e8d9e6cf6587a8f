"""Peak counting: superlevel-set thresholding and connected components."""

import numpy as np
from scipy import ndimage

from .exceptions import AllZeroImage

__all__ = ["threshold_superlevel", "h0_rank"]

_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def threshold_superlevel(img, fraction=0.75):
    """Boolean mask of pixels with ``value >= fraction * max(img)``.

    Raises
    ------
    AllZeroImage
        If no pixel is strictly positive.
    """
    img = np.asarray(img, dtype=float)
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    top = img.max() if img.size else 0.0
    if not top > 0:
        raise AllZeroImage("image has no positive pixel")
    return img >= fraction * top


def h0_rank(mask, connectivity=8):
    """Number of connected components of the true pixels in ``mask``.

    ``connectivity`` is 4 (edge neighbours) or 8 (edge and corner
    neighbours).
    """
    try:
        structure = _STRUCTURES[connectivity]
    except KeyError:
        raise ValueError("connectivity must be 4 or 8") from None
    _, count = ndimage.label(np.asarray(mask, dtype=bool), structure=structure)
    return int(count)
