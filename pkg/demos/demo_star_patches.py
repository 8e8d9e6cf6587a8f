"""Counting peaks in synthetic star-field patches.

Patches hold either one Gaussian blob or two well-separated blobs. A patch
is called a cluster when its superlevel set at 75% of the peak has more
than one component. Bright salt pixels fool the plain threshold, while
thresholding the sparse approximation of the patch ignores most of them.

Run with ``python3 demos/demo_star_patches.py`` (about a minute).
"""

import numpy as np

from otsr.pipeline import SYNTHETIC_DEFAULTS, classify, classify_naive, synthetic_set


def accuracy(images, method):
    return float(np.mean([method(img).label == truth for img, truth in images]))


def main(count=12, m=16, seed=3):
    clean = synthetic_set(count, m=m, noise=0.02, seed=seed)
    salty = synthetic_set(count, m=m, noise=0.02, salt=0.03, salt_level=0.85, seed=seed)
    sparse = lambda img: classify(img, SYNTHETIC_DEFAULTS)
    for name, images in (("clean", clean), ("salt", salty)):
        print(
            f"{name:<6} sparse accuracy {accuracy(images, sparse):.2f}   "
            f"naive accuracy {accuracy(images, classify_naive):.2f}"
        )


if __name__ == "__main__":
    main()
