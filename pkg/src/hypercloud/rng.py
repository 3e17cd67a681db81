"""Repository RNG policy.

Every stochastic operation in this package draws from a PCG64 generator
created with :func:`make_rng`, so identical seeds reproduce bit-identical
streams across runs and platforms.  Sub-streams (per trial, per noise row)
are derived with :func:`derive_seed`, which folds integer tags through
``numpy.random.SeedSequence``.
"""

from __future__ import annotations

import numpy as np

BIT_GENERATOR = "PCG64"


def make_rng(seed: int) -> np.random.Generator:
    """Return the repository-standard generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(*tags: int) -> int:
    """Deterministically derive a 64-bit sub-seed from integer tags.

    Negative tags are folded into the unsigned 64-bit range first, since
    ``SeedSequence`` entropy must be nonnegative.
    """
    folded = [int(t) & 0xFFFFFFFFFFFFFFFF for t in tags]
    ss = np.random.SeedSequence(folded)
    return int(ss.generate_state(1, np.uint64)[0])
