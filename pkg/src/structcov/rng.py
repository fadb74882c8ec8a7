"""Counter-based reproducible random streams.

Every stochastic task draws from its own Philox generator keyed by
(seed, *labels), so adding tasks or reordering execution never perturbs
the draws of another stream.  Labels may be ints or short strings; strings
are folded into the seed material byte-for-byte, independent of the
process hash seed.
"""

from __future__ import annotations

import numpy as np


def _key_int(value):
    if isinstance(value, (int, np.integer)):
        return int(value)
    data = str(value).encode("utf-8")
    return int.from_bytes(data, "little")


def substream(seed, *labels):
    """Independent Generator for the stream identified by (seed, *labels)."""
    entropy = [_key_int(seed)] + [_key_int(v) for v in labels]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
