"""Counter-based, splittable random streams.

Every stream is a Philox generator keyed by ``(master_seed, *stream_id)``
through :class:`numpy.random.SeedSequence`, so a trial's draws depend only on
its own identifiers and never on scheduling order.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, *stream_id: int) -> np.random.Generator:
    """Return the generator for one stream of a master seed."""
    if master_seed < 0:
        raise ValueError("master_seed must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(s) for s in stream_id))
    return np.random.Generator(np.random.Philox(ss))


def seed_trace(master_seed: int, *stream_id: int) -> tuple[int, ...]:
    return (int(master_seed), *(int(s) for s in stream_id))
