import zlib

import numpy as np


def substream(seed, name, *keys):
    """Independent generator for the named stream ``name`` under ``seed``.

    Streams with different names (or extra integer keys such as a row index)
    never share state, so one component's draws can change without shifting
    another's.
    """
    spawn_key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))
