"""Counter-based random streams.

All randomness in the library flows through keyed Philox generators so that
every logical unit of work (a sketch column, a Hutchinson query, a test-matrix
column) owns an independent substream addressed by ``(seed, purpose, stream,
unit)``.  Regenerating a unit is bitwise reproducible regardless of execution
order or thread count, and enlarging e.g. the query count never perturbs
earlier queries.
"""

import numpy as np

# purpose tags keep substreams for different consumers disjoint
PURPOSE_TEST_MATRIX = 1
PURPOSE_SKETCH = 2
PURPOSE_RADEMACHER = 3
PURPOSE_PROBE = 4

_MASK64 = (1 << 64) - 1
_MASK24 = (1 << 24) - 1


def substream(seed: int, purpose: int, stream: int = 0, unit: int = 0) -> np.random.Generator:
    """Independent generator for one unit of work.

    The Philox key packs ``seed`` in the first word and
    ``(purpose, stream, unit)`` in the second, so distinct units never share
    a stream.  ``stream`` and ``unit`` must fit in 24 bits each.
    """
    key = np.empty(2, dtype=np.uint64)
    key[0] = np.uint64(seed & _MASK64)
    key[1] = np.uint64(((purpose & 0xFFFF) << 48) | ((stream & _MASK24) << 24) | (unit & _MASK24))
    return np.random.Generator(np.random.Philox(key=key))


def rademacher(seed: int, query: int, n: int) -> np.ndarray:
    """Length-n vector of +-1 entries for Hutchinson query ``query``."""
    gen = substream(seed, PURPOSE_RADEMACHER, 0, query)
    return gen.integers(0, 2, n).astype(np.float64) * 2.0 - 1.0


def gaussian_column(seed: int, stream: int, column: int, n: int) -> np.ndarray:
    """Standard-normal column ``column`` of a sketch matrix."""
    gen = substream(seed, PURPOSE_SKETCH, stream, column)
    return gen.standard_normal(n)


def probe_unit_vector(seed: int, n: int) -> np.ndarray:
    """Seeded random unit vector used to start spectral probes."""
    v = substream(seed, PURPOSE_PROBE).standard_normal(n)
    return v / np.linalg.norm(v)
