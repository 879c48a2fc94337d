import contextlib
import io
import threading
from collections import OrderedDict
from typing import Any, Callable, Hashable, Iterable

import numpy as np


def bits_to_string(bits: Iterable[int]) -> str:
    """Render a selector as a bitstring, feature 1 leftmost (e.g. [1, 0] -> '10')."""
    return "".join("1" if b else "0" for b in bits)


def string_to_bits(text: str) -> tuple[int, ...]:
    """Parse a bitstring such as '0110' into a tuple of ints."""
    text = text.strip()
    if not text or any(c not in "01" for c in text):
        raise ValueError(f"Not a bitstring: '{text}'")
    return tuple(int(c) for c in text)


def derive_seed(master: int, *keys: int) -> int:
    """Derive an independent 32-bit seed from a master seed and integer keys.

    The same (master, keys) always gives the same seed, independent of the
    order in which replicates are scheduled.
    """
    seq = np.random.SeedSequence([int(master) & 0xFFFFFFFF, *[int(k) & 0xFFFFFFFF for k in keys]])
    return int(seq.generate_state(1)[0])


def format_file_size(size_bytes: int) -> str:
    """Convert bytes to human-readable format."""
    for unit in ["B", "KB", "MB", "GB", "TB"]:
        if size_bytes < 1024.0:
            return f"{size_bytes:.1f} {unit}"
        size_bytes /= 1024.0
    return f"{size_bytes:.1f} PB"


def capture_stdout(fn: Callable[..., Any], *args, **kwargs) -> tuple[Any, str]:
    """Call fn and return (result, everything it printed). Keeps stdout clean for the MCP stdio transport."""
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer):
        result = fn(*args, **kwargs)
    return result, buffer.getvalue()


def format_probability(value: float) -> str:
    """Format a probability for human-readable summaries."""
    if value != 0.0 and abs(value) < 1e-4:
        return f"{value:.2e}"
    return f"{value:.4f}"


class LRUCache:
    """Bounded, thread-safe memo table.

    Values are computed outside the lock; two threads racing on the same key
    compute the same value, so insertion order does not affect results.
    """

    def __init__(self, maxsize: int):
        self.maxsize = max(0, int(maxsize))
        self._data: "OrderedDict[Hashable, Any]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                self.hits += 1
                return self._data[key]
            self.misses += 1

        value = compute()

        if self.maxsize:
            with self._lock:
                self._data[key] = value
                self._data.move_to_end(key)
                while len(self._data) > self.maxsize:
                    self._data.popitem(last=False)
        return value

    def __len__(self) -> int:
        return len(self._data)
