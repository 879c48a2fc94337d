"""
Unit tests for utils/common.py.
"""
import pytest

from bayes_invariance.utils.common import (
    LRUCache,
    bits_to_string,
    capture_stdout,
    derive_seed,
    format_file_size,
    format_probability,
    string_to_bits,
)


class TestBitstrings:
    """Tests for bitstring helpers."""

    @pytest.mark.unit
    def test_conversions(self):
        """Feature 1 is the leftmost character."""
        assert bits_to_string([1, 0, 0]) == "100"
        assert string_to_bits(" 0110 ") == (0, 1, 1, 0)

    @pytest.mark.unit
    @pytest.mark.parametrize("text", ["", "012", "1 0"])
    def test_invalid(self, text):
        """Only non-empty strings of 0 and 1 are accepted."""
        with pytest.raises(ValueError):
            string_to_bits(text)


class TestDeriveSeed:
    """Tests for derive_seed."""

    @pytest.mark.unit
    def test_stable_and_distinct(self):
        """Same keys give the same seed; changing any key changes it."""
        base = derive_seed(0, 200, 5, 1000, 0)
        assert base == derive_seed(0, 200, 5, 1000, 0)
        assert len({base, derive_seed(1, 200, 5, 1000, 0), derive_seed(0, 200, 5, 1000, 1)}) == 3
        assert 0 <= base < 2 ** 32


class TestLRUCache:
    """Tests for LRUCache."""

    @pytest.mark.unit
    def test_hits_and_eviction(self):
        """The least recently used key is evicted first."""
        cache = LRUCache(2)
        calls = []

        def compute(key):
            return lambda: calls.append(key) or key * 10

        cache.get_or_compute(1, compute(1))
        cache.get_or_compute(2, compute(2))
        assert cache.get_or_compute(1, compute(1)) == 10
        cache.get_or_compute(3, compute(3))
        cache.get_or_compute(2, compute(2))
        assert calls == [1, 2, 3, 2]
        assert cache.hits == 1
        assert len(cache) == 2

    @pytest.mark.unit
    def test_zero_size_never_stores(self):
        """maxsize 0 disables caching."""
        cache = LRUCache(0)
        cache.get_or_compute("a", lambda: 1)
        assert len(cache) == 0


class TestFormatting:
    """Tests for output helpers."""

    @pytest.mark.unit
    def test_capture_stdout(self):
        """Printed text is returned alongside the result."""
        result, text = capture_stdout(lambda x: print(f"value {x}") or x + 1, 1)
        assert result == 2
        assert text == "value 1\n"

    @pytest.mark.unit
    def test_format_file_size(self):
        """Sizes are scaled to the largest unit below 1024."""
        assert format_file_size(512) == "512.0 B"
        assert format_file_size(2048) == "2.0 KB"

    @pytest.mark.unit
    def test_format_probability(self):
        """Tiny probabilities use scientific notation."""
        assert format_probability(0.25) == "0.2500"
        assert format_probability(3e-7) == "3.00e-07"
        assert format_probability(0.0) == "0.0000"
