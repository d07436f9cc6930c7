"""Deterministic seed derivation.

A single top-level seed fans out into independent per-component seeds via a
splitmix64 step applied to ``master ^ fnv1a64(label)``. The derivation uses
only 64-bit integer arithmetic, so it is stable across platforms and Python
versions. Labels are short strings such as ``"env"`` or ``"cube:2"``.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def fnv1a64(label: str) -> int:
    """64-bit FNV-1a hash of a label string."""
    h = 0xCBF29CE484222325
    for byte in label.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK
    return h


def splitmix64(value: int) -> int:
    """One output of the splitmix64 generator seeded at ``value``."""
    z = (value + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, label: str) -> int:
    """Derive a component seed from a master seed and a label."""
    return splitmix64((master & _MASK) ^ fnv1a64(label))
