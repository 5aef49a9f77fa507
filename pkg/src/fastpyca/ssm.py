"""Grow-only shared buffers.

A pool holds one byte buffer per named slot. Requests reuse the existing
storage and only reallocate when the requested size exceeds the current
capacity; contents survive release so the next holder of a slot can read what
the previous one wrote.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

GROWTH = 1.5


class ContentionError(RuntimeError):
    """Slot is already checked out."""


class LedgerError(RuntimeError):
    """Handle released twice or used after release."""


@dataclass
class SharedBuffer:
    storage: bytearray
    requested: int = 0
    generation: int = 0
    alloc_events: int = 0

    @property
    def capacity(self) -> int:
        return len(self.storage)


def grown_capacity(capacity: int, size: int) -> int:
    # at least x1.5 per reallocation, and never less than what was asked for
    return max(size, math.ceil(capacity * GROWTH))


def allocation_bound(max_size: int) -> int:
    """Upper bound on reallocations for any request sequence peaking at ``max_size`` bytes."""
    if max_size <= 0:
        return 0
    if max_size == 1:
        return 1
    return math.ceil(math.log(max_size, GROWTH)) + 1


class BufferHandle:
    """Exclusive view of a slot's buffer until released."""

    def __init__(self, pool: BufferPool, slot: str, buf: SharedBuffer, token: int):
        self._pool = pool
        self.slot = slot
        self._buf = buf
        self._token = token
        self.size = buf.requested
        self.live = True

    @property
    def view(self) -> memoryview:
        if not self.live:
            raise LedgerError(f"handle for slot {self.slot!r} was already released")
        return memoryview(self._buf.storage)[:self.size]

    def array(self, dtype=np.uint8, shape=None) -> np.ndarray:
        """The requested bytes reinterpreted as a numpy array (no copy)."""
        arr = np.frombuffer(self.view, dtype=dtype)
        return arr if shape is None else arr.reshape(shape)

    @property
    def capacity(self) -> int:
        return self._buf.capacity

    def release(self) -> None:
        self._pool.release(self)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self.live:
            self.release()


class BufferPool:
    def __init__(self):
        self._slots: dict[str, SharedBuffer] = {}
        self._checked_out: dict[str, int] = {}
        self._next_token = 0
        self._lock = threading.Lock()

    def request(self, slot: str, size: int) -> BufferHandle:
        if size < 0:
            raise ValueError(f"size must be >= 0, got {size}")
        with self._lock:
            if slot in self._checked_out:
                raise ContentionError(f"slot {slot!r} is already checked out")
            buf = self._slots.setdefault(slot, SharedBuffer(bytearray()))
            if size > buf.capacity:
                storage = bytearray(grown_capacity(buf.capacity, size))
                storage[:buf.capacity] = buf.storage
                buf.storage = storage
                buf.alloc_events += 1
            buf.requested = size
            buf.generation += 1
            self._next_token += 1
            self._checked_out[slot] = self._next_token
            return BufferHandle(self, slot, buf, self._next_token)

    def release(self, handle: BufferHandle) -> None:
        with self._lock:
            if not handle.live or self._checked_out.get(handle.slot) != handle._token:
                raise LedgerError(f"handle for slot {handle.slot!r} is not checked out")
            del self._checked_out[handle.slot]
            handle.live = False

    def stats(self, slot: str) -> SharedBuffer:
        return self._slots[slot]

    def is_checked_out(self, slot: str) -> bool:
        with self._lock:
            return slot in self._checked_out

    @property
    def slots(self) -> list[str]:
        return sorted(self._slots)

    @property
    def total_alloc_events(self) -> int:
        return sum(b.alloc_events for b in self._slots.values())


def request(pool: BufferPool, slot: str, size: int) -> BufferHandle:
    return pool.request(slot, size)


def release(handle: BufferHandle) -> None:
    handle.release()
