"""Kernel backend selection and the shared range-dispatch driver.

The hot per-point passes (MLS projection, normal estimation, angular
variation) exist twice: a compiled Cython core and a vectorized numpy
fallback. The compiled core is preferred when importable; set
``GROOVEKIT_BACKEND=python`` (or ``compiled``) to force one, or switch at
runtime with :func:`set_backend` / :func:`use_backend`.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from . import _kernels_py

_impls = {"python": _kernels_py}
try:
    from . import _kernels as _compiled

    _impls["compiled"] = _compiled
except ImportError:
    _compiled = None


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_impls))


def _default_backend() -> str:
    forced = os.environ.get("GROOVEKIT_BACKEND", "").strip().lower()
    if forced:
        if forced not in _impls:
            raise ImportError(
                f"GROOVEKIT_BACKEND={forced!r} not available; have {available_backends()}"
            )
        return forced
    return "compiled" if "compiled" in _impls else "python"


_current_name = _default_backend()
_current = _impls[_current_name]


def backend_name() -> str:
    return _current_name


def set_backend(name: str) -> None:
    global _current, _current_name
    if name not in _impls:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _current_name = name
    _current = _impls[name]


@contextmanager
def use_backend(name: str):
    prev = _current_name
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def normal_pass(*args):
    return _current.normal_pass(*args)


def mls_pass(*args):
    return _current.mls_pass(*args)


def variation_pass(*args):
    return _current.variation_pass(*args)


def resolve_threads(threads: int | None) -> int:
    """0 or None means one worker per CPU."""
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return int(threads)


def run_ranges(n: int, threads: int, fn):
    """Run ``fn(start, stop)`` over a partition of [0, n).

    Every pass writes per-point results into disjoint output slices and
    accumulates within a point in a fixed order, so the outputs are
    bitwise identical no matter how the ranges are scheduled. Returns the
    list of per-range return values (range order, not completion order).
    """
    threads = resolve_threads(threads)
    if threads <= 1 or n < 4 * threads:
        return [fn(0, n)]
    bounds = np.linspace(0, n, threads + 1).astype(np.int64)
    spans = [(int(bounds[i]), int(bounds[i + 1])) for i in range(threads) if bounds[i] < bounds[i + 1]]
    with ThreadPoolExecutor(max_workers=len(spans)) as pool:
        return list(pool.map(lambda span: fn(*span), spans))
