"""Hot simulation kernels: gossip ticks and Monte Carlo contact sampling.

The kernel bodies live in ``_kernel_impl.py`` and are loaded twice: once
compiled with numba and once interpreted.  Setting ``MOBGOSSIP_NUMBA=0`` (or
running without numba installed) routes everything through the interpreted
twin, which produces bit-identical results because both twins execute the
same code over the same splitmix64 stream.

All randomness flows through an explicit uint64 state threaded through the
kernels, so a trial is fully reproducible from its stream seed regardless of
backend or worker count.
"""

from __future__ import annotations

import importlib.util
import os
import sys
from pathlib import Path

import numpy as np

NUMBA_ENABLED = False
if os.environ.get("MOBGOSSIP_NUMBA", "1") != "0":
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def _load_impl(jit: bool):
    name = f"mobgossip._kernel_impl_{'jit' if jit else 'py'}"
    if name in sys.modules:
        return sys.modules[name]
    spec = importlib.util.spec_from_file_location(
        name, Path(__file__).with_name("_kernel_impl.py")
    )
    module = importlib.util.module_from_spec(spec)
    module.MOBGOSSIP_JIT = jit
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


_py = _load_impl(False)
_active = _load_impl(True) if NUMBA_ENABLED else _py


def python_impl(fn):
    """The interpreted twin of a kernel (used by oracles and benchmarks)."""
    return getattr(_py, fn.__name__)


class errstate_if_interpreted:
    """Suppress uint64 wraparound warnings when running interpreted kernels.

    Integer overflow is the intended behaviour of the splitmix64 mixer; numba
    wraps silently, numpy scalars warn.
    """

    def __enter__(self):
        self._ctx = np.errstate(over="ignore")
        self._ctx.__enter__()
        return self

    def __exit__(self, *exc):
        self._ctx.__exit__(*exc)
        return False


# mobility kind codes shared with the mobility module
K_STATIC = _py.K_STATIC
K_FULL = _py.K_FULL
K_HORIZONTAL = _py.K_HORIZONTAL
K_VERTICAL = _py.K_VERTICAL
K_LOCAL = _py.K_LOCAL
K_ROW_WALK = _py.K_ROW_WALK

_GOLD = _py._GOLD

# active-backend kernels
_mix64 = _active._mix64
_next_u64 = _active._next_u64
_u01 = _active._u01
_randint = _active._randint
gossip_trace_discrete = _active.gossip_trace_discrete
gossip_crossing_discrete = _active.gossip_crossing_discrete
contact_mc_discrete = _active.contact_mc_discrete
gossip_trace_continuous = _active.gossip_trace_continuous
gossip_crossing_continuous = _active.gossip_crossing_continuous
contact_mc_continuous = _active.contact_mc_continuous


def stream_state(seed: int, stream: int) -> np.uint64:
    """Derive an independent uint64 stream state from a master seed.

    Stream 0 is the master stream; trials use streams 1, 2, ...  The
    derivation is two rounds of the splitmix64 mixer over (seed, stream).
    """
    with np.errstate(over="ignore"):
        s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        t = np.uint64(stream & 0xFFFFFFFFFFFFFFFF)
        z = _py._mix64(s + _GOLD * (t + np.uint64(1)))
        return np.uint64(_py._mix64(z ^ _GOLD))
