"""Discrete convolution kernels for diagonal SSMs.

The kernel is K_l = 2 Re( sum_n C_n B_bar_n A_bar_n^l ) over the
half-spectrum (factor 1 instead of 2 for purely real specs).  Two variants
compute it: one materializes the full (N/2, L) power matrix, the other
streams over L in fixed-size chunks using O(N + chunk) auxiliary memory.
Both produce bit-identical output because they share the same running-product
chains and the same fixed-order pairwise reduction over n.
"""

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .discretize import DiscreteParams, dense_matrix_exp
from .hippo import DenseSpec
from .inits import DiagonalSpec

__all__ = [
    "PAIR_OUTPUT_WEIGHT",
    "STREAM_CHUNK",
    "KernelMeta",
    "Kernel",
    "BasisTable",
    "AllocationTally",
    "track_allocations",
    "vandermonde_kernel",
    "vandermonde_kernel_streaming",
    "dss_softmax_kernel",
    "sample_basis",
]

# Output weight for implicit conjugate pairs; the recurrence in the conv
# module must use the same constant so both routes agree exactly.
PAIR_OUTPUT_WEIGHT = 2.0

# Streaming chunk length (build-time constant; buffers are allocated at this
# size regardless of L so auxiliary memory does not scale with the problem).
STREAM_CHUNK = 4096


@dataclass
class KernelMeta:
    """Provenance of a kernel: initialization name, rule, state size, dt."""

    init: str
    rule: str
    N: int
    dt: float


@dataclass
class Kernel:
    """Length-L real convolution kernel plus provenance metadata."""

    values: np.ndarray
    L: int
    meta: KernelMeta


@dataclass
class BasisTable:
    """Samples of the basis functions K_n(t) on a time grid, one row per n."""

    t_grid: np.ndarray
    values: np.ndarray


@dataclass
class AllocationTally:
    """Counter of auxiliary scalars allocated inside kernel computations."""

    scalars: int = 0


_tally: AllocationTally | None = None


@contextmanager
def track_allocations():
    """Collect auxiliary-buffer allocation counts from kernel variants."""
    global _tally
    previous = _tally
    _tally = tally = AllocationTally()
    try:
        yield tally
    finally:
        _tally = previous


def _note_alloc(count: int) -> None:
    if _tally is not None:
        _tally.scalars += int(count)


def _weights(spec: DiagonalSpec, disc: DiscreteParams) -> np.ndarray:
    if not disc.is_diagonal:
        raise ValueError("diagonal kernel needs a diagonal discretization")
    if len(disc.A_bar) != spec.n_half:
        raise ValueError(
            f"spec has {spec.n_half} modes but discretization has {len(disc.A_bar)}"
        )
    if spec.C_half is None:
        raise ValueError("spec has no C_half; initialize it first")
    return spec.C_half * disc.B_bar


def _output_weight(spec: DiagonalSpec) -> float:
    return PAIR_OUTPUT_WEIGHT if spec.conj_pairs else 1.0


def _pairwise_merge(emit, count: int, width: int, levels: np.ndarray, tmp: np.ndarray, out: np.ndarray) -> None:
    """Binary-counter pairwise summation of `count` emitted vectors.

    emit(i, buf) must write term i into buf[:width].  The merge order is a
    pure function of `count`, so any two callers with the same count perform
    bit-identical additions.
    """
    filled = [False] * levels.shape[0]
    for i in range(count):
        emit(i, tmp)
        k = 0
        while filled[k]:
            tmp[:width] += levels[k, :width]
            filled[k] = False
            k += 1
        levels[k, :width] = tmp[:width]
        filled[k] = True
    first = True
    for k in range(levels.shape[0]):
        if filled[k]:
            if first:
                out[:width] = levels[k, :width]
                first = False
            else:
                out[:width] += levels[k, :width]


def _merge_depth(count: int) -> int:
    return max(1, count.bit_length())


def _materialized_values(w: np.ndarray, a: np.ndarray, L: int, out_weight: float) -> np.ndarray:
    n_half = len(a)
    powers = np.empty((n_half, L), dtype=complex)
    _note_alloc(n_half * L)
    powers[:, 0] = 1.0
    if L > 1:
        powers[:, 1:] = a[:, None]
    np.cumprod(powers, axis=1, out=powers)

    depth = _merge_depth(n_half)
    levels = np.empty((depth, L), dtype=complex)
    tmp = np.empty(L, dtype=complex)
    acc = np.empty(L, dtype=complex)
    _note_alloc((depth + 2) * L)

    def emit(i: int, buf: np.ndarray) -> None:
        np.multiply(powers[i], w[i], out=buf[:L])

    _pairwise_merge(emit, n_half, L, levels, tmp, acc)
    return out_weight * acc.real


def vandermonde_kernel(spec: DiagonalSpec, disc: DiscreteParams, L: int) -> Kernel:
    """Kernel via the materialized power (Vandermonde) matrix.

    Powers are built by running products along each row rather than through
    the complex logarithm, so no branch-cut issues arise; decay for long L
    relies on |A_bar_n| < 1 from the stability constraint.
    """
    if L < 1:
        raise ValueError("kernel length must be >= 1")
    w = _weights(spec, disc)
    values = _materialized_values(w, disc.A_bar, L, _output_weight(spec))
    meta = KernelMeta(init=spec.name, rule=disc.rule, N=spec.N, dt=disc.dt)
    return Kernel(values=values, L=L, meta=meta)


def vandermonde_kernel_streaming(spec: DiagonalSpec, disc: DiscreteParams, L: int) -> Kernel:
    """Same values as vandermonde_kernel, with O(N + chunk) auxiliary memory.

    Maintains one running power per mode and walks L in chunks whose buffers
    are preallocated at the build-time chunk size.  Output is bit-identical
    to the materialized variant.
    """
    if L < 1:
        raise ValueError("kernel length must be >= 1")
    w = _weights(spec, disc)
    a = disc.A_bar
    n_half = len(a)
    out_weight = _output_weight(spec)

    out = np.empty(L, dtype=float)
    running = np.ones(n_half, dtype=complex)
    _note_alloc(n_half)

    depth = _merge_depth(n_half)
    levels = np.empty((depth, STREAM_CHUNK), dtype=complex)
    tmp = np.empty(STREAM_CHUNK, dtype=complex)
    acc = np.empty(STREAM_CHUNK, dtype=complex)
    _note_alloc((depth + 2) * STREAM_CHUNK)

    start = 0
    while start < L:
        width = min(STREAM_CHUNK, L - start)

        def emit(i: int, buf: np.ndarray) -> None:
            buf[0] = running[i]
            buf[1:width] = a[i]
            np.cumprod(buf[:width], out=buf[:width])
            running[i] = buf[width - 1] * a[i]
            np.multiply(buf[:width], w[i], out=buf[:width])

        _pairwise_merge(emit, n_half, width, levels, tmp, acc)
        out[start : start + width] = out_weight * acc[:width].real
        start += width

    meta = KernelMeta(init=spec.name, rule=disc.rule, N=spec.N, dt=disc.dt)
    return Kernel(values=out, L=L, meta=meta)


def _int_power(a: np.ndarray, exponent: int) -> np.ndarray:
    """Elementwise a**exponent by binary exponentiation (exact integer power)."""
    result = np.ones_like(a)
    base = a.copy()
    e = exponent
    while e:
        if e & 1:
            result = result * base
        e >>= 1
        if e:
            base = base * base
    return result


def dss_softmax_kernel(spec: DiagonalSpec, disc: DiscreteParams, L: int) -> Kernel:
    """Kernel with each mode normalized by its length-L geometric row sum.

    Row sums use the closed form (A_bar^L - 1)/(A_bar - 1), switching to a
    binomial series when A_bar is within 1e-8 of 1.  Requires the zero-order
    hold discretization; the normalization makes the kernel depend on L
    globally, so kernels of different lengths are not prefix-consistent.
    """
    if disc.rule != "zoh":
        raise ValueError(
            "softmax normalization is only defined for the zoh discretization"
        )
    if L < 1:
        raise ValueError("kernel length must be >= 1")
    w = _weights(spec, disc)
    a = disc.A_bar

    near_one = np.abs(a - 1.0) < 1e-8
    row_sums = np.empty_like(a)
    far = ~near_one
    row_sums[far] = (_int_power(a[far], L) - 1.0) / (a[far] - 1.0)
    if near_one.any():
        d = a[near_one] - 1.0
        row_sums[near_one] = L * (
            1.0
            + (L - 1.0) / 2.0 * d
            + (L - 1.0) * (L - 2.0) / 6.0 * d**2
            + (L - 1.0) * (L - 2.0) * (L - 3.0) / 24.0 * d**3
        )
    degenerate = np.abs(row_sums) < 1e-14 * L
    if degenerate.any():
        raise ValueError(
            f"degenerate softmax rows (near-zero geometric sums) at modes "
            f"{np.flatnonzero(degenerate).tolist()}"
        )

    values = _materialized_values(w / row_sums, a, L, _output_weight(spec))
    meta = KernelMeta(init=spec.name, rule=disc.rule, N=spec.N, dt=disc.dt)
    return Kernel(values=values, L=L, meta=meta)


def _uniform_spacing(t: np.ndarray) -> float | None:
    if len(t) < 3:
        return None if len(t) < 2 else float(t[1] - t[0])
    steps = np.diff(t)
    h = float(steps[0])
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        return None
    return h


def sample_basis(spec: DiagonalSpec | DenseSpec, t_grid: np.ndarray) -> BasisTable:
    """Sample the basis functions K_n(t) = (e^{tA} B)_n on a time grid.

    Diagonal specs evaluate exp(t A_n) B_n in closed form.  Dense specs use
    one matrix exponential per grid step when the grid is uniform (the
    propagator is reused), falling back to one exponential per point.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 1:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if isinstance(spec, DiagonalSpec):
        values = np.exp(np.outer(spec.A_half, t)) * spec.B_half[:, None]
        return BasisTable(t_grid=t.copy(), values=values)
    if not isinstance(spec, DenseSpec):
        raise TypeError("spec must be a DiagonalSpec or DenseSpec")

    A, B = spec.A, spec.B
    values = np.empty((spec.N, len(t)), dtype=np.result_type(A.dtype, B.dtype, float))
    h = _uniform_spacing(t)
    if h is not None:
        x = dense_matrix_exp(t[0] * A) @ B if t[0] != 0.0 else B.astype(values.dtype)
        step = dense_matrix_exp(h * A)
        values[:, 0] = x
        for j in range(1, len(t)):
            x = step @ x
            values[:, j] = x
    else:
        for j, tj in enumerate(t):
            values[:, j] = dense_matrix_exp(tj * A) @ B
    return BasisTable(t_grid=t.copy(), values=values)
