"""Independent ground-truth computations used for verification.

Dense-matrix kernels and basis samples, the closed-form Legendre basis, the
large-N convergence probe for the normal LegS basis, the spectrum asymptotics
probe, and the random rank-1 perturbation experiment.
"""

from dataclasses import dataclass

import numpy as np

from .discretize import discretize, lu_factor, lu_solve
from .hippo import DenseSpec, hippo_d_spectrum, make_hippo_legs, make_hippo_normal
from .inits import DiagonalSpec
from .kernel import BasisTable, Kernel, KernelMeta, sample_basis

__all__ = [
    "ConvergenceReport",
    "ConjectureReport",
    "dense_kernel",
    "state_space_transform",
    "legendre_basis",
    "legendre_basis_table",
    "gauss_legendre_nodes",
    "legendre_orthonormality_defect",
    "smoothed_normal_basis",
    "theorem_legsd_convergence",
    "conjecture_probe",
    "perturbation_experiment",
    "fout_truncation_basis",
    "random_stable_spec",
    "discrete_basis",
]

ORACLE_MAX_N = 4096


@dataclass
class ConvergenceReport:
    """Sup-norm errors of the normal-variant basis against the closed form."""

    N_values: list[int]
    errors: list[float]
    monotone: bool


@dataclass
class ConjectureReport:
    """Measured asymptotics of the diagonalized normal LegS spectrum."""

    N: int
    max_imag: float
    c_estimate: float
    band_ratio: float
    max_real_deviation: float
    scaled_imag: np.ndarray


def dense_kernel(spec: DenseSpec, rule: str, dt: float, L: int) -> Kernel:
    """Discrete kernel (C B_bar, C A_bar B_bar, ...) by direct iteration.

    Small-scale reference path: discretizes the dense system and applies
    A_bar repeatedly, recording the real part of C v at each step.
    """
    if spec.N > ORACLE_MAX_N:
        raise ValueError(f"dense oracle is capped at N={ORACLE_MAX_N}")
    if spec.C is None:
        raise ValueError("dense kernel needs C")
    if L < 1:
        raise ValueError("kernel length must be >= 1")
    disc = discretize(spec.A, spec.B, dt, rule)
    v = disc.B_bar.astype(complex)
    C = spec.C.astype(complex)
    values = np.empty(L, dtype=float)
    for l in range(L):
        values[l] = (C @ v).real
        v = disc.A_bar @ v
    meta = KernelMeta(init="dense", rule=rule, N=spec.N, dt=float(dt))
    return Kernel(values=values, L=L, meta=meta)


def state_space_transform(spec: DenseSpec, V: np.ndarray) -> DenseSpec:
    """Change of state basis: (A, B, C) -> (V^-1 A V, V^-1 B, C V).

    The input/output map is invariant under this transform, which is what
    makes diagonalization legitimate: the kernel of the transformed system
    equals the kernel of the original.
    """
    V = np.asarray(V)
    if V.shape != (spec.N, spec.N):
        raise ValueError("V must match the state size")
    factored = lu_factor(V)
    A_t = lu_solve(factored, spec.A @ V)
    B_t = lu_solve(factored, spec.B)
    C_t = None if spec.C is None else spec.C @ V
    return DenseSpec(A=A_t, B=B_t, C=C_t, N=spec.N)


def legendre_basis_table(n_max: int, t: np.ndarray) -> np.ndarray:
    """Rows n = 0..n_max of the closed-form basis L_n(e^-t) e^-t.

    L_n is the Legendre polynomial shifted to [0, 1] and scaled by
    sqrt(2n+1), which makes the family orthonormal on [0, 1].  Evaluation
    uses the three-term recurrence at y = 2 e^-t - 1.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    t = np.asarray(t, dtype=float)
    x = np.exp(-t)
    y = 2.0 * x - 1.0
    polys = np.empty((n_max + 1, len(t)), dtype=float)
    polys[0] = 1.0
    if n_max >= 1:
        polys[1] = y
    for k in range(1, n_max):
        polys[k + 1] = ((2 * k + 1) * y * polys[k] - k * polys[k - 1]) / (k + 1)
    scale = np.sqrt(2.0 * np.arange(n_max + 1) + 1.0)
    return polys * scale[:, None] * x[None, :]


def legendre_basis(n: int, t):
    """Closed-form basis function L_n(e^-t) e^-t at scalar or array t."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    values = legendre_basis_table(n, t_arr)[n]
    return float(values[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else values


def gauss_legendre_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.

    Exact for polynomials of degree <= 2n-1; used to integrate products of
    the closed-form basis when checking orthonormality.
    """
    if n < 1:
        raise ValueError("need at least one node")

    def value_and_derivative(x):
        p_prev = np.ones_like(x)
        p = x.copy()
        for m in range(1, n):
            p, p_prev = ((2 * m + 1) * x * p - m * p_prev) / (m + 1), p
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        return p, dp

    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = value_and_derivative(x)
        dx = p / dp
        x -= dx
        if np.abs(dx).max() < 1e-15:
            break
    _, dp = value_and_derivative(x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


def legendre_orthonormality_defect(n_max: int = 10) -> float:
    """Worst deviation of the numerically integrated Gram matrix from identity.

    Integrates <L_n(e^-t), L_m(e^-t)> under the weight e^-t over [0, inf) by
    mapping to the unit interval (x = e^-t) and applying Gauss quadrature;
    the basis values are produced by the recurrence, so this cross-checks it
    against the orthonormality that defines the family.
    """
    nodes, weights = gauss_legendre_nodes(max(2 * n_max + 2, 8))
    x = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    t = -np.log(x)
    polys = legendre_basis_table(n_max, t) / x[None, :]
    gram = (polys * w[None, :]) @ polys.T
    return float(np.abs(gram - np.eye(n_max + 1)).max())


def smoothed_normal_basis(N: int, t_grid: np.ndarray, refine: int = 4) -> BasisTable:
    """Basis of the normal LegS variant with input map B/2, numerically
    realized through trapezoid (bilinear) integration.

    The grid must be uniform.  The integrator runs at `refine` internal
    substeps per grid interval and records every refine-th state, normalized
    by the step so values are on the continuous scale.  The bilinear input
    map weights each mode by ~1/(1 - h*lambda/2), which damps the huge
    imaginary frequencies (up to ~N^2/pi); that damping is what makes the
    limit visible pointwise, since the exact basis only converges in the
    weak sense.  An explicit integrator is not an option here: any stable
    step would need h ~ 1/N^2.
    """
    t = np.asarray(t_grid, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two grid points")
    spacing = float(t[1] - t[0])
    if spacing <= 0 or not np.allclose(np.diff(t), spacing, rtol=1e-9, atol=0.0):
        raise ValueError("t_grid must be uniformly spaced")
    if t[0] != 0.0:
        raise ValueError("grid must start at t=0")
    h = spacing / refine
    normal = make_hippo_normal(N)
    disc = discretize(normal.A, normal.B / 2.0, h, "bilinear")
    values = np.empty((N, len(t)))
    v = disc.B_bar / h
    steps = (len(t) - 1) * refine + 1
    for l in range(steps):
        if l % refine == 0:
            values[:, l // refine] = v
        v = disc.A_bar @ v
    return BasisTable(t_grid=t.copy(), values=values)


def theorem_legsd_convergence(
    N_list: list[int], t_grid: np.ndarray, n_max: int = 4
) -> ConvergenceReport:
    """Sup-norm gap between the normal-variant basis (input map B/2) and the
    Legendre closed form, for each N in N_list."""
    t = np.asarray(t_grid, dtype=float)
    errors = []
    for N in N_list:
        table = smoothed_normal_basis(N, t)
        rows = min(n_max, N - 1)
        reference = legendre_basis_table(rows, t)
        gap = np.abs(table.values[: rows + 1] - reference).max()
        errors.append(float(gap))
    monotone = all(errors[i + 1] <= errors[i] for i in range(len(errors) - 1))
    return ConvergenceReport(N_values=list(N_list), errors=errors, monotone=monotone)


def conjecture_probe(N: int) -> ConjectureReport:
    """Asymptotics of the diagonalized normal LegS spectrum at one N.

    Reports the largest imaginary part minus N^2/pi (the measured additive
    constant), the spread of n * Im_n over the middle half of the sorted
    positive spectrum (inverse-law band), and the worst real-part deviation
    from -1/2.
    """
    values = hippo_d_spectrum(N).eigenvalues
    positive = np.sort(values.imag[values.imag > 0])[::-1]
    max_imag = float(values.imag.max())
    c_estimate = max_imag - N * N / np.pi
    n_idx = np.arange(len(positive), dtype=float)
    scaled = n_idx * positive
    lo = len(positive) // 4
    hi = 3 * len(positive) // 4
    middle = scaled[lo:hi]
    band_ratio = float(middle.max() / middle.min()) if len(middle) else float("nan")
    return ConjectureReport(
        N=N,
        max_imag=max_imag,
        c_estimate=float(c_estimate),
        band_ratio=band_ratio,
        max_real_deviation=float(np.abs(values.real + 0.5).max()),
        scaled_imag=scaled,
    )


def perturbation_experiment(
    sigma: float, seed: int, N: int, t_grid: np.ndarray
) -> tuple[BasisTable, float]:
    """Basis of (A + P P^T, B) for LegS (A, B) and random Gaussian P.

    P has i.i.d. entries of standard deviation sigma.  Returns the sampled
    table and its divergence scalar max |value|; unlike the special rank-1
    factor of the normal variant, random factors push eigenvalues into the
    right half plane and the basis blows up.
    """
    legs, _ = make_hippo_legs(N)
    rng = np.random.default_rng(seed)
    P = sigma * rng.standard_normal(N)
    perturbed = DenseSpec(A=legs.A + np.outer(P, P), B=legs.B, C=None, N=N)
    table = sample_basis(perturbed, t_grid)
    return table, float(np.abs(table.values).max())


def fout_truncation_basis(N: int, t_grid: np.ndarray) -> BasisTable:
    """Basis of the truncated Fourier diagonal: A_n = 2 pi i n, B = 1.

    Real part zero means every row has constant magnitude |e^{i w t}| = 1;
    nothing decays, unlike the -1/2 families.
    """
    half = N // 2
    if half < 1:
        raise ValueError("need N >= 2")
    a = 2j * np.pi * np.arange(half)
    spec = DiagonalSpec(
        A_half=a, B_half=np.ones(half, dtype=complex), N=N, name="fout-trunc"
    )
    return sample_basis(spec, t_grid)


def random_stable_spec(rng: np.random.Generator, n_half: int | None = None) -> tuple[DiagonalSpec, float]:
    """Random left-half-plane diagonal spec plus timescale, for property probes."""
    if n_half is None:
        n_half = int(rng.integers(2, 33))
    re = -np.exp(rng.uniform(np.log(0.05), np.log(5.0), n_half))
    im = rng.uniform(0.0, 60.0, n_half)
    spec = DiagonalSpec(
        A_half=re + 1j * im,
        B_half=np.ones(n_half, dtype=complex),
        C_half=rng.standard_normal(n_half) + 1j * rng.standard_normal(n_half),
        N=2 * n_half,
        name="random",
    )
    dt = float(np.exp(rng.uniform(np.log(1e-3), np.log(1e-1))))
    return spec, dt


def discrete_basis(spec: DenseSpec, rule: str, dt: float, L: int) -> BasisTable:
    """Rows of (B_bar, A_bar B_bar, ..., A_bar^{L-1} B_bar) on the step grid.

    Discrete analogue of the continuous basis sample; the grid is l * dt.
    """
    if L < 1:
        raise ValueError("need L >= 1")
    disc = discretize(spec.A, spec.B, dt, rule)
    values = np.empty((spec.N, L), dtype=disc.B_bar.dtype)
    v = disc.B_bar.copy()
    for l in range(L):
        values[:, l] = v
        v = disc.A_bar @ v
    return BasisTable(t_grid=dt * np.arange(L, dtype=float), values=values)
