"""Command-line front end: kernels, bases, spectra, convolution, verification
probes, and the materialized-vs-streaming benchmark.

CSV output carries '#'-prefixed metadata comments, then a column header, then
rows with 17-significant-digit numbers (lossless double round-trip).  JSON
reports are lists of {probe, params, metrics, pass}.  Files are written
atomically (temp file + rename).  Exit codes: 0 success, 1 verification
failure, 2 usage error.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .conv import Signal, fft_causal_conv, recurrent_scan
from .discretize import RULES, discretize
from .hippo import DenseSpec, hippo_d_spectrum, make_hippo_legs, make_hippo_normal
from .inits import (
    INIT_NAMES,
    DiagonalSpec,
    RealPartParam,
    init_C,
    init_log_dt,
    make_init,
)
from .kernel import (
    Kernel,
    dss_softmax_kernel,
    sample_basis,
    track_allocations,
    vandermonde_kernel,
    vandermonde_kernel_streaming,
)
from . import oracle

# Parameterization presets: discretization, real-part transform, whether B is
# randomized (emulating a trainable B) or frozen to ones, and softmax
# normalization.  's4d' is also the default flag set.
PRESETS = {
    "s4d": {"disc": "bilinear", "re_mode": "exp", "b_mode": "random", "softmax": False},
    "s4d-zoh": {"disc": "zoh", "re_mode": "exp", "b_mode": "random", "softmax": False},
    "dss": {"disc": "zoh", "re_mode": "identity", "b_mode": "ones", "softmax": True},
}

_DEFAULTS = PRESETS["s4d"]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated flag set for one CLI invocation."""

    subcommand: str
    init: str = "legsd"
    N: int = 64
    L: int = 1024
    dt: float | None = None
    dt_min: float = 1e-3
    dt_max: float = 1e-1
    seed: int = 0
    disc: str = "bilinear"
    re_mode: str = "exp"
    b_mode: str = "random"
    softmax: bool = False
    output: str | None = None
    fmt: str = "csv"
    extra: dict = field(default_factory=dict)


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    os.replace(tmp, path)


def _csv_text(meta: dict, header: list[str], rows) -> str:
    lines = [f"# {key}: {value}" for key, value in meta.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_json(path: str | None, payload) -> None:
    _write_text(path, json.dumps(_jsonable(payload), indent=2) + "\n")


def read_signal_csv(path: str) -> np.ndarray:
    """Read a single-channel 'l,value' CSV, ignoring '#' comment lines."""
    values = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise UsageError(f"malformed row in {path}: {line!r}")
            try:
                values.append(float(parts[1]))
            except ValueError:
                continue  # header row
    if not values:
        raise UsageError(f"no samples found in {path}")
    return np.asarray(values)


def build_spec(config: RunConfig) -> tuple[DiagonalSpec, float]:
    """Materialize the configured initialization, C, B, timescale, and the
    real-part transform; returns the spec (with constrained A) and dt."""
    spec = make_init(config.init, config.N, seed=config.seed)
    spec.C_half = init_C(spec.n_half, config.seed + 1)
    if config.dt is not None:
        if config.dt <= 0:
            raise UsageError("--dt must be positive")
        dt = float(config.dt)
    else:
        dt = float(np.exp(init_log_dt(config.dt_min, config.dt_max, config.seed + 2)))
    spec.log_dt = float(np.log(dt))
    if config.b_mode == "random":
        rng = np.random.default_rng(config.seed + 3)
        spec.B_half = spec.B_half + (
            rng.standard_normal(spec.n_half) + 1j * rng.standard_normal(spec.n_half)
        ) / np.sqrt(8.0)
    if config.re_mode != "identity":
        if (spec.A_half.real >= 0).any() and config.re_mode == "exp":
            raise UsageError(
                f"init '{config.init}' has nonnegative real parts; use --re-mode relu or identity"
            )
        param = RealPartParam.from_real_parts(spec.A_half.real, mode=config.re_mode)
        spec.A_half = param.apply(spec.A_half)
    return spec, dt


def build_kernel(config: RunConfig) -> Kernel:
    spec, dt = build_spec(config)
    disc = discretize(spec.A_half, spec.B_half, dt, config.disc)
    if config.softmax:
        return dss_softmax_kernel(spec, disc, config.L)
    return vandermonde_kernel(spec, disc, config.L)


def _kernel_meta(config: RunConfig, kernel: Kernel) -> dict:
    return {
        "init": kernel.meta.init,
        "rule": kernel.meta.rule,
        "N": kernel.meta.N,
        "dt": _fmt(kernel.meta.dt),
        "L": kernel.L,
        "seed": config.seed,
        "re_mode": config.re_mode,
        "b_mode": config.b_mode,
        "softmax": config.softmax,
    }


def cmd_kernel(config: RunConfig) -> int:
    kernel = build_kernel(config)
    rows = ((l, float(v)) for l, v in enumerate(kernel.values))
    _write_text(config.output, _csv_text(_kernel_meta(config, kernel), ["l", "value"], rows))
    return 0


def cmd_basis(config: RunConfig) -> int:
    t = np.linspace(0.0, config.extra["t_max"], config.extra["points"])
    dense = config.extra["dense"]
    if dense is None:
        spec, _ = build_spec(config)
        table = sample_basis(spec, t)
        name = config.init
    else:
        N = config.N
        if dense == "legs":
            legs, _ = make_hippo_legs(N)
            table = sample_basis(DenseSpec(A=legs.A, B=legs.B, C=None, N=N), t)
        elif dense == "normal":
            table = oracle.smoothed_normal_basis(N, t)
        elif dense == "normal-unscaled":
            normal = make_hippo_normal(N)
            table = sample_basis(DenseSpec(A=normal.A, B=normal.B, C=None, N=N), t)
        else:
            raise UsageError(f"unknown dense basis '{dense}'")
        name = f"dense-{dense}"
    rows_limit = config.extra["rows"]
    values = table.values[:rows_limit] if rows_limit else table.values
    meta = {"basis": name, "N": config.N, "rows": values.shape[0], "points": len(t)}
    rows = (
        (n, float(t[j]), float(values[n, j].real), float(np.imag(values[n, j])))
        for n in range(values.shape[0])
        for j in range(len(t))
    )
    _write_text(config.output, _csv_text(meta, ["n", "t", "re", "im"], rows))
    return 0


_SPECTRUM_FAMILIES = ("legsd", "inv", "inv2", "quad", "lin")


def cmd_spectrum(config: RunConfig) -> int:
    families = _SPECTRUM_FAMILIES if config.extra["all"] else (config.init,)
    specs = {name: make_init(name, config.N, seed=config.seed) for name in families}
    if config.fmt == "json":
        payload = {
            name: {
                "re": list(spec.A_half.real),
                "im": list(spec.A_half.imag),
            }
            for name, spec in specs.items()
        }
        _write_json(config.output, payload)
        return 0
    meta = {"N": config.N, "families": ",".join(families)}
    rows = (
        (name, n, float(spec.A_half[n].real), float(spec.A_half[n].imag))
        for name, spec in specs.items()
        for n in range(spec.n_half)
    )
    _write_text(config.output, _csv_text(meta, ["init", "n", "re", "im"], rows))
    return 0


def cmd_conv(config: RunConfig) -> int:
    samples = read_signal_csv(config.extra["input"])
    config.L = len(samples)
    spec, dt = build_spec(config)
    disc = discretize(spec.A_half, spec.B_half, dt, config.disc)
    signal = Signal(samples=samples)
    if config.extra["mode"] == "fft":
        if config.softmax:
            kernel = dss_softmax_kernel(spec, disc, config.L)
        else:
            kernel = vandermonde_kernel(spec, disc, config.L)
        out = fft_causal_conv(signal, kernel)
    else:
        if config.softmax:
            raise UsageError("softmax normalization has no recurrent form; use --mode fft")
        out, _ = recurrent_scan(disc, spec.C_half, signal, conj_pairs=spec.conj_pairs)
    meta = {
        "init": config.init,
        "rule": config.disc,
        "N": config.N,
        "dt": _fmt(dt),
        "L": config.L,
        "seed": config.seed,
        "mode": config.extra["mode"],
    }
    rows = ((l, float(v)) for l, v in enumerate(np.atleast_1d(out.samples)))
    _write_text(config.output, _csv_text(meta, ["l", "value"], rows))
    return 0


def _probe_proposition(n_values, tolerance=1e-8):
    deviations = {}
    for N in n_values:
        values = hippo_d_spectrum(N).eigenvalues
        deviations[str(N)] = float(np.abs(values.real + 0.5).max())
    ok = all(dev <= tolerance for dev in deviations.values())
    return {
        "probe": "proposition-real-parts",
        "params": {"N": list(n_values), "tolerance": tolerance},
        "metrics": {"max_real_deviation": deviations},
        "pass": ok,
    }


def _probe_conjecture(N):
    report = oracle.conjecture_probe(N)
    ok = (
        report.band_ratio <= 4.0
        and 0.4 <= abs(report.c_estimate) <= 0.65
        and report.max_real_deviation <= 1e-8
    )
    return {
        "probe": "conjecture-asymptotics",
        "params": {"N": N},
        "metrics": {
            "max_imag": report.max_imag,
            "c_estimate": report.c_estimate,
            "band_ratio": report.band_ratio,
            "max_real_deviation": report.max_real_deviation,
        },
        "pass": ok,
    }


def _probe_theorem(n_values, points):
    t = np.linspace(0.0, 3.0, points)
    report = oracle.theorem_legsd_convergence(list(n_values), t)
    strict = all(
        report.errors[i + 1] < report.errors[i] for i in range(len(report.errors) - 1)
    )
    return {
        "probe": "theorem-convergence",
        "params": {"N": list(n_values), "points": points},
        "metrics": {"errors": report.errors},
        "pass": strict,
    }


def _probe_legendre():
    defect = oracle.legendre_orthonormality_defect(10)
    return {
        "probe": "legendre-orthonormality",
        "params": {"n_max": 10},
        "metrics": {"max_defect": defect},
        "pass": defect <= 1e-8,
    }


def _probe_duality(count, seed):
    rng = np.random.default_rng(seed)
    worst_scan = 0.0
    worst_fft = 0.0
    for _ in range(count):
        spec, dt = oracle.random_stable_spec(rng)
        rule = "bilinear" if rng.integers(2) else "zoh"
        disc = discretize(spec.A_half, spec.B_half, dt, rule)
        L = int(rng.integers(16, 257))
        kernel = vandermonde_kernel(spec, disc, L)
        impulse = np.zeros(L)
        impulse[0] = 1.0
        scan_out, _ = recurrent_scan(disc, spec.C_half, Signal(impulse))
        scale = max(float(np.abs(kernel.values).max()), np.finfo(float).tiny)
        worst_scan = max(worst_scan, float(np.abs(scan_out.samples - kernel.values).max()) / scale)
        u = Signal(rng.standard_normal(L))
        fft_out = fft_causal_conv(u, kernel)
        scan_u, _ = recurrent_scan(disc, spec.C_half, u)
        scale_y = max(float(np.abs(scan_u.samples).max()), np.finfo(float).tiny)
        worst_fft = max(worst_fft, float(np.abs(fft_out.samples - scan_u.samples).max()) / scale_y)
    return {
        "probe": "convolution-duality",
        "params": {"count": count, "seed": seed},
        "metrics": {"worst_kernel_vs_scan": worst_scan, "worst_fft_vs_scan": worst_fft},
        "pass": worst_scan <= 1e-10 and worst_fft <= 1e-8,
    }


def _probe_stability(draws, seed):
    rng = np.random.default_rng(seed)
    re = -np.exp(rng.uniform(np.log(1e-3), np.log(1e3), draws))
    im = rng.uniform(0.0, 1e4, draws)
    a = re + 1j * im
    b = np.ones(draws, dtype=complex)
    worst = 0.0
    for dt in np.exp(rng.uniform(np.log(1e-4), np.log(1.0), 8)):
        for rule in RULES:
            disc = discretize(a, b, float(dt), rule)
            worst = max(worst, float(np.abs(disc.A_bar).max()))
    return {
        "probe": "stability-contract",
        "params": {"draws": draws, "seed": seed},
        "metrics": {"max_modulus": worst},
        "pass": worst < 1.0,
    }


def _probe_perturbation(seeds=(3, 13, 26), sigmas=(0.3, 0.4, 0.5), N=64, points=128):
    t = np.linspace(0.0, 3.0, points)
    baseline = np.mean(
        [oracle.perturbation_experiment(0.0, s, N, t)[1] for s in seeds]
    )
    averages = []
    for sigma in sigmas:
        averages.append(
            float(np.mean([oracle.perturbation_experiment(sigma, s, N, t)[1] for s in seeds]))
        )
    monotone = all(averages[i + 1] >= averages[i] for i in range(len(averages) - 1))
    ok = monotone and averages[-1] > 10.0 * baseline
    return {
        "probe": "rank1-perturbation",
        "params": {"sigmas": list(sigmas), "seeds": list(seeds), "N": N},
        "metrics": {"baseline": float(baseline), "divergence": averages},
        "pass": ok,
    }


def _probe_dss(seed):
    rng = np.random.default_rng(seed)
    spec, dt = oracle.random_stable_spec(rng, n_half=8)
    disc = discretize(spec.A_half, spec.B_half, dt, "zoh")
    k512 = dss_softmax_kernel(spec, disc, 512)
    k256 = dss_softmax_kernel(spec, disc, 256)
    prefix_gap = float(np.abs(k512.values[:256] - k256.values).max())
    return {
        "probe": "dss-length-dependence",
        "params": {"seed": seed},
        "metrics": {"prefix_gap": prefix_gap},
        "pass": prefix_gap > 1e-6,
    }


PROBES = (
    "proposition",
    "conjecture",
    "theorem",
    "legendre",
    "duality",
    "stability",
    "perturbation",
    "dss",
)


def cmd_verify(config: RunConfig) -> int:
    requested = config.extra["probes"]
    reports = []
    for name in requested:
        if name == "proposition":
            reports.append(_probe_proposition(config.extra["n_values"]))
        elif name == "conjecture":
            reports.append(_probe_conjecture(max(config.extra["n_values"])))
        elif name == "theorem":
            reports.append(_probe_theorem(config.extra["theorem_n"], config.extra["points"]))
        elif name == "legendre":
            reports.append(_probe_legendre())
        elif name == "duality":
            reports.append(_probe_duality(10, config.seed))
        elif name == "stability":
            reports.append(_probe_stability(10_000, config.seed))
        elif name == "perturbation":
            reports.append(_probe_perturbation())
        elif name == "dss":
            reports.append(_probe_dss(config.seed))
        else:
            raise UsageError(f"unknown probe '{name}' (choose from {PROBES})")
    _write_json(config.output, reports)
    return 0 if all(r["pass"] for r in reports) else 1


def _bench_cell(config: RunConfig, N: int, L: int, repeats: int):
    cell_config = RunConfig(
        subcommand="kernel",
        init=config.init,
        N=N,
        L=L,
        dt=config.dt if config.dt is not None else 1e-2,
        seed=config.seed,
        disc=config.disc,
        re_mode=config.re_mode,
        b_mode=config.b_mode,
    )
    spec, dt = build_spec(cell_config)
    disc = discretize(spec.A_half, spec.B_half, dt, cell_config.disc)

    def run(fn):
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            with track_allocations() as tally:
                kernel = fn(spec, disc, L)
            best = min(best, time.perf_counter() - start)
        return kernel, best, tally.scalars

    k_mat, t_mat, alloc_mat = run(vandermonde_kernel)
    k_str, t_str, alloc_str = run(vandermonde_kernel_streaming)
    meta = _kernel_meta(cell_config, k_mat)
    csv_mat = _csv_text(meta, ["l", "value"], ((l, float(v)) for l, v in enumerate(k_mat.values)))
    csv_str = _csv_text(meta, ["l", "value"], ((l, float(v)) for l, v in enumerate(k_str.values)))
    return {
        "N": N,
        "L": L,
        "time_materialized": t_mat,
        "time_streaming": t_str,
        "alloc_materialized": alloc_mat,
        "alloc_streaming": alloc_str,
        "identical_csv": csv_mat.encode() == csv_str.encode(),
    }


def cmd_bench(config: RunConfig) -> int:
    cells = []
    for N in config.extra["n_grid"]:
        for L in config.extra["l_grid"]:
            cells.append(_bench_cell(config, N, L, config.extra["repeats"]))
    log_nl = np.log([c["N"] * c["L"] for c in cells])
    log_alloc = np.log([c["alloc_streaming"] for c in cells])
    centered = log_nl - log_nl.mean()
    denom = float((centered**2).sum())
    exponent = float((centered * (log_alloc - log_alloc.mean())).sum() / denom) if denom else 0.0
    identical = all(c["identical_csv"] for c in cells)
    report = {
        "probe": "bench-vandermonde",
        "params": {
            "N_grid": list(config.extra["n_grid"]),
            "L_grid": list(config.extra["l_grid"]),
            "repeats": config.extra["repeats"],
            "init": config.init,
        },
        "metrics": {"cells": cells, "alloc_fit_exponent": exponent},
        "pass": identical and exponent < 0.2,
    }
    _write_json(config.output, [report])
    return 0 if report["pass"] else 1


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dssm",
        description="Diagonal state space model kernels, spectra, and verification probes.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, with_kernel_flags=True):
        p.add_argument("--seed", type=int, default=None, help="default from SSM_SEED, else 0")
        p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
        if with_kernel_flags:
            p.add_argument("--init", choices=INIT_NAMES, default="legsd")
            p.add_argument("--N", type=int, default=64)
            p.add_argument("--preset", choices=sorted(PRESETS), default=None)
            p.add_argument("--disc", choices=RULES, default=None)
            p.add_argument("--re-mode", choices=("exp", "relu", "identity"), default=None)
            p.add_argument("--b", choices=("ones", "random"), default=None, dest="b_mode")
            p.add_argument("--softmax", action="store_true", default=None)
            p.add_argument("--no-softmax", action="store_false", dest="softmax")
            p.add_argument("--dt", type=float, default=None)
            p.add_argument("--dt-min", type=float, default=1e-3)
            p.add_argument("--dt-max", type=float, default=1e-1)

    p_kernel = sub.add_parser("kernel", help="emit a convolution kernel as CSV")
    add_common(p_kernel)
    p_kernel.add_argument("--L", type=int, default=1024)

    p_basis = sub.add_parser("basis", help="emit basis function samples as CSV")
    add_common(p_basis)
    p_basis.add_argument("--dense", choices=("legs", "normal", "normal-unscaled"), default=None)
    p_basis.add_argument("--t-max", type=float, default=3.0)
    p_basis.add_argument("--points", type=int, default=512)
    p_basis.add_argument("--rows", type=int, default=8, help="0 means all rows")

    p_spec = sub.add_parser("spectrum", help="emit half-spectra as CSV or JSON")
    add_common(p_spec)
    p_spec.add_argument("--all", action="store_true", help="emit the comparison families")
    p_spec.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")

    p_conv = sub.add_parser("conv", help="convolve a CSV signal with a kernel")
    add_common(p_conv)
    p_conv.add_argument("--input", required=True, help="input CSV with l,value rows")
    p_conv.add_argument("--mode", choices=("fft", "scan"), default="fft")

    p_verify = sub.add_parser("verify", help="run verification probes, emit JSON")
    add_common(p_verify, with_kernel_flags=False)
    p_verify.add_argument("--probe", default=",".join(PROBES), help="comma-separated probe names")
    p_verify.add_argument("--N-list", default="2,16,64,256", help="state sizes for spectrum probes")
    p_verify.add_argument("--theorem-N", default="16,64,256", help="state sizes for the convergence probe")
    p_verify.add_argument("--points", type=int, default=256)

    p_bench = sub.add_parser("bench", help="benchmark kernel variants, emit JSON")
    add_common(p_bench)
    # kernel-product timing should not be dominated by spectrum construction
    p_bench.set_defaults(init="lin")
    p_bench.add_argument("--N-grid", default="64,256,1024")
    p_bench.add_argument("--L-grid", default="1024,16384")
    p_bench.add_argument("--repeats", type=int, default=3)

    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    seed = args.seed
    if seed is None:
        env = os.environ.get("SSM_SEED")
        try:
            seed = int(env) if env else 0
        except ValueError as exc:
            raise UsageError(f"SSM_SEED must be an integer, got {env!r}") from exc

    config = RunConfig(subcommand=args.subcommand, seed=seed, output=args.output)
    if hasattr(args, "init"):
        preset = PRESETS.get(args.preset, {}) if args.preset else {}
        for key in ("disc", "re_mode", "b_mode", "softmax"):
            flag = getattr(args, key)
            config_value = flag if flag is not None else preset.get(key, _DEFAULTS[key])
            setattr(config, key, config_value)
        config.init = args.init
        config.N = args.N
        config.dt = args.dt
        config.dt_min = args.dt_min
        config.dt_max = args.dt_max
        if config.softmax and config.disc != "zoh":
            raise UsageError(
                "softmax normalization requires --disc zoh (the DSS parameterization "
                "pairs softmax with zero-order hold); bilinear is incompatible"
            )
    if hasattr(args, "L"):
        config.L = args.L
    if hasattr(args, "fmt"):
        config.fmt = args.fmt
    if args.subcommand == "basis":
        config.extra = {
            "dense": args.dense,
            "t_max": args.t_max,
            "points": args.points,
            "rows": args.rows,
        }
    elif args.subcommand == "spectrum":
        config.extra = {"all": args.all}
    elif args.subcommand == "conv":
        config.extra = {"input": args.input, "mode": args.mode}
    elif args.subcommand == "verify":
        config.extra = {
            "probes": [p for p in args.probe.split(",") if p],
            "n_values": _int_list(args.N_list),
            "theorem_n": _int_list(args.theorem_N),
            "points": args.points,
        }
    elif args.subcommand == "bench":
        config.extra = {
            "n_grid": _int_list(args.N_grid),
            "l_grid": _int_list(args.L_grid),
            "repeats": args.repeats,
        }
    return config


_COMMANDS = {
    "kernel": cmd_kernel,
    "basis": cmd_basis,
    "spectrum": cmd_spectrum,
    "conv": cmd_conv,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        return _COMMANDS[args.subcommand](config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
