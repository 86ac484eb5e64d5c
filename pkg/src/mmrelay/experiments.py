"""
Parameter sweeps, figure reproduction and the validation run.

Experiment files are flat ``key = value`` text with ``#`` comments; grids
are comma-separated lists. Results are CSV with a fixed column order, plus
a JSON sidecar holding the run metadata (seeds, fading coefficients).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analytics, dense, mr
from .analytics import ScalingLaw
from .model import (
    ConfigError,
    DistortionMode,
    LargeScaleFading,
    SystemConfig,
    draw_channels,
    draw_distortions,
    draw_large_scale_fading,
    validate_config,
)
from .montecarlo import (
    IDENTITIES,
    estimate_se,
    lln_convergence_suite,
    simulate,
    spectral_efficiency,
    jensen_bound_from_sinr,
    standard_error,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "N",
    "kappa",
    "z",
    "se_mc_mean",
    "se_mc_stderr",
    "se_lemma1",
    "se_corollary",
    "sum_se",
    "wallclock_ms",
)

FIG1_N_GRID = (64, 128, 192, 256, 384, 512)
FIG1_KAPPAS = (0.0, 0.05, 0.1, 0.15)
FIG2_N_GRID = (64, 128, 192, 256, 384, 512, 768, 1024)
FIG2_Z = (0.5, 0.75, 1.0, 1.5)
FIG2_KAPPA0 = 0.05
DEFAULT_TRIALS = 2000
DEFAULT_SEED = 20170101

_FLOAT_KEYS = {"p_user", "p_relay", "noise_relay", "noise_a", "noise_b", "kappa0"}
_INT_KEYS = {"n_pairs", "trials", "seed", "fading_seed", "threads"}
_GRID_KEYS = {"n_grid": int, "kappa_grid": float, "z_grid": float}
_STR_KEYS = {"fading", "output", "distortion_mode", "emit_analytics", "record_time"}
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | set(_GRID_KEYS) | _STR_KEYS
KEY_ALIASES = {"K": "n_pairs", "P_U": "p_user", "P_R": "p_relay", "kappa_0": "kappa0"}


@dataclass
class ExperimentSpec:
    base: SystemConfig
    n_grid: list[int]
    kappa_grid: list[float] | None = None
    laws: list[ScalingLaw] | None = None
    n_trials: int = DEFAULT_TRIALS
    master_seed: int = DEFAULT_SEED
    fading_mode: str = "fixed"
    fading_seed: int | None = None
    output_path: Path | None = None
    emit_analytics: bool = True
    threads: int = 1
    record_time: bool = False

    @property
    def mode(self) -> str:
        return "kappa" if self.kappa_grid is not None else "scaling"

    def fading(self) -> LargeScaleFading:
        k = self.base.n_pairs
        if self.fading_mode == "fixed":
            return LargeScaleFading.symmetric(k)
        return draw_large_scale_fading(k, np.random.default_rng(self.fading_seed))


@dataclass
class SweepRow:
    n: int
    kappa: float
    z: float | None
    se_mc_mean: float
    se_mc_stderr: float
    se_lemma1: float | None
    se_corollary: float | None
    sum_se: float
    wallclock_ms: float | None = None
    extra: dict = field(default_factory=dict, repr=False)

    def csv_fields(self) -> list[str]:
        def num(x):
            return "" if x is None else repr(float(x))

        return [
            str(self.n),
            num(self.kappa),
            num(self.z),
            num(self.se_mc_mean),
            num(self.se_mc_stderr),
            num(self.se_lemma1),
            num(self.se_corollary),
            num(self.sum_se),
            "" if self.wallclock_ms is None else f"{self.wallclock_ms:.1f}",
        ]


# -- parsing -------------------------------------------------------------------


def _parse_bool(text: str, where: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def _parse_value(key: str, text: str, where: str):
    text = text.strip()
    try:
        if key in _GRID_KEYS:
            items = [t.strip() for t in text.split(",")]
            if not items or any(t == "" for t in items):
                raise ValueError("empty grid entry")
            cast = _GRID_KEYS[key]
            if cast is int:
                values = []
                for t in items:
                    v = float(t)
                    if v != int(v):
                        raise ValueError(f"{t} is not an integer")
                    values.append(int(v))
                return values
            return [float(t) for t in items]
        if key in ("noise_a", "noise_b"):
            items = [float(t) for t in text.split(",")]
            return items[0] if len(items) == 1 else items
        if key in _FLOAT_KEYS:
            return float(text)
        if key in _INT_KEYS:
            value = float(text)
            if value != int(value):
                raise ValueError(f"{text} is not an integer")
            return int(value)
    except ValueError as exc:
        raise ConfigError(f"{where}: malformed value for {key!r}: {exc}") from None
    if key in ("emit_analytics", "record_time"):
        return _parse_bool(text, where)
    return text


def read_config_file(path) -> dict:
    """Parse a key=value experiment file into a dict of typed values."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    values: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        key, text = (s.strip() for s in line.split("=", 1))
        key = KEY_ALIASES.get(key, key)
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        values[key] = _parse_value(key, text, where)
    return values


def _check_grid(name: str, grid, where: str):
    if not grid:
        raise ConfigError(f"{where}: {name} is empty")
    for a, b in zip(grid, grid[1:]):
        if b <= a:
            raise ConfigError(f"{where}: {name} must be strictly increasing (duplicate or unsorted at {b})")


def parse_experiment(path=None, overrides: dict | None = None, command: str = "sweep") -> ExperimentSpec:
    """Build a validated experiment from a config file and CLI overrides.

    ``command`` selects defaults: ``fig1`` fills the kappa grid, ``fig2``
    the scaling-law list. Flag overrides take precedence over the file.
    """
    values = read_config_file(path) if path is not None else {}
    where = str(path) if path is not None else "flags"
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    has_kappa = "kappa_grid" in values
    has_z = "z_grid" in values
    if has_kappa and (has_z or "kappa0" in values):
        raise ConfigError(f"{where}: give either kappa_grid or (kappa0, z_grid), not both")
    if has_z and "kappa0" not in values:
        raise ConfigError(f"{where}: z_grid given without kappa0")
    if "kappa0" in values and not has_z:
        if command != "fig2":
            raise ConfigError(f"{where}: kappa0 given without z_grid")
        values["z_grid"] = list(FIG2_Z)
        has_z = True

    if command == "fig1" and has_z:
        raise ConfigError(f"{where}: fig1 needs a kappa grid, not a scaling law")
    if command == "fig2" and has_kappa:
        raise ConfigError(f"{where}: fig2 needs a scaling law, not a kappa grid")
    if not has_kappa and not has_z:
        if command == "fig2":
            values["kappa0"] = FIG2_KAPPA0
            values["z_grid"] = list(FIG2_Z)
        else:
            values["kappa_grid"] = list(FIG1_KAPPAS)
    default_n = FIG2_N_GRID if "z_grid" in values else FIG1_N_GRID
    n_grid = list(values.get("n_grid", default_n))
    _check_grid("n_grid", n_grid, where)

    kappa_grid = laws = None
    if "kappa_grid" in values:
        kappa_grid = list(values["kappa_grid"])
        _check_grid("kappa_grid", kappa_grid, where)
        if any(k < 0 for k in kappa_grid):
            raise ConfigError(f"{where}: kappa_grid entries must be >= 0")
    else:
        z_grid = list(values["z_grid"])
        _check_grid("z_grid", z_grid, where)
        laws = [ScalingLaw(values["kappa0"], z) for z in z_grid]

    k = values.get("n_pairs", 10)
    base = SystemConfig(
        n_antennas=max(n_grid),
        n_pairs=k,
        p_user=values.get("p_user", 10.0),
        p_relay=values.get("p_relay", 40.0),
        noise_relay=values.get("noise_relay", 1.0),
        noise_a=values.get("noise_a", 1.0),
        noise_b=values.get("noise_b", 1.0),
        distortion_mode=values.get("distortion_mode", DistortionMode.REALIZATION),
    )
    base = validate_config(base)
    if k > min(n_grid):
        raise ConfigError(f"{where}: n_pairs K={k} exceeds the smallest antenna count {min(n_grid)}")

    fading_mode = values.get("fading", "fixed")
    if fading_mode in ("paper", "drawn"):
        fading_mode = "drawn"
    elif fading_mode != "fixed":
        raise ConfigError(f"{where}: fading must be 'fixed' or 'paper', got {fading_mode!r}")
    fading_seed = values.get("fading_seed")
    if fading_mode == "drawn" and fading_seed is None:
        fading_seed = values.get("seed", DEFAULT_SEED)

    n_trials = values.get("trials", DEFAULT_TRIALS)
    if n_trials < 2:
        raise ConfigError(f"{where}: trials must be >= 2, got {n_trials}")
    threads = values.get("threads", 1)
    if threads < 1:
        raise ConfigError(f"{where}: threads must be >= 1, got {threads}")
    seed = values.get("seed", DEFAULT_SEED)
    if seed < 0:
        raise ConfigError(f"{where}: seed must be non-negative, got {seed}")
    output = values.get("output")
    return ExperimentSpec(
        base=base,
        n_grid=n_grid,
        kappa_grid=kappa_grid,
        laws=laws,
        n_trials=n_trials,
        master_seed=seed,
        fading_mode=fading_mode,
        fading_seed=fading_seed,
        output_path=Path(output) if output else None,
        emit_analytics=values.get("emit_analytics", True),
        threads=threads,
        record_time=values.get("record_time", False),
    )


# -- sweeps --------------------------------------------------------------------


def point_seed(master_seed: int, n: int) -> int:
    """Seed for all grid points with antenna count ``n``.

    Keyed by N only, so every kappa (or z) at a given N reuses the same
    channel draws.
    """
    return int(np.random.SeedSequence([int(master_seed), int(n)]).generate_state(1)[0])


def _grid_points(spec: ExperimentSpec):
    for n in spec.n_grid:
        if spec.kappa_grid is not None:
            for kappa in spec.kappa_grid:
                yield n, kappa, None, None
        else:
            for law in spec.laws:
                yield n, analytics.substituted_kappa(law, n), law.z, law


def run_sweep(spec: ExperimentSpec) -> list[SweepRow]:
    fading = spec.fading()
    rows = []
    for n, kappa, z, law in _grid_points(spec):
        cfg = validate_config(replace(spec.base, n_antennas=n)).with_kappa(kappa)
        start = time.perf_counter()
        est = estimate_se(
            cfg, fading, spec.n_trials, point_seed(spec.master_seed, n), spec.threads,
            fading_source=spec.fading_mode,
        )
        elapsed = 1e3 * (time.perf_counter() - start)
        lemma = corollary = None
        if spec.emit_analytics:
            lemma = float(np.mean(np.concatenate([
                analytics.lemma1_se(fading, cfg, "A"), analytics.lemma1_se(fading, cfg, "B")])))
            if law is not None and law.z <= 1:
                corollary = float(np.mean(np.concatenate([
                    analytics.corollary1_limit(fading, cfg, law, "A"),
                    analytics.corollary1_limit(fading, cfg, law, "B")])))
        rows.append(SweepRow(
            n=n, kappa=kappa, z=z,
            se_mc_mean=est.mean_se, se_mc_stderr=est.mean_se_stderr,
            se_lemma1=lemma, se_corollary=corollary, sum_se=est.sum_se,
            wallclock_ms=elapsed if spec.record_time else None,
            extra={"estimate": est},
        ))
        logger.info("N=%d kappa=%.4g z=%s: SE=%.4f (+-%.4f), lemma=%s, %.0f ms",
                    n, kappa, z, est.mean_se, est.mean_se_stderr, lemma, elapsed)
    return rows


def write_csv(rows: list[SweepRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.csv_fields())
    return path


def read_csv(path) -> list[dict[str, str]]:
    """Rows of a sweep CSV as dicts of the raw string fields."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV") from None
        if tuple(header) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected header {header}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_COLUMNS):
                raise ConfigError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(rec)}")
            row = dict(zip(CSV_COLUMNS, rec))
            try:
                int(row["N"])
                for key in ("kappa", "se_mc_mean", "se_mc_stderr", "sum_se"):
                    float(row[key])
                for key in ("z", "se_lemma1", "se_corollary"):
                    if row[key]:
                        float(row[key])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: malformed number ({exc})") from None
            rows.append(row)
    return rows


def write_metadata(spec: ExperimentSpec, command: str, path) -> Path:
    fading = spec.fading()
    meta = {
        "command": command,
        "n_pairs": spec.base.n_pairs,
        "p_user": spec.base.p_user,
        "p_relay": spec.base.p_relay,
        "noise_relay": spec.base.noise_relay,
        "noise_a": np.asarray(spec.base.noise_a).tolist(),
        "noise_b": np.asarray(spec.base.noise_b).tolist(),
        "distortion_mode": spec.base.distortion_mode.value,
        "n_grid": spec.n_grid,
        "kappa_grid": spec.kappa_grid,
        "scaling_laws": None if spec.laws is None else [[l.kappa0, l.z] for l in spec.laws],
        "n_trials": spec.n_trials,
        "master_seed": spec.master_seed,
        "fading_mode": spec.fading_mode,
        "fading_seed": spec.fading_seed,
        "sigma2_g": fading.sigma2_g.tolist(),
        "sigma2_h": fading.sigma2_h.tolist(),
    }
    path = Path(path)
    path.write_text(json.dumps(meta, indent=2) + "\n")
    return path


def _run_figure(spec: ExperimentSpec, command: str, default_output: str, render: bool) -> Path:
    out = spec.output_path or Path(default_output)
    rows = run_sweep(spec)
    write_csv(rows, out)
    write_metadata(spec, command, out.with_suffix(".meta.json"))
    if render:
        from . import plotting

        plotting.render_sweep(rows, command, out.with_suffix(".png"))
    return out


def run_fig1(spec: ExperimentSpec, render: bool = True) -> Path:
    """Average per-device SE against N for each kappa, MC and closed form."""
    if spec.mode != "kappa":
        raise ConfigError("fig1 needs a kappa grid")
    return _run_figure(spec, "fig1", "fig1.csv", render)


def run_fig2(spec: ExperimentSpec, render: bool = True) -> Path:
    """Sum SE against N for each scaling exponent z."""
    if spec.mode != "scaling":
        raise ConfigError("fig2 needs a scaling-law list")
    return _run_figure(spec, "fig2", "fig2.csv", render)


# -- plot data -----------------------------------------------------------------


def _curve_files(rows):
    """Group CSV rows into named curves of (N, value) string pairs."""
    is_fig2 = any(r["z"] for r in rows)
    fig, param = ("fig2", "z") if is_fig2 else ("fig1", "kappa")
    curves: dict[str, list[tuple[str, str]]] = {}
    for r in rows:
        label = f"{fig}_{param}={r[param]}"
        if is_fig2:
            curves.setdefault(f"{label}_mc.dat", []).append((r["N"], r["sum_se"]))
            n_dev = round(float(r["sum_se"]) / float(r["se_mc_mean"]))
            if r["se_lemma1"]:
                total = repr(float(r["se_lemma1"]) * n_dev)
                curves.setdefault(f"{label}_lemma1.dat", []).append((r["N"], total))
            if r["se_corollary"]:
                total = repr(float(r["se_corollary"]) * n_dev)
                curves.setdefault(f"{label}_corollary.dat", []).append((r["N"], total))
        else:
            curves.setdefault(f"{label}_mc.dat", []).append((r["N"], r["se_mc_mean"]))
            if r["se_lemma1"]:
                curves.setdefault(f"{label}_lemma1.dat", []).append((r["N"], r["se_lemma1"]))
    return fig, curves


_PLOT_STUB = '''"""Plot the curves written next to this script."""
import glob
import os

import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))
fig, ax = plt.subplots(figsize=(6, 4.2))
for path in sorted(glob.glob(os.path.join(here, "{fig}_*.dat"))):
    name = os.path.basename(path)[:-4]
    data = np.loadtxt(path, ndmin=2)
    style = "o" if name.endswith("_mc") else "-"
    ax.plot(data[:, 0], data[:, 1], style, label=name.replace("{fig}_", ""))
ax.set_xlabel("Number of relay antennas N")
ax.set_ylabel("{ylabel}")
ax.legend(fontsize=7)
ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig(os.path.join(here, "{fig}.pdf"))
'''


def emit_plot_data(csv_path, out_dir=None) -> list[Path]:
    """Write one whitespace-separated (N, SE) file per curve and a plot script."""
    csv_path = Path(csv_path)
    rows = read_csv(csv_path)
    if not rows:
        raise ConfigError(f"{csv_path}: no data rows")
    out_dir = Path(out_dir) if out_dir is not None else csv_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, curves = _curve_files(rows)
    written = []
    for name in sorted(curves):
        path = out_dir / name
        path.write_text("".join(f"{n} {v}\n" for n, v in curves[name]))
        written.append(path)
    ylabel = "Sum SE (bit/s/Hz)" if fig == "fig2" else "Average SE per device (bit/s/Hz)"
    stub = out_dir / f"plot_{fig}.py"
    stub.write_text(_PLOT_STUB.format(fig=fig, ylabel=ylabel))
    written.append(stub)
    return written


def read_plot_data(path) -> list[tuple[str, str]]:
    return [tuple(line.split()) for line in Path(path).read_text().splitlines() if line.strip()]


# -- validation ----------------------------------------------------------------

VALIDATION_CHECKS = (
    "lemma1_tightness",
    "ideal_hardware",
    "scaling_law_regimes",
    "appendix_expectations",
    "dense_oracle",
    "jensen_ordering",
    "lln_rates",
    "corollary_consistency",
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "details": self.details}


def _symmetric_config(n, kappa, spec: ExperimentSpec | None = None, k=10):
    base = spec.base if spec is not None else SystemConfig(n, k)
    return validate_config(replace(base, n_antennas=n)).with_kappa(kappa)


def check_lemma1_tightness(seed, n_trials=5000, threads=1):
    fading = LargeScaleFading.symmetric(10)
    gaps = {}
    details = {}
    for n in (64, 512, 1024):
        cfg = _symmetric_config(n, 0.1)
        est = estimate_se(cfg, fading, n_trials, point_seed(seed, n), threads)
        lemma = float(analytics.lemma1_se(fading, cfg)[0])
        gaps[n] = (est.mean_se - lemma) / lemma
        details[f"N={n}"] = {"mc": est.mean_se, "stderr": est.mean_se_stderr, "lemma1": lemma,
                             "relative_gap": gaps[n]}
        if n == 512:
            details["N=512"]["hand_value"] = 1.9457
            rel512 = abs(est.mean_se - 1.9457) / 1.9457
            details["N=512"]["relative_error_vs_hand_value"] = rel512
        if n in (64, 1024):
            details[f"N={n}"]["gap_stderr"] = est.mean_se_stderr / lemma
    e64 = details["N=64"]["gap_stderr"]
    e1024 = details["N=1024"]["gap_stderr"]
    decay = abs(gaps[1024]) + 3 * math.hypot(e64, e1024) < abs(gaps[64])
    passed = rel512 <= 0.05 and decay
    details["gap_decays_3sigma"] = decay
    return CheckResult("lemma1_tightness", bool(passed), details)


def check_ideal_hardware(seed, n_trials=2000, threads=1):
    fading = LargeScaleFading.symmetric(10)
    cfg = _symmetric_config(128, 0.0)
    est = estimate_se(cfg, fading, n_trials, point_seed(seed, 128), threads)
    rel = abs(est.mean_se - 1.0845) / 1.0845
    return CheckResult("ideal_hardware", rel <= 0.05,
                       {"mc": est.mean_se, "stderr": est.mean_se_stderr, "hand_value": 1.0845,
                        "relative_error": rel})


def check_scaling_law_regimes(seed, n_trials=1000, threads=1, n_grid=FIG2_N_GRID):
    fading = LargeScaleFading.symmetric(10)
    curves = {}
    errs = {}
    per_device_z1 = None
    for z in (0.75, 1.0, 1.5):
        law = ScalingLaw(FIG2_KAPPA0, z)
        sums, ses = [], []
        for n in n_grid:
            cfg = _symmetric_config(n, analytics.substituted_kappa(law, n))
            est = estimate_se(cfg, fading, n_trials, point_seed(seed, n), threads)
            sums.append(est.sum_se)
            ses.append(est.sum_se_stderr)
            if z == 1.0 and n == n_grid[-1]:
                per_device_z1 = est.mean_se
        curves[z] = sums
        errs[z] = ses
    s075, e075 = np.array(curves[0.75]), np.array(errs[0.75])
    monotone = bool(np.all(np.diff(s075) > 0))
    s15 = np.array(curves[1.5])
    peak = int(np.argmax(s15))
    peak_n = n_grid[peak]
    interior = 0 < peak < len(n_grid) - 1 and 100 <= peak_n <= 600
    cor = float(analytics.corollary1_limit(
        fading, _symmetric_config(n_grid[-1], 0.0), ScalingLaw(FIG2_KAPPA0, 1.0))[0])
    rel = abs(per_device_z1 - cor) / cor
    passed = monotone and interior and rel <= 0.10
    return CheckResult("scaling_law_regimes", bool(passed), {
        "n_grid": list(n_grid),
        "sum_se": {str(z): v for z, v in curves.items()},
        "z0.75_monotone": monotone,
        "z1.5_peak_N": peak_n,
        "z1.5_interior_peak_in_100_600": bool(interior),
        "z1_per_device_at_max_N": per_device_z1,
        "corollary_z1": cor,
        "z1_relative_error": rel,
    })


def check_appendix_expectations(seed, n_trials=2000, threads=1):
    fading = LargeScaleFading.symmetric(10)
    cfg = _symmetric_config(256, 0.0)
    batch = simulate(cfg, fading, n_trials, point_seed(seed, 256), threads)
    refs = analytics.appendix_expectations(fading, cfg)
    means = (float(batch.fro_f.mean()), float(batch.fro_fa.mean()), float(batch.rho2.mean()))
    details = {}
    ok = True
    for name, m, ref in zip(("frobenius_F", "frobenius_FA", "rho2"), means, refs):
        rel = abs(m - ref) / ref
        details[name] = {"sample_mean": m, "expected": ref, "relative_error": rel, "passed": rel <= 0.05}
        ok &= rel <= 0.05
    return CheckResult("appendix_expectations", bool(ok), details)


def dense_oracle_errors(n_instances=100, seed=0) -> dict[str, float]:
    """Worst relative mismatch between the Gram route and explicit F."""
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}

    def record(name, got, want):
        got, want = np.asarray(got), np.asarray(want)
        scale = max(np.max(np.abs(want)), 1e-300)
        err = float(np.max(np.abs(got - want)) / scale)
        worst[name] = max(worst.get(name, 0.0), err)

    for inst in range(n_instances):
        k = int(rng.integers(1, 5))
        n = int(rng.integers(max(k, 2), 17))
        mode = DistortionMode.REALIZATION if inst % 2 == 0 else DistortionMode.EXPECTATION
        kr, kt = rng.uniform(0, 0.3, size=2)
        cfg = validate_config(SystemConfig(
            n, k, p_user=float(rng.uniform(1, 20)), p_relay=float(rng.uniform(1, 50)),
            noise_relay=float(rng.uniform(0.5, 2)), noise_a=rng.uniform(0.5, 2, k),
            noise_b=rng.uniform(0.5, 2, k), kappa_r=kr, kappa_t=kt, distortion_mode=mode))
        fading = LargeScaleFading(rng.uniform(0.3, 2, k), rng.uniform(0.3, 2, k))
        channel = draw_channels(cfg, fading, rng)
        distortion = draw_distortions(channel, cfg, rng)
        cache = mr.build_gram_cache(channel)
        ref = dense.trial_terms(channel, distortion, cfg)
        res = mr.compute_trial_sinr(cache, channel, distortion, cfg)
        record("bilinear_forms", cache.bilinear, ref["bilinear"])
        record("row_norms", cache.row_norms2, ref["row_norm"])
        fro_f, fro_fa = mr.frobenius_norms(cache)
        record("frobenius_F", fro_f, ref["fro_f"])
        record("frobenius_FA", fro_fa, ref["fro_fa"])
        record("rho", np.sqrt(res.rho2), np.sqrt(ref["rho2"]))
        for term in ("signal", "interference", "relay_noise", "device_noise", "rx_distortion", "tx_distortion"):
            record(term, getattr(res, term), ref[term])
        record("sinr", res.sinr, ref["sinr"])
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        record("apply_precoder", mr.apply_precoder(channel, x), dense.precoder(channel) @ x)
    return worst


def check_dense_oracle(seed, n_instances=100, tol=1e-9):
    worst = dense_oracle_errors(n_instances, seed)
    return CheckResult("dense_oracle", all(v <= tol for v in worst.values()),
                       {"tolerance": tol, "worst_relative_error": worst})


JENSEN_GRID = tuple((n, kappa) for n in (32, 64, 128, 256) for kappa in (0.0, 0.1, 0.2))


def check_jensen_ordering(seed, n_trials=1000, threads=1, grid=JENSEN_GRID):
    fading = LargeScaleFading.symmetric(10)
    points = []
    ok = True
    for n, kappa in grid:
        cfg = _symmetric_config(n, kappa)
        batch = simulate(cfg, fading, n_trials, point_seed(seed, n), threads)
        se = spectral_efficiency(batch.sinr)
        direct = se.mean(axis=0)
        err = standard_error(se)
        bound = jensen_bound_from_sinr(batch.sinr)
        excess = float(np.max((bound - direct) / np.maximum(err, 1e-300)))
        point_ok = bool(np.all(bound <= direct + 3 * err))
        ok &= point_ok
        points.append({"N": n, "kappa": kappa, "max_excess_in_stderr": excess, "passed": point_ok})
    return CheckResult("jensen_ordering", bool(ok), {"points": points})


def check_lln_rates(seed, trials_per_n=200, n_grid=(256, 1024, 4096)):
    fading = LargeScaleFading.symmetric(10)
    report = lln_convergence_suite(SystemConfig(n_grid[0], 10).with_kappa(0.05), fading,
                                   n_grid, trials_per_n, seed)
    slope_ok = report.slope_pass
    return CheckResult("lln_rates", all(slope_ok.values()), {
        "n_grid": list(n_grid),
        "identities": {
            name: {"median_residuals": report.residual_medians[name], "slope": report.slopes[name],
                   "passed": slope_ok[name]}
            for name in IDENTITIES
        },
        "slope_window": list(report.slope_window),
        "expectation_relative_errors": report.expectation_errors,
    })


def corollary_gaps(z_values=(0.5, 0.75), n=2**16, kappa0=FIG2_KAPPA0, k=10) -> dict[float, float]:
    fading = LargeScaleFading.symmetric(k)
    out = {}
    for z in z_values:
        law = ScalingLaw(kappa0, z)
        cfg = _symmetric_config(n, analytics.substituted_kappa(law, n), k=k)
        lemma = float(analytics.lemma1_se(fading, cfg)[0])
        cor = float(analytics.corollary1_limit(fading, cfg, law)[0])
        out[z] = abs(lemma - cor) / cor
    return out


def check_corollary_consistency(seed=None, z_values=(0.5, 0.75)):
    gaps = corollary_gaps(z_values)
    return CheckResult("corollary_consistency", all(g < 0.02 for g in gaps.values()),
                       {"N": 2**16, "relative_gap": {str(z): g for z, g in gaps.items()}, "tolerance": 0.02})


_CHECKS = {
    "lemma1_tightness": check_lemma1_tightness,
    "ideal_hardware": check_ideal_hardware,
    "scaling_law_regimes": check_scaling_law_regimes,
    "appendix_expectations": check_appendix_expectations,
    "dense_oracle": lambda seed, **_: check_dense_oracle(seed),
    "jensen_ordering": check_jensen_ordering,
    "lln_rates": lambda seed, **_: check_lln_rates(seed),
    "corollary_consistency": lambda seed, **_: check_corollary_consistency(seed),
}


def run_validate(spec: ExperimentSpec | None = None, checks=None, output=None) -> tuple[Path, bool]:
    """Run the validation checks and write a JSON report.

    Returns the report path and whether every selected check passed.
    """
    seed = spec.master_seed if spec is not None else DEFAULT_SEED
    threads = spec.threads if spec is not None else 1
    names = list(checks) if checks else list(VALIDATION_CHECKS)
    unknown = [n for n in names if n not in _CHECKS]
    if unknown:
        raise ConfigError(f"unknown validation checks: {', '.join(unknown)}")
    results = []
    for name in names:
        start = time.perf_counter()
        func = _CHECKS[name]
        if name in ("dense_oracle", "lln_rates", "corollary_consistency"):
            res = func(seed)
        else:
            res = func(seed, threads=threads)
        logger.info("%s: %s (%.1f s)", name, "PASS" if res.passed else "FAIL", time.perf_counter() - start)
        results.append(res)
    all_ok = all(r.passed for r in results)
    out = Path(output or (spec.output_path if spec is not None and spec.output_path else "validate.json"))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"passed": all_ok, "checks": [r.as_dict() for r in results]},
                              indent=2, default=float) + "\n")
    return out, all_ok
