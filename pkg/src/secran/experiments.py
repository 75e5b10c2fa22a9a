"""Monte Carlo sweeps over the transmit power or the number of UEs.

Config files are INI (``configparser``) with two sections::

    [system]
    num_rus = 2
    num_ues = 3
    ru_antennas = 1            # scalar or comma list (one per RU)
    ue_antennas = 1            # scalar or comma list (one per UE)
    fronthaul_capacity = 2.0   # bits/s/Hz, scalar or list
    power_db = 20              # or power_limit = <linear>, not both
    noise_variance = 1.0       # scalar or per-UE list, Sigma_z = var * I
    weights = 1.0
    streams = 1                # optional, defaults to min(total RU antennas, ue_antennas)
    pathloss_exponent = 3
    reference_distance = 50
    area_side = 500

    [experiment]
    sweep_variable = power_dB  # or num_ues
    sweep_values = 0, 5, 10, 15, 20, 25, 30
    num_draws = 50
    master_seed = 1
    strategies = all           # or a comma list of labels
    exclude_unconverged = false
    output = results.csv

Every field of ``[system]`` except the counts is optional.
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .optimizer import ALL_STRATEGIES, StrategyFlags
from .strategies import parse_strategies, run_strategy
from .system import ConfigError, SystemConfig, db_to_linear, draw_realization

log = logging.getLogger(__name__)

SWEEP_VARIABLES = ("power_dB", "num_ues")
ROW_FIELDS = (
    "sweep_value", "strategy", "draw", "secrecy_sum_rate", "nonsecrecy_sum_rate",
    "cccp_iterations", "converged", "rank_gap", "realization_digest",
)
SUMMARY_FIELDS = (
    "sweep_value", "strategy", "n", "mean_secrecy", "stderr_secrecy",
    "mean_nonsecrecy", "stderr_nonsecrecy",
)


class EmptyData(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    base_config: SystemConfig
    sweep_variable: str = "power_dB"
    sweep_values: tuple[float, ...] = (0.0,)
    num_draws: int = 50
    master_seed: int = 0
    strategies: tuple[StrategyFlags, ...] = ALL_STRATEGIES
    output_path: str | None = None
    exclude_unconverged: bool = False

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep_variable must be one of {SWEEP_VARIABLES}, got {self.sweep_variable!r}")
        values = tuple(float(v) for v in self.sweep_values)
        if not values:
            raise ConfigError("sweep_values must be non-empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError("sweep_values must be strictly increasing")
        if self.sweep_variable == "num_ues" and any(v != int(v) or v < 1 for v in values):
            raise ConfigError("sweep_values for num_ues must be positive integers")
        if int(self.num_draws) < 1:
            raise ConfigError(f"num_draws must be >= 1, got {self.num_draws}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if not self.strategies:
            raise ConfigError("strategies must be non-empty")
        object.__setattr__(self, "sweep_values", values)
        object.__setattr__(self, "num_draws", int(self.num_draws))
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "strategies", tuple(self.strategies))

    def config_at(self, value: float) -> SystemConfig:
        if self.sweep_variable == "power_dB":
            return self.base_config.with_power_db(value)
        return self.base_config.with_num_ues(int(value))

    def replace(self, **changes) -> "ExperimentSpec":
        kw = {f: getattr(self, f) for f in (
            "base_config", "sweep_variable", "sweep_values", "num_draws", "master_seed",
            "strategies", "output_path", "exclude_unconverged")}
        kw.update(changes)
        return ExperimentSpec(**kw)


@dataclass(frozen=True)
class ExperimentRow:
    sweep_value: float
    strategy: str
    draw: int
    secrecy_sum_rate: float
    nonsecrecy_sum_rate: float
    cccp_iterations: int
    converged: bool
    rank_gap: float
    realization_digest: str = ""


@dataclass(frozen=True)
class SummaryCell:
    sweep_value: float
    strategy: str
    n: int
    mean_secrecy: float
    stderr_secrecy: float
    mean_nonsecrecy: float
    stderr_nonsecrecy: float


@dataclass
class SweepResult:
    rows: list[ExperimentRow]
    summary: list[SummaryCell] = field(default_factory=list)

    def mean(self, strategy: str, value: float, column: str = "mean_secrecy") -> float:
        for c in self.summary:
            if c.strategy == strategy and c.sweep_value == value:
                return getattr(c, column)
        raise KeyError((strategy, value))


# ------------------------------------------------------------------ seeding

def cell_seed(master_seed: int, sweep_index: int, draw_index: int) -> np.random.SeedSequence:
    """Seed of one (sweep value, draw) cell, shared by every strategy."""
    return np.random.SeedSequence([master_seed, sweep_index, draw_index])


def init_seed(master_seed: int, sweep_index: int, draw_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, sweep_index, draw_index, 1])


# ------------------------------------------------------------------ running

def _run_cell(args) -> list[ExperimentRow]:
    spec, si, di = args
    value = spec.sweep_values[si]
    config = spec.config_at(value)
    channels = draw_realization(config, cell_seed(spec.master_seed, si, di))
    digest = channels.digest()
    rows = []
    for flags in spec.strategies:
        try:
            res = run_strategy(flags, config, channels, init_seed=init_seed(spec.master_seed, si, di))
        except Exception as exc:  # never abort a sweep on one bad draw
            log.warning("%s failed at %s=%g draw %d: %s", flags.label, spec.sweep_variable, value, di, exc)
            rows.append(ExperimentRow(value, flags.label, di, math.nan, math.nan, 0, False, math.nan, digest))
            continue
        rep = res.report
        rows.append(ExperimentRow(
            value, flags.label, di, rep.secrecy_sum_rate, rep.nonsecrecy_sum_rate,
            rep.extras["cccp_iterations"], bool(rep.extras["converged"]), res.rank_gap, digest,
        ))
    return rows


def _sort_key(spec: ExperimentSpec):
    order = {f.label: i for i, f in enumerate(spec.strategies)}
    return lambda r: (r.sweep_value, order.get(r.strategy, len(order)), getattr(r, "draw", 0))


def summarize(rows: Iterable[ExperimentRow], exclude_unconverged: bool = False) -> list[SummaryCell]:
    """Mean and standard error per (sweep value, strategy); rows without a
    result (NaN) are always dropped, unconverged ones only on request."""
    cells: dict[tuple[float, str], list[ExperimentRow]] = {}
    for r in rows:
        cells.setdefault((r.sweep_value, r.strategy), []).append(r)
    out = []
    for (value, label), group in cells.items():
        keep = [r for r in group if not math.isnan(r.secrecy_sum_rate)
                and (r.converged or not exclude_unconverged)]
        sec = np.array([r.secrecy_sum_rate for r in keep])
        nonsec = np.array([r.nonsecrecy_sum_rate for r in keep])
        out.append(SummaryCell(value, label, len(keep), *_mean_se(sec), *_mean_se(nonsec)))
    return out


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def run_sweep(spec: ExperimentSpec, workers: int = 1) -> SweepResult:
    """Run every strategy on ``num_draws`` shared draws per sweep value.

    Cells are independent, so ``workers > 1`` farms them out to processes;
    rows are sorted afterwards, which keeps the output identical to a
    serial run.
    """
    jobs = [(spec, si, di) for si in range(len(spec.sweep_values)) for di in range(spec.num_draws)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, jobs))
    else:
        chunks = [_run_cell(j) for j in jobs]
    key = _sort_key(spec)
    rows = sorted((r for c in chunks for r in c), key=key)
    summary = sorted(summarize(rows, spec.exclude_unconverged), key=key)
    return SweepResult(rows, summary)


# ------------------------------------------------------------------ config files

def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _scalar_or_list(vals: list):
    return vals[0] if len(vals) == 1 else vals


_SYSTEM_KEYS = {
    "num_rus", "num_ues", "ru_antennas", "ue_antennas", "fronthaul_capacity", "power_db",
    "power_limit", "noise_variance", "weights", "streams", "pathloss_exponent",
    "reference_distance", "area_side",
}
_EXPERIMENT_KEYS = {
    "sweep_variable", "sweep_values", "num_draws", "master_seed", "strategies", "output",
    "exclude_unconverged",
}


def _field(section, key, conv, default=None):
    if key not in section:
        return default
    raw = section[key]
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r}: {exc}") from None


def parse_config_text(text: str, source: str = "<string>") -> ExperimentSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if "system" not in cp:
        raise ConfigError(f"{source}: missing [system] section")
    sysec = cp["system"]
    exsec = cp["experiment"] if "experiment" in cp else cp["DEFAULT"]
    for sec, known in ((sysec, _SYSTEM_KEYS), (exsec, _EXPERIMENT_KEYS)):
        unknown = set(sec.keys()) - known - set(cp.defaults())
        if unknown:
            raise ConfigError(f"{source}: unknown key(s) in [{sec.name}]: {', '.join(sorted(unknown))}")
    for key in ("num_rus", "num_ues"):
        if key not in sysec:
            raise ConfigError(f"{source}: [system] {key} is required")
    if "power_db" in sysec and "power_limit" in sysec:
        raise ConfigError(f"{source}: give either power_db or power_limit, not both")

    kw = dict(
        num_rus=_field(sysec, "num_rus", int),
        num_ues=_field(sysec, "num_ues", int),
    )
    lists = {
        "ru_antennas": _ints, "ue_antennas": _ints, "streams": _ints,
        "fronthaul_capacity": _floats, "power_limit": _floats, "weights": _floats,
    }
    for key, conv in lists.items():
        v = _field(sysec, key, conv)
        if v is not None:
            kw[key] = _scalar_or_list(v)
    power_db = _field(sysec, "power_db", _floats)
    if power_db is not None:
        kw["power_limit"] = _scalar_or_list([db_to_linear(p) for p in power_db])
    noise = _field(sysec, "noise_variance", _floats)
    if noise is not None:
        kw["noise_cov"] = _scalar_or_list(noise)
    for key in ("pathloss_exponent", "reference_distance", "area_side"):
        v = _field(sysec, key, float)
        if v is not None:
            kw[key] = v
    config = SystemConfig(**kw)

    sweep_var = exsec.get("sweep_variable", "power_dB").strip()
    default_values = "20" if sweep_var == "power_dB" else str(config.num_ues)
    return ExperimentSpec(
        base_config=config,
        sweep_variable=sweep_var,
        sweep_values=tuple(_floats(exsec.get("sweep_values", default_values))),
        num_draws=_field(exsec, "num_draws", int, 50),
        master_seed=_field(exsec, "master_seed", lambda s: int(s, 0), 0),
        strategies=tuple(_field(exsec, "strategies", parse_strategies, list(ALL_STRATEGIES))),
        output_path=exsec.get("output"),
        exclude_unconverged=_field(exsec, "exclude_unconverged", _bool, False),
    )


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def parse_config(path: str | os.PathLike) -> ExperimentSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config_text(text, source=str(p))


def _noise_variances(config: SystemConfig) -> list[float]:
    out = []
    for k, C in enumerate(config.noise_cov):
        v = C[0, 0].real
        if not np.array_equal(C, v * np.eye(C.shape[0])):
            raise ConfigError(f"noise_cov[{k}] is not a scaled identity; it cannot be written to a config file")
        out.append(float(v))
    return out


def canonical_config(spec: ExperimentSpec) -> str:
    """The spec in config-file form. Floats use ``repr`` so that parsing
    the output gives back an equal spec."""
    c = spec.base_config
    join = lambda xs: ", ".join(repr(x) if isinstance(x, float) else str(x) for x in xs)  # noqa: E731
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["system"] = {
        "num_rus": str(c.num_rus),
        "num_ues": str(c.num_ues),
        "ru_antennas": join(c.ru_antennas),
        "ue_antennas": join(c.ue_antennas),
        "fronthaul_capacity": join(c.fronthaul_capacity),
        "power_limit": join(c.power_limit),
        "noise_variance": join(_noise_variances(c)),
        "weights": join(c.weights),
        "streams": join(c.streams),
        "pathloss_exponent": repr(c.pathloss_exponent),
        "reference_distance": repr(c.reference_distance),
        "area_side": repr(c.area_side),
    }
    ex = {
        "sweep_variable": spec.sweep_variable,
        "sweep_values": join(spec.sweep_values),
        "num_draws": str(spec.num_draws),
        "master_seed": str(spec.master_seed),
        "strategies": ", ".join(f.label for f in spec.strategies),
        "exclude_unconverged": str(spec.exclude_unconverged).lower(),
    }
    if spec.output_path is not None:
        ex["output"] = str(spec.output_path)
    cp["experiment"] = ex
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# ------------------------------------------------------------------ output

_INT_FIELDS = {"draw", "cccp_iterations", "n"}


def _fmt(name: str, x) -> str:
    if name == "converged":
        return "1" if x else "0"
    if name in _INT_FIELDS:
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = f"{x:.6f}"
    return "0.000000" if out == "-0.000000" else out


def csv_text(rows: Sequence[ExperimentRow], summary: Sequence[SummaryCell] | None = None) -> str:
    """Rows, then (if there are rows) a blank line and the summary block."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_FIELDS)
    for r in rows:
        w.writerow([_fmt(f, getattr(r, f)) for f in ROW_FIELDS])
    if rows:
        if summary is None:
            summary = summarize(rows)
        buf.write("\n")
        w.writerow(SUMMARY_FIELDS)
        for c in summary:
            w.writerow([_fmt(f, getattr(c, f)) for f in SUMMARY_FIELDS])
    return buf.getvalue()


def emit_csv(rows: Sequence[ExperimentRow], path: str | os.PathLike,
             summary: Sequence[SummaryCell] | None = None) -> Path:
    p = Path(path)
    try:
        p.write_bytes(csv_text(rows, summary).encode("utf-8"))
    except OSError as exc:
        raise OSError(f"cannot write CSV {p}: {exc}") from exc
    return p


def read_csv(path: str | os.PathLike) -> list[ExperimentRow]:
    """Read back the per-draw rows of a CSV written by :func:`emit_csv`."""
    p = Path(path)
    try:
        lines = p.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise OSError(f"cannot read CSV {p}: {exc}") from exc
    if not lines or tuple(lines[0].split(",")) != ROW_FIELDS:
        raise ValueError(f"{p}: unexpected header")
    rows = []
    for line in lines[1:]:
        if not line.strip():
            break
        v = line.split(",")
        rows.append(ExperimentRow(
            float(v[0]), v[1], int(v[2]), float(v[3]), float(v[4]), int(v[5]),
            v[6] == "1", float(v[7]), v[8] if len(v) > 8 else "",
        ))
    return rows


def svg_text(rows: Sequence[ExperimentRow], xlabel: str = "sweep value",
             ylabel: str = "average secrecy sum-rate [bits/s/Hz]") -> str:
    """Line chart of the mean secrecy sum-rate, one polyline per strategy."""
    cells = summarize(rows)
    if not cells:
        raise EmptyData("no rows to plot")
    labels = list(dict.fromkeys(c.strategy for c in cells))
    series = {
        lab: sorted((c.sweep_value, c.mean_secrecy) for c in cells
                    if c.strategy == lab and not math.isnan(c.mean_secrecy))
        for lab in labels
    }
    xs = [x for s in series.values() for x, _ in s]
    ys = [y for s in series.values() for _, y in s]
    if not xs:
        raise EmptyData("no finite means to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    W, H = 640, 420
    left, right, top, bottom = 70, 190, 20, 50
    pw, ph = W - left - right, H - top - bottom
    sx = lambda x: left + (x - x0) / (x1 - x0) * pw  # noqa: E731
    sy = lambda y: top + ph - (y - y0) / (y1 - y0) * ph  # noqa: E731
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.2f}" y="{top + ph + 16}" font-size="11" '
                   f'text-anchor="middle">{xv:g}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{yv:.2f}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{H - 10}" font-size="13" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">{ylabel}</text>')
    for i, lab in enumerate(labels):
        col = colors[i % len(colors)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in series[lab])
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="2" points="{pts}"/>')
        ly = top + 16 + 18 * i
        out.append(f'<text x="{left + pw + 12}" y="{ly}" font-size="12" fill="{col}">{lab}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(rows: Sequence[ExperimentRow], path: str | os.PathLike, xlabel: str = "sweep value") -> Path:
    text = svg_text(rows, xlabel=xlabel)
    p = Path(path)
    try:
        p.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write SVG {p}: {exc}") from exc
    return p


__all__ = [
    "ExperimentSpec", "ExperimentRow", "SummaryCell", "SweepResult", "EmptyData",
    "run_sweep", "summarize", "parse_config", "parse_config_text", "canonical_config",
    "emit_csv", "read_csv", "csv_text", "emit_plot", "svg_text", "cell_seed", "init_seed",
]
