"""Experiment harness: JSON spec ingestion, sweep runners and CSV/JSON emission.

A spec document is a flat JSON object (plus a nested ``mc`` object). Ratios are
given in dB and angles in degrees; both are converted once, here. The resolved
document (every field explicit) is kept on the spec and written to the JSON
sidecar, so a sidecar loads back into the identical spec.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
import re
import subprocess
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .designs import (
    CommMetric,
    DacMode,
    DesignKind,
    DesignProblem,
    DesignResult,
    solve_design,
)
from .model import (
    CommChannels,
    SystemConfig,
    db_to_linear,
    draw_comm_channels,
    linear_to_db,
    psk_constellation,
    radar_channels,
)
from .montecarlo import McConfig, mc_ber, mc_qscnr, mc_roc, substream, theoretical_scnr
from .optim.bnb import DEFAULT_NODE_LIMIT
from .radar import AdcMode, power_model_for, radar_energy_efficiency

SIDECAR_FORMAT = "onebit-isac-results v1"

# substream ids for scene randomness (the Monte Carlo engines use 0..3)
_CHANNELS, _SCENE_SYMBOLS = 10, 11


class Experiment(str, enum.Enum):
    QOS_SWEEP = "QosSweep"
    ANTENNA_SWEEP_RX = "AntennaSweepRx"
    ANTENNA_SWEEP_TX = "AntennaSweepTx"
    ROC = "Roc"
    QOD_SWEEP = "QodSweep"
    BER_VS_SNR = "BerVsSnr"
    USER_SWEEP = "UserSweep"
    REE = "Ree"
    CONVERGENCE = "Convergence"


COLUMNS: dict[Experiment, tuple[str, ...]] = {
    Experiment.QOS_SWEEP: ("config", "gamma_db", "qscnr_ta_db", "qscnr_mc_db", "qscnr_mc_stderr", "margin", "iters", "status"),
    Experiment.ANTENNA_SWEEP_RX: ("config", "n_rx", "qscnr_ta_db", "qscnr_mc_db", "qscnr_mc_stderr", "ree", "iters", "status"),
    Experiment.ANTENNA_SWEEP_TX: ("config", "n_tx", "qscnr_ta_db", "qscnr_mc_db", "qscnr_mc_stderr", "ree", "iters", "status"),
    Experiment.REE: ("config", "n_rx", "scnr_db", "e_tot_w", "ree", "status"),
    Experiment.ROC: ("config", "pfa", "pfa_mc", "pd_mc", "pd_ta", "status"),
    Experiment.QOD_SWEEP: ("config", "chi_db", "margin", "ber", "ber_stderr", "qscnr_ta_db", "iters", "status"),
    Experiment.BER_VS_SNR: ("config", "snr_c_db", "ber", "ber_stderr", "sep", "sep_lb", "sep_ub", "margin", "status"),
    Experiment.USER_SWEEP: ("config", "n_users", "ber", "ber_stderr", "sep", "margin", "status"),
    Experiment.CONVERGENCE: ("config", "gamma_db", "iteration", "objective", "status"),
}

# what the grid of each experiment ranges over
GRID_KIND: dict[Experiment, str] = {
    Experiment.QOS_SWEEP: "gamma_db",
    Experiment.ANTENNA_SWEEP_RX: "n_rx",
    Experiment.ANTENNA_SWEEP_TX: "n_tx",
    Experiment.REE: "n_rx",
    Experiment.ROC: "pfa",
    Experiment.QOD_SWEEP: "chi_db",
    Experiment.BER_VS_SNR: "snr_c_db",
    Experiment.USER_SWEEP: "n_users",
    Experiment.CONVERGENCE: "gamma_db",
}

DEFAULT_GRIDS: dict[Experiment, list] = {
    Experiment.QOS_SWEEP: [0.0, 4.0, 8.0, 12.0],
    Experiment.ANTENNA_SWEEP_RX: [32, 64, 128],
    Experiment.ANTENNA_SWEEP_TX: [8, 16, 32, 64],
    Experiment.REE: [32, 64, 128],
    Experiment.ROC: [0.001, 0.01, 0.1, 0.3, 0.5],
    Experiment.QOD_SWEEP: [4.0, 8.0, 12.0],
    Experiment.BER_VS_SNR: [0.0, 5.0, 10.0, 15.0],
    Experiment.USER_SWEEP: [2, 4, 6],
    Experiment.CONVERGENCE: [0.0],
}

ALL_CONFIGS = ("OneBit-OneBit", "OneBit-Infinite", "Infinite-OneBit", "Infinite-Infinite")

# scene defaults of the reference parameter set; the desk profile shrinks the arrays
PAPER_DEFAULTS: dict[str, Any] = {
    "experiment": "QosSweep",
    "configs": list(ALL_CONFIGS),
    "grid": None,
    "n_tx": 128,
    "n_rx": 128,
    "n_users": 4,
    "modulation_order": 8,
    "power_budget_w": 1.0,
    "radar_noise_power_w": 1.0,
    "snr_r_db": 15.0,
    "cnr_db": [30.0, 30.0],
    "target_angle_deg": 10.0,
    "clutter_angles_deg": [-50.0, 30.0],
    "snr_c_db": 5.0,
    "gamma_db": 0.0,
    "chi_db": 8.0,
    "comm_metric": "safe_margin",
    "seed": 0,
    "n_sym": 200,
    "node_limit": DEFAULT_NODE_LIMIT,
    "max_iters": 50,
    "tolerance": 1e-4,
    "output": "results",
    "mc": {"n_trials": 1_000_000, "batch": 16384},
}
DESK_OVERRIDES: dict[str, Any] = {"n_tx": 16, "n_rx": 64, "mc": {"n_trials": 100_000}}


class ConfigError(ValueError):
    """Schema violation; the message names the field and, when known, the line."""


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: Experiment
    configs: tuple[tuple[DacMode, AdcMode], ...]
    base: SystemConfig
    sweep_grid: tuple[float, ...]  # in the unit named by GRID_KIND (dB, count or probability)
    mc: McConfig
    output_path: str
    gamma: float  # linear
    chi: float  # linear
    snr_c_db: float
    comm_metric: CommMetric
    n_sym: int
    node_limit: int
    max_iters: int
    tolerance: float
    document: dict = field(compare=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self.sweep_grid:
            raise ConfigError("field 'grid': must be non-empty")
        if not self.configs:
            raise ConfigError("field 'configs': must be non-empty")

    @property
    def seed(self) -> int:
        return self.mc.rng_seed

    @property
    def grid_kind(self) -> str:
        return GRID_KIND[self.experiment]


# --------------------------------------------------------------------------- parsing


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Reader:
    def __init__(self, doc: dict, text: str | None, source: str):
        self.doc = doc
        self.text = text
        self.source = source

    def fail(self, key: str, problem: str) -> ConfigError:
        line = _line_of(self.text, key.split(".")[-1])
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: field '{key}': {problem}")

    def number(self, key: str, value, *, positive=False, nonneg=False, integer=False) -> float | int:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(key, f"expected a number, got {json.dumps(value)}")
        if integer and (isinstance(value, float) and not value.is_integer()):
            raise self.fail(key, f"expected an integer, got {value}")
        if not math.isfinite(value):
            raise self.fail(key, "must be finite")
        if positive and not value > 0:
            raise self.fail(key, f"must be positive, got {value}")
        if nonneg and value < 0:
            raise self.fail(key, f"must be nonnegative, got {value}")
        return int(value) if integer else float(value)

    def numbers(self, key: str, value, **kw) -> list:
        if not isinstance(value, list):
            raise self.fail(key, f"expected a list of numbers, got {json.dumps(value)}")
        return [self.number(key, v, **kw) for v in value]


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _parse_config_label(reader: _Reader, label) -> tuple[DacMode, AdcMode]:
    if not isinstance(label, str) or label.count("-") != 1:
        raise reader.fail("configs", f"expected 'DAC-ADC' such as 'OneBit-Infinite', got {json.dumps(label)}")
    dac, adc = label.split("-")
    try:
        return DacMode(dac), AdcMode(adc)
    except ValueError:
        raise reader.fail("configs", f"unknown mode in {label!r}; use OneBit or Infinite") from None


def spec_from_document(doc: Any, *, desk: bool = False, text: str | None = None, source: str = "<spec>") -> ExperimentSpec:
    """Validate a spec document and resolve defaults."""
    if isinstance(doc, dict) and doc.get("format") == SIDECAR_FORMAT:
        doc = doc.get("spec", {})
    reader = _Reader(doc, text, source)
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    unknown = sorted(set(doc) - set(PAPER_DEFAULTS))
    if unknown:
        raise reader.fail(unknown[0], "unknown field (allowed: " + ", ".join(sorted(PAPER_DEFAULTS)) + ")")
    if "mc" in doc:
        if not isinstance(doc["mc"], dict):
            raise reader.fail("mc", "expected an object with n_trials and batch")
        bad = sorted(set(doc["mc"]) - set(PAPER_DEFAULTS["mc"]))
        if bad:
            raise reader.fail(f"mc.{bad[0]}", "unknown field (allowed: batch, n_trials)")
    defaults = _merge(PAPER_DEFAULTS, DESK_OVERRIDES) if desk else PAPER_DEFAULTS
    d = _merge(defaults, doc)

    try:
        experiment = Experiment(d["experiment"])
    except ValueError:
        raise reader.fail("experiment", f"unknown experiment {d['experiment']!r}; one of {[e.value for e in Experiment]}") from None
    if d["grid"] is None:
        d["grid"] = list(DEFAULT_GRIDS[experiment])
    if not isinstance(d["configs"], list) or not d["configs"]:
        raise reader.fail("configs", "expected a non-empty list")
    configs = tuple(_parse_config_label(reader, c) for c in d["configs"])

    kind = GRID_KIND[experiment]
    if kind in ("n_rx", "n_tx", "n_users"):
        grid = reader.numbers("grid", d["grid"], positive=True, integer=True)
    elif kind == "pfa":
        grid = reader.numbers("grid", d["grid"])
        if any(not 0.0 < g < 1.0 for g in grid):
            raise reader.fail("grid", "false-alarm probabilities must lie in (0, 1)")
    else:
        grid = reader.numbers("grid", d["grid"])
    if not grid:
        raise reader.fail("grid", "must be non-empty")

    n_tx = reader.number("n_tx", d["n_tx"], positive=True, integer=True)
    n_rx = reader.number("n_rx", d["n_rx"], positive=True, integer=True)
    n_users = reader.number("n_users", d["n_users"], positive=True, integer=True)
    order = reader.number("modulation_order", d["modulation_order"], positive=True, integer=True)
    if order < 2 or order & (order - 1):
        raise reader.fail("modulation_order", f"must be a power of two >= 2, got {order}")
    energy = reader.number("power_budget_w", d["power_budget_w"], positive=True)
    sigma_r = reader.number("radar_noise_power_w", d["radar_noise_power_w"], positive=True)
    snr_r_db = reader.number("snr_r_db", d["snr_r_db"])
    cnr = d["cnr_db"]
    angles = reader.numbers("clutter_angles_deg", d["clutter_angles_deg"])
    cnr_db = [reader.number("cnr_db", cnr)] * len(angles) if not isinstance(cnr, list) else reader.numbers("cnr_db", cnr)
    if len(cnr_db) != len(angles):
        raise reader.fail("cnr_db", f"has {len(cnr_db)} entries but clutter_angles_deg has {len(angles)}")
    for key in ("target_angle_deg",):
        reader.number(key, d[key])
    if any(abs(a) > 90.0 for a in angles + [d["target_angle_deg"]]):
        raise reader.fail("clutter_angles_deg" if any(abs(a) > 90 for a in angles) else "target_angle_deg",
                          "angles are in degrees and must lie in [-90, 90]")
    snr_c_db = reader.number("snr_c_db", d["snr_c_db"])
    gamma_db = reader.number("gamma_db", d["gamma_db"])
    chi_db = reader.number("chi_db", d["chi_db"])
    try:
        metric = CommMetric(d["comm_metric"])
    except ValueError:
        raise reader.fail("comm_metric", f"expected one of {[m.value for m in CommMetric]}") from None
    seed = reader.number("seed", d["seed"], nonneg=True, integer=True)
    if seed >= 2**64:
        raise reader.fail("seed", "must fit in 64 bits")
    n_trials = reader.number("mc.n_trials", d["mc"]["n_trials"], positive=True, integer=True)
    batch = reader.number("mc.batch", d["mc"]["batch"], positive=True, integer=True)
    n_sym = reader.number("n_sym", d["n_sym"], positive=True, integer=True)
    node_limit = reader.number("node_limit", d["node_limit"], positive=True, integer=True)
    max_iters = reader.number("max_iters", d["max_iters"], positive=True, integer=True)
    tolerance = reader.number("tolerance", d["tolerance"], positive=True)
    if not isinstance(d["output"], str) or not d["output"]:
        raise reader.fail("output", "expected a non-empty path string")

    base = SystemConfig(
        n_tx=n_tx,
        n_rx=n_rx,
        power_budget=energy,
        radar_noise_power=sigma_r,
        comm_noise_powers=(energy / db_to_linear(snr_c_db),) * n_users,
        radar_snr=db_to_linear(snr_r_db),
        clutter_cnrs=tuple(db_to_linear(c) for c in cnr_db),
        target_angle=math.radians(d["target_angle_deg"]),
        clutter_angles=tuple(math.radians(a) for a in angles),
        n_users=n_users,
        modulation_order=order,
        rng_seed=seed,
    )
    resolved = {k: d[k] for k in PAPER_DEFAULTS}
    resolved["grid"] = grid
    resolved["mc"] = {"n_trials": n_trials, "batch": batch}
    return ExperimentSpec(
        experiment=experiment,
        configs=configs,
        base=base,
        sweep_grid=tuple(grid),
        mc=McConfig(n_trials=n_trials, rng_seed=seed, batch=batch),
        output_path=d["output"],
        gamma=db_to_linear(gamma_db),
        chi=db_to_linear(chi_db),
        snr_c_db=snr_c_db,
        comm_metric=metric,
        n_sym=n_sym,
        node_limit=node_limit,
        max_iters=max_iters,
        tolerance=tolerance,
        document=resolved,
    )


def load_config(path: str | os.PathLike, *, desk: bool = False) -> ExperimentSpec:
    """Parse a JSON spec (or a results sidecar). ``desk`` shrinks unset array sizes and trial counts."""
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    return spec_from_document(doc, desk=desk, text=text, source=str(path))


def with_overrides(spec: ExperimentSpec, **fields) -> ExperimentSpec:
    """Re-resolve a spec with some document fields replaced (e.g. seed, output)."""
    return spec_from_document(_merge(spec.document, fields))


# --------------------------------------------------------------------------- running


@dataclass
class ResultTable:
    experiment: Experiment
    columns: tuple[str, ...]
    rows: list[dict]
    row_meta: list[dict]
    spec: ExperimentSpec
    wall_time_s: float = 0.0

    @property
    def all_infeasible(self) -> bool:
        return bool(self.rows) and all(r["status"] == "Infeasible" for r in self.rows)


def config_label(pair: tuple[DacMode, AdcMode]) -> str:
    return f"{pair[0].value}-{pair[1].value}"


def _scene(spec: ExperimentSpec, n_users: int, n_tx: int):
    """Channels and one symbol vector, nested across user and antenna counts."""
    rng = substream(spec.seed, _CHANNELS)
    max_u = max([n_users] + ([int(g) for g in spec.sweep_grid] if spec.grid_kind == "n_users" else []))
    max_t = max([n_tx] + ([int(g) for g in spec.sweep_grid] if spec.grid_kind == "n_tx" else []))
    h = draw_comm_channels(replace(spec.base, n_users=max_u, n_tx=max_t, comm_noise_powers=(1.0,) * max_u), rng).h
    const = psk_constellation(spec.base.modulation_order)
    idx = substream(spec.seed, _SCENE_SYMBOLS).integers(0, const.order, size=max_u)
    return h[:n_users, :n_tx], const.points[idx[:n_users]]


def _problem(spec: ExperimentSpec, pair, cfg: SystemConfig, kind: DesignKind, threshold: float, x_init=()) -> DesignProblem:
    h, symbols = _scene(spec, cfg.n_users, cfg.n_tx)
    common = dict(
        cfg=cfg,
        channels=CommChannels(h=h),
        symbols=symbols,
        dac_mode=pair[0],
        adc_mode=pair[1],
        comm_metric=spec.comm_metric,
        max_iters=spec.max_iters,
        tolerance=spec.tolerance,
        node_limit=spec.node_limit,
        x_init=tuple(x_init),
    )
    if kind is DesignKind.QOS:
        return DesignProblem(DesignKind.QOS, comm_threshold=(threshold,) * cfg.n_users, **common)
    return DesignProblem(DesignKind.QOD, radar_threshold=threshold, **common)


def _db(v: float) -> float:
    return linear_to_db(v) if v > 0 else (-math.inf if v == 0 else math.nan)


def _design_meta(res: DesignResult, seconds: float) -> dict:
    meta = {"wall_time_s": round(seconds, 6), "design_status": res.status.value, "iterations": res.iterations}
    for key in ("node_limit_hit", "max_gap", "reason", "nodes", "feasibility_nodes", "probes"):
        if key in res.metadata:
            v = res.metadata[key]
            meta[key] = float(v) if isinstance(v, (np.floating, float)) else v
    return meta


def _nan_row(columns, **known) -> dict:
    row = {c: math.nan for c in columns}
    row.update(known)
    return row


def _radar_row(spec, pair, cfg, res: DesignResult, mc_point: bool) -> dict:
    """TA/MC radar metrics of a finished design."""
    if not res.feasible:
        return {"qscnr_ta_db": math.nan, "qscnr_mc_db": math.nan, "qscnr_mc_stderr": math.nan}
    ta = theoretical_scnr(res.f, res.x, radar_channels(cfg), cfg, pair[1])
    out = {"qscnr_ta_db": _db(ta), "qscnr_mc_db": math.nan, "qscnr_mc_stderr": math.nan}
    if mc_point:
        est = mc_qscnr(res.x, res.f, radar_channels(cfg), cfg, spec.mc, pair[1])
        out["qscnr_mc_db"] = _db(est.value)
        # stderr of the dB value by the delta method
        out["qscnr_mc_stderr"] = 10.0 / math.log(10.0) * est.stderr / est.value if est.value > 0 else math.nan
    return out


def _status(res: DesignResult) -> str:
    return res.status.value


def _chain_qos_sweep(spec: ExperimentSpec, pair) -> list[tuple[int, dict, dict]]:
    cols = COLUMNS[spec.experiment]
    out = []
    warm = ()
    # highest threshold first: each design warm-starts the next, easier point
    order = sorted(range(len(spec.sweep_grid)), key=lambda i: -spec.sweep_grid[i])
    for i in order:
        g_db = spec.sweep_grid[i]
        t0 = time.perf_counter()
        p = _problem(spec, pair, spec.base, DesignKind.QOS, db_to_linear(g_db), warm)
        res = solve_design(p)
        row = _nan_row(cols, config=config_label(pair), gamma_db=g_db, status=_status(res))
        if res.feasible:
            warm = (res.x.x,)
            row.update(_radar_row(spec, pair, spec.base, res, True))
            row.update(margin=res.final_min_margin, iters=res.iterations)
        out.append((i, row, _design_meta(res, time.perf_counter() - t0)))
    return out


def _ree(pair, cfg: SystemConfig, scnr: float) -> tuple[float, float]:
    pm = power_model_for(pair[0] is DacMode.ONE_BIT, pair[1] is AdcMode.ONE_BIT)
    return pm.total_power(cfg.n_tx, cfg.n_rx), radar_energy_efficiency(scnr, cfg, pm)


def _chain_antennas(spec: ExperimentSpec, pair) -> list[tuple[int, dict, dict]]:
    cols = COLUMNS[spec.experiment]
    kind = spec.grid_kind
    out = []
    for i, n in enumerate(spec.sweep_grid):
        cfg = replace(spec.base, **{kind: int(n)})
        t0 = time.perf_counter()
        res = solve_design(_problem(spec, pair, cfg, DesignKind.QOS, spec.gamma))
        row = _nan_row(cols, config=config_label(pair), status=_status(res), **{kind: int(n)})
        if res.feasible:
            scnr = theoretical_scnr(res.f, res.x, radar_channels(cfg), cfg, pair[1])
            e_tot, ree = _ree(pair, cfg, scnr)
            if spec.experiment is Experiment.REE:
                row.update(scnr_db=_db(scnr), e_tot_w=e_tot, ree=ree)
            else:
                row.update(_radar_row(spec, pair, cfg, res, True))
                row.update(ree=ree, iters=res.iterations)
        out.append((i, row, _design_meta(res, time.perf_counter() - t0)))
    return out


def _chain_roc(spec: ExperimentSpec, pair) -> list[tuple[int, dict, dict]]:
    cols = COLUMNS[spec.experiment]
    t0 = time.perf_counter()
    res = solve_design(_problem(spec, pair, spec.base, DesignKind.QOS, spec.gamma))
    meta = _design_meta(res, time.perf_counter() - t0)
    label = config_label(pair)
    if not res.feasible:
        return [(i, _nan_row(cols, config=label, pfa=d, status=_status(res)), meta) for i, d in enumerate(spec.sweep_grid)]
    pts = mc_roc(res.x, res.f, radar_channels(spec.base), spec.base, spec.sweep_grid, spec.mc, pair[1])
    return [
        (i, {"config": label, "pfa": pt.delta, "pfa_mc": pt.pfa.value, "pd_mc": pt.pd.value, "pd_ta": pt.pd_ta, "status": _status(res)}, meta)
        for i, pt in enumerate(pts)
    ]


def _ber_cells(pt) -> dict:
    if pt.ber is None:
        return {"status": pt.status}
    return {
        "ber": pt.ber.value,
        "ber_stderr": pt.ber.stderr,
        "sep": pt.sep.value,
        "sep_lb": pt.sep_lower,
        "sep_ub": pt.sep_upper,
        "margin": pt.mean_min_margin,
        "status": pt.status,
    }


def _chain_qod_sweep(spec: ExperimentSpec, pair) -> list[tuple[int, dict, dict]]:
    cols = COLUMNS[spec.experiment]
    cfg = spec.base.with_comm_snr_db(spec.snr_c_db)
    out = []
    warm = ()
    order = sorted(range(len(spec.sweep_grid)), key=lambda i: -spec.sweep_grid[i])
    for i in order:
        chi_db = spec.sweep_grid[i]
        t0 = time.perf_counter()
        p = _problem(spec, pair, cfg, DesignKind.QOD, db_to_linear(chi_db), warm)
        res = solve_design(p)
        row = _nan_row(cols, config=config_label(pair), chi_db=chi_db, status=_status(res))
        if res.feasible:
            warm = (res.x.x,)
            row.update(margin=res.final_min_margin, iters=res.iterations, qscnr_ta_db=_db(res.final_qscnr))
            pt = mc_ber(p, [spec.snr_c_db], spec.mc, n_sym=spec.n_sym)[0]
            cells = _ber_cells(pt)
            row.update(ber=cells.get("ber", math.nan), ber_stderr=cells.get("ber_stderr", math.nan))
        out.append((i, row, _design_meta(res, time.perf_counter() - t0)))
    return out


def _chain_ber_vs_snr(spec: ExperimentSpec, pair) -> list[tuple[int, dict, dict]]:
    cols = COLUMNS[spec.experiment]
    t0 = time.perf_counter()
    p = _problem(spec, pair, spec.base, DesignKind.QOD, spec.chi)
    pts = mc_ber(p, spec.sweep_grid, spec.mc, n_sym=spec.n_sym)
    meta = {"wall_time_s": round(time.perf_counter() - t0, 6)}
    out = []
    for i, pt in enumerate(pts):
        row = _nan_row(cols, config=config_label(pair), snr_c_db=spec.sweep_grid[i])
        row.update(_ber_cells(pt))
        out.append((i, row, {**meta, "n_designs": pt.n_designs, "n_infeasible": pt.n_infeasible, "sep_ub_raw": pt.sep_upper_raw}))
    return out


def _chain_user_sweep(spec: ExperimentSpec, pair) -> list[tuple[int, dict, dict]]:
    cols = COLUMNS[spec.experiment]
    out = []
    for i, u in enumerate(spec.sweep_grid):
        cfg = spec.base.with_users(int(u)).with_comm_snr_db(spec.snr_c_db)
        t0 = time.perf_counter()
        p = _problem(spec, pair, cfg, DesignKind.QOD, spec.chi)
        pt = mc_ber(p, [spec.snr_c_db], spec.mc, n_sym=spec.n_sym)[0]
        row = _nan_row(cols, config=config_label(pair), n_users=int(u))
        cells = _ber_cells(pt)
        row.update({k: v for k, v in cells.items() if k in cols})
        out.append((i, row, {"wall_time_s": round(time.perf_counter() - t0, 6), "n_infeasible": pt.n_infeasible}))
    return out


def _chain_convergence(spec: ExperimentSpec, pair) -> list[tuple[int, dict, dict]]:
    out = []
    for i, g_db in enumerate(spec.sweep_grid):
        t0 = time.perf_counter()
        res = solve_design(_problem(spec, pair, spec.base, DesignKind.QOS, db_to_linear(g_db)))
        meta = _design_meta(res, time.perf_counter() - t0)
        label = config_label(pair)
        if not res.feasible:
            out.append((i, {"config": label, "gamma_db": g_db, "iteration": 0, "objective": math.nan, "status": _status(res)}, meta))
            continue
        for k, val in enumerate(res.objective_trace):
            out.append((i, {"config": label, "gamma_db": g_db, "iteration": k, "objective": val, "status": _status(res)}, meta))
    return out


_RUNNERS: dict[Experiment, Callable] = {
    Experiment.QOS_SWEEP: _chain_qos_sweep,
    Experiment.ANTENNA_SWEEP_RX: _chain_antennas,
    Experiment.ANTENNA_SWEEP_TX: _chain_antennas,
    Experiment.REE: _chain_antennas,
    Experiment.ROC: _chain_roc,
    Experiment.QOD_SWEEP: _chain_qod_sweep,
    Experiment.BER_VS_SNR: _chain_ber_vs_snr,
    Experiment.USER_SWEEP: _chain_user_sweep,
    Experiment.CONVERGENCE: _chain_convergence,
}


def _run_config(spec: ExperimentSpec, index: int) -> list[tuple[int, dict, dict]]:
    return _RUNNERS[spec.experiment](spec, spec.configs[index])


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """One row per (config, grid point); configs run in parallel when ``workers`` > 1.

    Grid points of one config form a warm-start chain and stay sequential. Rows
    are ordered by (config, grid index) whatever the execution order.
    """
    t0 = time.perf_counter()
    n = len(spec.configs)
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=min(workers, n)) as pool:
            chunks = list(pool.map(_run_config, [spec] * n, range(n)))
    else:
        chunks = [_run_config(spec, k) for k in range(n)]
    rows, meta = [], []
    for k, chunk in enumerate(chunks):
        # stable sort keeps the per-iteration order of convergence rows
        for i, row, m in sorted(chunk, key=lambda t: t[0]):
            rows.append(row)
            meta.append({"config_index": k, "grid_index": i, **m})
    return ResultTable(spec.experiment, COLUMNS[spec.experiment], rows, meta, spec, time.perf_counter() - t0)


# --------------------------------------------------------------------------- output


def format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".9g")


def render_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_cell(row[c]) for c in table.columns])
    return buf.getvalue()


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def output_paths(spec: ExperimentSpec, out_dir: str | os.PathLike | None = None) -> tuple[Path, Path]:
    base = Path(out_dir if out_dir is not None else spec.output_path)
    stem = spec.experiment.value
    return base / f"{stem}.csv", base / f"{stem}.json"


def preflight(out_dir: str | os.PathLike) -> None:
    """Fail fast, before any computation, when the output directory is unusable."""
    path = Path(out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path, prefix=".probe-", delete=True):
            pass
    except OSError as exc:
        raise OSError(f"output directory {str(path)!r} is not writable: {exc.strerror or exc}") from exc


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, enum.Enum):
        return v.value
    return v


def emit_results(table: ResultTable, out_dir: str | os.PathLike | None = None) -> tuple[Path, Path]:
    """Write the CSV and its JSON sidecar; returns both paths."""
    if not table.rows:
        raise ValueError("refusing to emit an empty result table")
    csv_path, json_path = output_paths(table.spec, out_dir)
    preflight(csv_path.parent)
    csv_path.write_text(render_csv(table))
    sidecar = {
        "format": SIDECAR_FORMAT,
        "spec": table.spec.document,
        "seed": table.spec.seed,
        "git_describe": git_describe(),
        "columns": list(table.columns),
        "wall_time_s": round(table.wall_time_s, 6),
        "rows": _jsonable(table.row_meta),
    }
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=False) + "\n")
    return csv_path, json_path
