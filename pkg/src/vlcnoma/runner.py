"""Scenario orchestration: build the scene, trace, allocate, report."""

from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, raytrace
from .alloc import LinkReport, evaluate_fixed, greedy, optimize
from .config import ScenarioConfig
from .exceptions import EnumerationCapError, NoCoverageError, ScenarioParseError, ScenarioValidationError
from .noma import NoiseParams, effective_bandwidth, sinr_db
from .receiver import ADR, WIDE, build_adr, build_wide_fov, trace_channels
from .scene import AccessPoint, Room, Scene, lambertian_order_from_semiangle, tile_edges

KINDS = (ADR, WIDE)

LINK_FIELDS = ["receiver", "user", "x", "y", "z", "serving_ap", "branch", "dc_gain", "bandwidth_hz",
               "bandwidth_limited", "effective_bandwidth_hz", "coefficient", "sinr", "sinr_db",
               "sinr_literal", "sinr_sic", "rate_bps"]
GRID_FIELDS = ["receiver", "x", "y", "serving_ap", "branch", "dc_gain", "bandwidth_hz", "sinr", "sinr_db", "rate_bps"]


def build_room(cfg: ScenarioConfig) -> Room:
    r = cfg.room
    return Room(r.length, r.width, r.height, r.wall_reflectivity, r.ceiling_reflectivity, r.floor_reflectivity)


def build_scene(cfg: ScenarioConfig) -> Scene:
    t = cfg.tracing
    return Scene(build_room(cfg), t.first_order_element, t.second_order_element, cfg.room.include_floor,
                 lambertian_order_from_semiangle(t.element_semiangle))


def build_access_points(cfg: ScenarioConfig) -> list:
    n = len(cfg.access_points)
    aps = []
    for ident, ap in zip(cfg.ap_ids, cfg.access_points):
        pt = ap.transmit_power if cfg.noma.power_budget == "per-ap" else ap.transmit_power / n
        aps.append(AccessPoint(ap.position, ap.orientation, lambertian_order_from_semiangle(ap.semiangle),
                               pt, ap.efficiency, ident))
    return aps


def build_receiver(cfg: ScenarioConfig, kind: str, position, room: Room | None = None):
    if kind == ADR:
        a = cfg.receiver.adr
        return build_adr(position, room, a.elevation, a.azimuths, a.fov, a.area, a.responsivity)
    w = cfg.receiver.wide
    return build_wide_fov(position, w.fov, room, w.area, w.responsivity)


def build_noise(cfg: ScenarioConfig) -> NoiseParams:
    n = cfg.noise
    return NoiseParams(n.noise_power_density, n.receiver_bandwidth, n.dark_current, n.background_power_ref,
                       n.reference_fov)


def _kinds(receiver_kind: str) -> tuple:
    if receiver_kind == "compare":
        return KINDS
    if receiver_kind in (ADR, WIDE, "per-user"):
        return (receiver_kind,)
    raise ScenarioValidationError([("run.receiver", f"unknown receiver kind {receiver_kind!r}", None)])


def load_fixed_assignment(path, cfg: ScenarioConfig) -> tuple:
    """Read a ``user_id: ap_id`` YAML mapping into an assignment vector."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioParseError(f"{path}: expected a mapping of user id to access point id")
    errors = []
    vector = []
    for uid in cfg.user_ids:
        ap = data.get(uid)
        if ap not in cfg.ap_ids:
            errors.append((f"fixed_assignment.{uid}", f"unknown or missing access point {ap!r}", None))
        else:
            vector.append(cfg.ap_ids.index(ap))
    for uid in data:
        if uid not in cfg.user_ids:
            errors.append((f"fixed_assignment.{uid}", "unknown user id", None))
    if errors:
        raise ScenarioValidationError(errors)
    return tuple(vector)


@dataclass
class KindResult:
    kind: str
    channels: object
    report: LinkReport
    positions: dict


@dataclass
class ResultBundle:
    config: ScenarioConfig
    runs: dict  # kind -> KindResult
    options: dict = field(default_factory=dict)
    timestamp: str = ""

    @property
    def compare(self) -> bool:
        return ADR in self.runs and WIDE in self.runs

    def rates(self, kind: str) -> dict:
        return {l.user_id: l.rate for l in self.runs[kind].report.links}

    def improvements(self) -> dict:
        """Per-user data-rate gain of the ADR over the wide-FOV receiver, in percent."""
        adr, wide = self.rates(ADR), self.rates(WIDE)
        out = {}
        for uid in self.config.user_ids:
            w = wide[uid]
            out[uid] = 100.0 * (adr[uid] - w) / w if w > 0 else (math.inf if adr[uid] > 0 else 0.0)
        return out

    def average_improvement(self) -> float:
        return float(np.mean(list(self.improvements().values())))

    def provenance(self) -> dict:
        return {"tool": "vlcnoma", "version": __version__, "config_sha256": self.config.digest(),
                "timestamp": self.timestamp}


def run_scenario(cfg: ScenarioConfig, receiver_kind: str | None = None, *, noma_mode: str | None = None,
                 max_order: int | None = None, objective: str | None = None, inter_ap: bool | None = None,
                 fixed_assignment=None, threads: int = 1, keep_responses: bool = False,
                 scene: Scene | None = None) -> ResultBundle:
    """Trace every AP/user/branch channel and allocate users for each requested receiver kind.

    In compare mode both receiver kinds are evaluated on the same scene,
    access points and noise model.
    """
    kind = receiver_kind or cfg.run.receiver
    mode = noma_mode or cfg.noma.mode
    order = cfg.tracing.max_order if max_order is None else max_order
    obj = objective or cfg.noma.objective
    cci = cfg.noma.inter_ap_interference if inter_ap is None else inter_ap
    scene = scene or build_scene(cfg)
    aps = build_access_points(cfg)
    noise = build_noise(cfg)
    t = cfg.tracing
    runs = {}
    for k in _kinds(kind):
        kinds = [u.receiver for u in cfg.users] if k == "per-user" else [k] * len(cfg.users)
        receivers = [build_receiver(cfg, kk, u.position, scene.room) for kk, u in zip(kinds, cfg.users)]
        channels = trace_channels(scene, aps, receivers, cfg.user_ids, order, t.bin_width, t.scan_limit,
                                  t.pad_factor, threads, keep_responses)
        if fixed_assignment is not None:
            _, report = evaluate_fixed(fixed_assignment, channels, noise, mode, obj, aps, cci)
        else:
            try:
                _, report = optimize(channels, noise, mode, obj, aps, cci, cfg.noma.enumeration_cap, threads)
            except EnumerationCapError:
                if cfg.noma.fallback != "greedy":
                    raise
                _, report = greedy(channels, noise, mode, obj, aps, cci)
        positions = {uid: u.position for uid, u in zip(cfg.user_ids, cfg.users)}
        runs[k] = KindResult(k, channels, report, positions)
    options = {"receiver": kind, "noma_mode": mode, "max_order": order, "objective": obj,
               "inter_ap_interference": cci, "fixed_assignment": list(fixed_assignment) if fixed_assignment else None}
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return ResultBundle(cfg, runs, options, stamp)


def grid_points(cfg: ScenarioConfig, step: float) -> list:
    """Centres of the (edge-clipped) grid cells covering the floor plan, x-major."""
    if not step > 0:
        raise ScenarioValidationError([("grid_step", f"must be positive, got {step}", None)])
    ex = tile_edges(cfg.room.length, step)
    ey = tile_edges(cfg.room.width, step)
    xs = 0.5 * (ex[:-1] + ex[1:])
    ys = 0.5 * (ey[:-1] + ey[1:])
    return [(float(x), float(y)) for x in xs for y in ys]


def sweep_grid(cfg: ScenarioConfig, receiver_kind: str | None = None, grid_step: float = 0.5, *,
               noma_mode: str | None = None, max_order: int | None = None, threads: int = 1,
               scene: Scene | None = None) -> list:
    """Evaluate a single roaming user at every grid point of the receiver plane.

    Returns dict rows with the ``GRID_FIELDS`` keys, ordered by receiver
    kind, then x, then y.
    """
    kind = receiver_kind or cfg.run.receiver
    kinds = KINDS if kind == "compare" else ((ADR,) if kind == "per-user" else (kind,))
    mode = noma_mode or cfg.noma.mode
    order = cfg.tracing.max_order if max_order is None else max_order
    scene = scene or build_scene(cfg)
    aps = build_access_points(cfg)
    noise = build_noise(cfg)
    t = cfg.tracing
    z = cfg.grid.height
    rows = []
    for k in kinds:
        for x, y in grid_points(cfg, grid_step):
            rx = build_receiver(cfg, k, (x, y, z), scene.room)
            channels = trace_channels(scene, aps, [rx], ["roaming"], order, t.bin_width, t.scan_limit,
                                      t.pad_factor, threads)
            try:
                _, report = optimize(channels, noise, mode, cfg.noma.objective, aps, False, cfg.noma.enumeration_cap)
                link = report.links[0]
                rows.append({"receiver": k, "x": x, "y": y, "serving_ap": link.ap_id, "branch": link.branch,
                             "dc_gain": link.dc_gain, "bandwidth_hz": link.bandwidth, "sinr": link.sinr,
                             "sinr_db": link.sinr_db, "rate_bps": link.rate})
            except NoCoverageError:
                # uncovered points stay in the grid as zero rows
                rows.append({"receiver": k, "x": x, "y": y, "serving_ap": "", "branch": -1, "dc_gain": 0.0,
                             "bandwidth_hz": 0.0, "sinr": 0.0, "sinr_db": -math.inf, "rate_bps": 0.0})
    return rows


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def link_rows(bundle: ResultBundle) -> list:
    noise = build_noise(bundle.config)
    rows = []
    for kind, res in bundle.runs.items():
        for link in sorted(res.report.links, key=lambda l: bundle.config.user_ids.index(l.user_id)):
            x, y, z = res.positions[link.user_id]
            rows.append({"receiver": kind, "user": link.user_id, "x": x, "y": y, "z": z,
                         "serving_ap": link.ap_id, "branch": link.branch, "dc_gain": link.dc_gain,
                         "bandwidth_hz": link.bandwidth, "bandwidth_limited": link.bandwidth_limited,
                         "effective_bandwidth_hz": effective_bandwidth(link.bandwidth, noise),
                         "coefficient": link.coefficient, "sinr": link.sinr, "sinr_db": sinr_db(link.sinr),
                         "sinr_literal": link.sinr_literal, "sinr_sic": link.sinr_sic, "rate_bps": link.rate})
    return rows


def summary_rows(bundle: ResultBundle) -> tuple[list, list]:
    kinds = list(bundle.runs)
    header = ["user"] + [f"rate_{k}_bps" for k in kinds] + (["improvement_pct"] if bundle.compare else [])
    rates = {k: bundle.rates(k) for k in kinds}
    imp = bundle.improvements() if bundle.compare else {}
    rows = []
    for uid in bundle.config.user_ids:
        row = {"user": uid, **{f"rate_{k}_bps": rates[k][uid] for k in kinds}}
        if bundle.compare:
            row["improvement_pct"] = imp[uid]
        rows.append(row)
    avg = {"user": "average", **{f"rate_{k}_bps": float(np.mean(list(rates[k].values()))) for k in kinds}}
    if bundle.compare:
        avg["improvement_pct"] = bundle.average_improvement()
    rows.append(avg)
    return header, rows


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[h]) for h in header])


def write_outputs(bundle: ResultBundle, out_dir, grid_rows=None, dump_ir: str | None = None) -> dict:
    """Write ``links.csv``, ``summary.csv``, optional ``grid.csv``/IR dumps and ``run-manifest.yaml``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    write_csv(out / "links.csv", LINK_FIELDS, link_rows(bundle))
    written["links"] = out / "links.csv"
    header, rows = summary_rows(bundle)
    write_csv(out / "summary.csv", header, rows)
    written["summary"] = out / "summary.csv"
    if grid_rows is not None:
        write_csv(out / "grid.csv", GRID_FIELDS, grid_rows)
        written["grid"] = out / "grid.csv"
    if dump_ir is not None:
        ir_dir = Path(dump_ir)
        ir_dir.mkdir(parents=True, exist_ok=True)
        for kind, res in bundle.runs.items():
            ch = res.channels
            for (a, u, b), ir in sorted(ch.responses.items()):
                raytrace.write_ir_csv(ir, ir_dir / f"ir_{kind}_{ch.ap_ids[a]}_{ch.user_ids[u]}_b{b}.csv")
        written["ir"] = ir_dir
    manifest = {
        "provenance": bundle.provenance(),
        "options": bundle.options,
        "assignments": {k: r.report.assignment.mapping() for k, r in bundle.runs.items()},
        "assignment_optimal": {k: r.report.optimal for k, r in bundle.runs.items()},
        "sum_sinr": {k: r.report.sum_sinr for k, r in bundle.runs.items()},
        "sum_rate_bps": {k: r.report.sum_rate for k, r in bundle.runs.items()},
        "config": bundle.config.to_dict(),
    }
    if bundle.compare:
        manifest["average_improvement_pct"] = bundle.average_improvement()
    (out / "run-manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))
    written["manifest"] = out / "run-manifest.yaml"
    return written
