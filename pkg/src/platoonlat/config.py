"""Scenario configuration files.

Flat ``key = value`` blocks under ``[section]`` headers; every key carries
its unit in the name.  Errors name the file and line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .control import OUTPUT_LATERAL, OUTPUT_VECTOR, GainSet, kff_formula
from .design import DesignSpec
from .model import LINCOLN_MKZ, VehicleParams
from .path import DesiredPath, make_constant_curvature, make_lane_change_track
from .sim import STRATEGIES, DelaySpec, Scenario


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        where = f"{source}:{line}: " if line else f"{source}: "
        super().__init__(where + message)
        self.line = line


def _number(v: str):
    return float(v)


def _integer(v: str):
    x = int(v)
    return x


def _numbers(v: str):
    return tuple(float(x) for x in v.split(","))


def _choice(*options):
    def parse(v: str):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


def _flag(v: str):
    low = v.lower()
    if low in ("yes", "true", "on", "1"):
        return True
    if low in ("no", "false", "off", "0"):
        return False
    raise ValueError("expected yes or no")


def _kff(v: str):
    return None if v == "auto" else float(v)


SCHEMA = {
    "vehicle": {
        "mass_kg": _number,
        "yaw_inertia_kg_m2": _number,
        "cf_n_per_rad": _number,
        "cr_n_per_rad": _number,
        "a_m": _number,
        "b_m": _number,
        "speed_mps": _number,
    },
    "path": {
        "type": _choice("lane_change", "constant_curvature"),
        "n_changes": _integer,
        "lane_offset_m": _number,
        "change_length_m": _numbers,
        "straight_length_m": _number,
        "curvature_per_m": _number,
        "length_m": _number,
    },
    "gains": {
        "k_elat_rad_per_m": _number,
        "k_theta": _number,
        "k_elat_dot_rad_s_per_m": _number,
        "k_theta_dot_s": _number,
        "k_ff_m": _kff,
        "k_lp_rad_per_m": _numbers,
        "k_ld_rad": _numbers,
    },
    "platoon": {
        "vehicles": _integer,
        "strategy": _choice(*STRATEGIES),
        "output": _choice(OUTPUT_LATERAL, OUTPUT_VECTOR),
        "step_m": _number,
        "delay_s": _number,
        "spacing_m": _number,
    },
    "outputs": {
        "trajectory": _flag,
        "trajectory_stride": _integer,
        "norms": _flag,
        "certificate": _flag,
        "path": _flag,
        "learned": _flag,
    },
    "design": {
        "k_lp_min": _number,
        "k_lp_max": _number,
        "k_ld_min": _number,
        "k_ld_max": _number,
        "grid": _integer,
        "refinements": _integer,
        "seed_k_lp": _number,
        "seed_k_ld": _number,
    },
}


@dataclass
class OutputOptions:
    trajectory: bool = True
    trajectory_stride: int = 1
    norms: bool = True
    certificate: bool = True
    path: bool = True
    learned: bool = False


@dataclass
class ScenarioConfig:
    source: str
    params: VehicleParams
    gains: GainSet
    strategy: str
    output: str
    vehicles: int
    step: float
    path: DesiredPath
    delay: DelaySpec | None
    outputs: OutputOptions
    design: DesignSpec | None
    lines: dict = field(default_factory=dict, repr=False)

    def scenario(self) -> Scenario:
        return Scenario(self.params, self.gains, self.strategy, self.vehicles, self.path, self.step, None, self.delay)


def parse_text(text: str, source: str = "<config>") -> dict:
    """Split into ``{section: {key: (raw value, line)}}`` and check names against the schema."""
    out: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", source, lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", source, lineno)
            if section in out:
                raise ConfigError(f"duplicate section [{section}]", source, lineno)
            out[section] = {"__line__": lineno}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", source, lineno)
        if section is None:
            raise ConfigError("key outside of any section", source, lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", source, lineno)
        if key in out[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", source, lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", source, lineno)
        try:
            out[section][key] = (SCHEMA[section][key](value), lineno)
        except ValueError as exc:
            raise ConfigError(f"bad value {value!r} for {key!r}: {exc}", source, lineno) from None
    return out


class _Section:
    def __init__(self, blocks: dict, name: str, source: str):
        self.data = blocks.get(name, {"__line__": None})
        self.name = name
        self.source = source

    def get(self, key, default=None):
        return self.data[key][0] if key in self.data else default

    def require(self, key):
        if key not in self.data:
            raise ConfigError(f"missing key {key!r} in [{self.name}]", self.source, self.data["__line__"])
        return self.data[key][0]

    def fail(self, key, message):
        line = self.data[key][1] if key in self.data else self.data["__line__"]
        raise ConfigError(message, self.source, line)

    @property
    def present(self) -> bool:
        return self.data["__line__"] is not None


def _guard(section: _Section, key: str, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except ValueError as exc:
        section.fail(key, str(exc))


def load_config(text: str, source: str = "<config>") -> ScenarioConfig:
    blocks = parse_text(text, source)
    veh = _Section(blocks, "vehicle", source)
    d = LINCOLN_MKZ
    params = _guard(veh, "mass_kg", lambda: VehicleParams(
        veh.get("mass_kg", d.mass), veh.get("yaw_inertia_kg_m2", d.yaw_inertia), veh.get("cf_n_per_rad", d.cf),
        veh.get("cr_n_per_rad", d.cr), veh.get("a_m", d.a), veh.get("b_m", d.b), veh.get("speed_mps", d.vx)))

    plat = _Section(blocks, "platoon", source)
    strategy = plat.get("strategy", "lfp")
    output = plat.get("output", OUTPUT_LATERAL)
    vehicles = plat.get("vehicles", 12)
    step = plat.get("step_m", 0.01)
    if vehicles < 2:
        plat.fail("vehicles", "vehicles must be at least 2")
    if not step > 0:
        plat.fail("step_m", "step_m must be positive")
    delay = None
    if "delay_s" in plat.data or "spacing_m" in plat.data:
        delay = DelaySpec(plat.require("delay_s"), plat.require("spacing_m"))
        if delay.delay < 0:
            plat.fail("delay_s", "delay_s must be nonnegative")
        if delay.spacing <= 0:
            plat.fail("spacing_m", "spacing_m must be positive")

    g = _Section(blocks, "gains", source)
    k_theta = g.get("k_theta", 0.96)
    k_ff = g.get("k_ff_m", None)
    if k_ff is None:
        k_ff = kff_formula(params, k_theta)
    width = 1 if output == OUTPUT_LATERAL else 2
    lp0, ld0 = (-0.04, -0.3) if strategy == "lfp" else (0.0, 0.0)
    k_lp = g.get("k_lp_rad_per_m", (lp0,) + (0.0,) * (width - 1))
    k_ld = g.get("k_ld_rad", (ld0,) + (0.0,) * (width - 1))
    for key, val in (("k_lp_rad_per_m", k_lp), ("k_ld_rad", k_ld)):
        if len(val) != width:
            g.fail(key, f"{key} needs {width} value(s) for output = {output}")
    gains = _guard(g, "k_elat_rad_per_m", lambda: GainSet(
        k_p=(g.get("k_elat_rad_per_m", 0.06), k_theta),
        k_d=(g.get("k_elat_dot_rad_s_per_m", 0.0), g.get("k_theta_dot_s", 0.08)),
        k_ff=k_ff, k_lp=k_lp, k_ld=k_ld, output=output))

    p = _Section(blocks, "path", source)
    kind = p.get("type", "lane_change")
    if kind == "lane_change":
        extra = [k for k in ("curvature_per_m", "length_m") if k in p.data]
        if extra:
            p.fail(extra[0], f"{extra[0]} does not apply to type = lane_change")
        n = p.get("n_changes", 4)
        lengths = p.get("change_length_m", (13.0, 20.0, 35.0, 50.0))
        lengths = lengths[0] if len(lengths) == 1 else lengths
        path = _guard(p, "change_length_m", lambda: make_lane_change_track(
            n, p.get("lane_offset_m", 3.5), lengths, p.get("straight_length_m", 100.0), step=step))
    else:
        extra = [k for k in ("n_changes", "lane_offset_m", "change_length_m", "straight_length_m") if k in p.data]
        if extra:
            p.fail(extra[0], f"{extra[0]} does not apply to type = constant_curvature")
        path = _guard(p, "length_m", lambda: make_constant_curvature(
            p.require("curvature_per_m"), p.require("length_m"), step=step))

    o = _Section(blocks, "outputs", source)
    outputs = OutputOptions(
        trajectory=o.get("trajectory", True),
        trajectory_stride=o.get("trajectory_stride", 1),
        norms=o.get("norms", True),
        certificate=o.get("certificate", True),
        path=o.get("path", True),
        learned=o.get("learned", False),
    )
    if outputs.trajectory_stride < 1:
        o.fail("trajectory_stride", "trajectory_stride must be >= 1")

    des = _Section(blocks, "design", source)
    design = None
    if des.present:
        seed = None
        if "seed_k_lp" in des.data or "seed_k_ld" in des.data:
            seed = (des.require("seed_k_lp"), des.require("seed_k_ld"))
        design = _guard(des, "k_lp_min", lambda: DesignSpec(
            params, k_p=gains.k_p, k_d=gains.k_d, k_ff=g.get("k_ff_m", None),
            k_lp_range=(des.get("k_lp_min", -0.1), des.get("k_lp_max", -0.005)),
            k_ld_range=(des.get("k_ld_min", -1.0), des.get("k_ld_max", -0.01)),
            grid=des.get("grid", 9), refinements=des.get("refinements", 2), seed=seed))

    return ScenarioConfig(source, params, gains, strategy, output, vehicles, step, path, delay, outputs, design)


def load_config_file(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return load_config(text, str(path))
