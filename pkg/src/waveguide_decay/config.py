"""JSON run configuration: nested sections mirroring the library types.

Every section is optional and falls back to the calibrated defaults; unknown
keys anywhere are rejected so that a typo can never silently change a run.
"""
import copy
import json
import os
from dataclasses import dataclass

from .coupling_kernels import KernelOptions
from .decay_analysis import FitWindow
from .ensemble_sampler import CloudComponent, CloudSpec, load_positions_csv
from .errors import ValidationError
from .mode_model import make_mode_spec
from .montecarlo_engine import DEFAULT_REALIZATIONS, RunSpec, default_time_grid

DEFAULTS = {
    "mode": {"wavelength": 780.0, "n_eff": 1.15, "gamma_1d_ratio": 0.13},
    "cloud": {
        "components": [{"center_z": 0.0, "fwhm_z": 200000.0, "weight": 1.0}],
        "r_fixed": 270.0,
        "n_atoms": 7,
        "partition": "weighted",
        "positions_file": None,
    },
    "kernels": {"radiated_variant": "full_free_space", "guided_enabled": True,
                "near_field_cutoff": 10.0},
    "run": {
        "realizations": DEFAULT_REALIZATIONS,
        "master_seed": 0,
        "time_grid": {"start": 0.0, "stop": 20.0, "step": 0.05},
        "drive_direction": [1.0, 0.0, 0.0],
        "normalization": "ensemble",
        "exclude_dark": True,
        "both_polarizations": False,
    },
    "analysis": {"fast_window": [0.1, 1.0], "slow_window": [6.0, 15.0],
                 "fast_background": False, "slow_background": True},
    "output": {"directory": "output", "float_format": ".17g"},
}
COMPONENT_KEYS = {"center_z", "fwhm_z", "weight"}
TIME_GRID_KEYS = {"start", "stop", "step"}
OUTPUT_ENV = "WAVEGUIDE_DECAY_OUTPUT_DIR"


def _merge(defaults, given, path):
    if not isinstance(given, dict):
        raise ValidationError(path, "expected an object")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ValidationError(path, f"unknown keys {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if key == "time_grid":
            extra = set(value) - TIME_GRID_KEYS if isinstance(value, dict) else {"?"}
            if extra:
                raise ValidationError(f"{path}.time_grid", f"unknown keys {sorted(extra)}")
            out[key].update(value)
        else:
            out[key] = value
    return out


@dataclass(frozen=True, eq=False)
class RunConfig:
    raw: dict
    spec: RunSpec
    fast_window: FitWindow
    slow_window: FitWindow
    fast_background: bool
    slow_background: bool
    output_dir: str
    float_format: str

    def to_dict(self):
        return copy.deepcopy(self.raw)


def _section(name, build):
    try:
        return build()
    except ValidationError as exc:
        if exc.field.startswith(name):
            raise
        raise ValidationError(f"{name}.{exc.field}", str(exc).split(": ", 1)[1]) from exc
    except (TypeError, ValueError) as exc:
        raise ValidationError(name, f"bad field types ({exc})") from exc


def parse_config(data, base_dir="."):
    if not isinstance(data, dict):
        raise ValidationError("config", "top level must be an object")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ValidationError("config", f"unknown sections {sorted(unknown)}")
    raw = {name: _merge(DEFAULTS[name], data.get(name, {}), name) for name in DEFAULTS}

    mode = _section("mode", lambda: make_mode_spec(**raw["mode"]))
    cloud = _section("cloud", lambda: _cloud(raw["cloud"], base_dir))
    kernels = _section("kernels", lambda: KernelOptions(**raw["kernels"]))
    spec = _section("run", lambda: _run_spec(raw["run"], cloud, mode, kernels))
    an = raw["analysis"]
    windows = _section("analysis", lambda: (FitWindow(*an["fast_window"]),
                                            FitWindow(*an["slow_window"])))
    out = raw["output"]
    try:
        format(1.0, out["float_format"])
    except (TypeError, ValueError):
        raise ValidationError("output.float_format", f"invalid format {out['float_format']!r}")
    return RunConfig(
        raw=raw,
        spec=spec,
        fast_window=windows[0],
        slow_window=windows[1],
        fast_background=bool(an["fast_background"]),
        slow_background=bool(an["slow_background"]),
        output_dir=os.environ.get(OUTPUT_ENV) or out["directory"],
        float_format=out["float_format"],
    )


def _cloud(cl, base_dir):
    if cl["positions_file"]:
        path = cl["positions_file"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ValidationError("positions_file", f"not found: {path}")
        cloud = load_positions_csv(path)
    else:
        comps = []
        for i, c in enumerate(cl["components"]):
            if not isinstance(c, dict) or set(c) - COMPONENT_KEYS or not {"center_z", "fwhm_z"} <= set(c):
                raise ValidationError(f"components[{i}]", f"expected keys {sorted(COMPONENT_KEYS)}")
            comps.append(CloudComponent(float(c["center_z"]), float(c["fwhm_z"]),
                                        float(c.get("weight", 1.0))))
        if not isinstance(cl["n_atoms"], int) or isinstance(cl["n_atoms"], bool):
            raise ValidationError("n_atoms", "must be an integer")
        cloud = CloudSpec(tuple(comps), float(cl["r_fixed"]), cl["n_atoms"], cl["partition"])
    return cloud


def _run_spec(run, cloud, mode, kernels):
    grid = run["time_grid"]
    if float(grid["start"]) != 0.0:
        raise ValidationError("time_grid.start", "must be 0")
    if not float(grid["step"]) > 0 or not float(grid["stop"]) > float(grid["step"]):
        raise ValidationError("time_grid", "need 0 < step < stop")
    seed = run["master_seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValidationError("master_seed", "must be an integer")
    if not isinstance(run["realizations"], int) or isinstance(run["realizations"], bool):
        raise ValidationError("realizations", "must be an integer")
    return RunSpec(
        cloud=cloud,
        mode=mode,
        kernels=kernels,
        drive_direction=tuple(float(v) for v in run["drive_direction"]),
        realizations=run["realizations"],
        master_seed=seed,
        time_grid=default_time_grid(float(grid["stop"]), float(grid["step"])),
        normalization=run["normalization"],
        exclude_dark=bool(run["exclude_dark"]),
        both_polarizations=bool(run["both_polarizations"]),
    )


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError("config", f"{path}: invalid JSON ({exc})")
    return parse_config(data, os.path.dirname(os.path.abspath(path)))
