"""Flat `section.key = value` configuration files and scenario construction.

The format is deliberately minimal: one assignment per line, `#` starts a
comment, no quoting or nesting.  Unknown keys are rejected by name, so a
typo cannot silently fall back to a default.  The full schema lives in
docs/config.md.
"""

from __future__ import annotations

import numpy as np

from swlme.basis import Variant
from swlme.model import ModelParams
from swlme.solver import BOUNDARY_KINDS, Grid1D, Scenario


class ConfigError(ValueError):
    """A configuration problem, with the offending key in the message."""


# required keys and the per-preset parameter keys they unlock
REQUIRED_KEYS = (
    "model.N", "model.g", "model.variant",
    "grid.cells", "grid.xmin", "grid.xmax",
    "bc.kind", "ic.name", "time.t_end", "time.cfl", "output.path",
)
OPTIONAL_KEYS = ("topo.name", "output.every_steps", "output.snapshots")
IC_PARAM_KEYS = {
    "dam_break": ("ic.h_l", "ic.h_r", "ic.x0"),
    "lake_at_rest": ("ic.surface",),
    "smooth_periodic": ("ic.h0", "ic.h_amp", "ic.um_amp", "ic.u_amp"),
    "constant": ("ic.h", "ic.um", "ic.u"),
}
TOPO_PARAM_KEYS = {
    "flat": (),
    "gaussian": ("topo.height", "topo.width", "topo.center"),
    "slope": ("topo.grade",),
}


def parse_config(text: str) -> dict:
    """Parse config text into an ordered key -> raw string value mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key or not key or not value:
            raise ConfigError(f"line {lineno}: malformed entry '{raw.strip()}'")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        out[key] = value
    return out


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg: dict) -> str:
    """Echo an accepted configuration; re-parsing yields the same mapping."""
    return "".join(f"{key} = {value}\n" for key, value in cfg.items())


def _get(cfg: dict, key: str, kind, default=None):
    if key not in cfg:
        if default is not None:
            return default
        raise ConfigError(f"missing required key '{key}'")
    raw = cfg[key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"key '{key}': expected {kind.__name__}, got '{raw}'") from None
    return raw


def build_scenario(cfg: dict) -> Scenario:
    """Validate a parsed config and construct the scenario it describes."""
    for key in REQUIRED_KEYS:
        if key not in cfg:
            raise ConfigError(f"missing required key '{key}'")

    ic_name = cfg["ic.name"]
    if ic_name not in IC_PARAM_KEYS:
        raise ConfigError(
            f"key 'ic.name': unknown preset '{ic_name}' (known: {', '.join(IC_PARAM_KEYS)})"
        )
    topo_name = cfg.get("topo.name", "flat")
    if topo_name not in TOPO_PARAM_KEYS:
        raise ConfigError(
            f"key 'topo.name': unknown preset '{topo_name}' (known: {', '.join(TOPO_PARAM_KEYS)})"
        )

    allowed = set(REQUIRED_KEYS) | set(OPTIONAL_KEYS)
    allowed |= set(IC_PARAM_KEYS[ic_name]) | set(TOPO_PARAM_KEYS[topo_name])
    for key in cfg:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}'")

    variant_raw = cfg["model.variant"].lower()
    try:
        variant = Variant(variant_raw)
    except ValueError:
        raise ConfigError(
            f"key 'model.variant': expected 'swlme' or 'swme', got '{cfg['model.variant']}'"
        ) from None
    bc = cfg["bc.kind"]
    if bc not in BOUNDARY_KINDS:
        raise ConfigError(f"key 'bc.kind': unknown kind '{bc}' (known: {', '.join(BOUNDARY_KINDS)})")

    ic_params = {key.split(".", 1)[1]: _get(cfg, key, float)
                 for key in IC_PARAM_KEYS[ic_name] if key in cfg}
    topo_params = {key.split(".", 1)[1]: _get(cfg, key, float)
                   for key in TOPO_PARAM_KEYS[topo_name] if key in cfg}

    try:
        params = ModelParams(g=_get(cfg, "model.g", float), N=_get(cfg, "model.N", int),
                             variant=variant)
        grid = Grid1D(x_min=_get(cfg, "grid.xmin", float),
                      x_max=_get(cfg, "grid.xmax", float),
                      cells=_get(cfg, "grid.cells", int))
        scenario = Scenario(
            params=params, grid=grid,
            ic_name=ic_name, ic_params=ic_params,
            topo_name=topo_name, topo_params=topo_params,
            boundary=bc,
            t_end=_get(cfg, "time.t_end", float),
            cfl=_get(cfg, "time.cfl", float),
            output_every_steps=_get(cfg, "output.every_steps", int, default=0),
            output_snapshots=_get(cfg, "output.snapshots", int, default=0),
        )
        U0 = scenario.initial_states()
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from err
    if np.any(U0[:, 0] <= 0.0):
        raise ConfigError("initial condition produces non-positive depth")
    return scenario
