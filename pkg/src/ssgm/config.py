"""Run configuration: a flat INI-style file with named blocks.

Example::

    [process]
    family = canonical
    H = 0.7
    c = -1.5

    [grid]
    geometric = 0.1 2.0 16
    # or: times = 0.5 1.0 2.0

    [mc]
    n_paths = 50000
    seed = 42
    inner_steps = 256

    [tolerances]
    quad_tol = 1e-10
    psd_tol = 1e-10

    [output]
    csv = out.csv
    json = out.json

Numbers parse in full double precision; ``c = -inf`` spells the white-noise
limit.  ``parse_config(serialize_config(cfg))`` is the identity.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError
from .gram import TimeGrid
from .kernels import ProcessSpec, spec_from_params, spec_to_params

__all__ = ["GridConfig", "MCConfig", "ToleranceConfig", "OutputConfig", "RunConfig",
           "parse_config", "serialize_config", "load_config"]


@dataclass(frozen=True)
class GridConfig:
    """Either an explicit time list or a geometric start/stop/points recipe."""

    times: Optional[tuple] = None
    geometric: Optional[tuple] = None  # (start, stop, points)

    def __post_init__(self):
        if (self.times is None) == (self.geometric is None):
            raise ParameterError("grid block needs exactly one of 'times' or 'geometric'")

    def build(self) -> TimeGrid:
        if self.times is not None:
            return TimeGrid(np.asarray(self.times, dtype=float))
        start, stop, points = self.geometric
        return TimeGrid.geometric(start, stop, int(points))


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 1000
    seed: Optional[int] = None
    inner_steps: Optional[int] = None


@dataclass(frozen=True)
class ToleranceConfig:
    quad_tol: float = 1e-10
    psd_tol: float = 1e-10


@dataclass(frozen=True)
class OutputConfig:
    csv: Optional[str] = None
    json: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    process: ProcessSpec
    grid: GridConfig
    mc: MCConfig = field(default_factory=MCConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep H / htilde capitalization
    cp.read_string(text)
    if "process" not in cp or "grid" not in cp:
        raise ParameterError("config must contain [process] and [grid] blocks")
    spec = spec_from_params(dict(cp["process"]))

    gblock = cp["grid"]
    if "times" in gblock and "geometric" in gblock:
        raise ParameterError("grid block must not contain both 'times' and 'geometric'")
    if "times" in gblock:
        grid = GridConfig(times=tuple(float(x) for x in gblock["times"].split()))
    elif "geometric" in gblock:
        parts = gblock["geometric"].split()
        if len(parts) != 3:
            raise ParameterError("geometric grid needs 'start stop points'")
        grid = GridConfig(geometric=(float(parts[0]), float(parts[1]), int(parts[2])))
    else:
        raise ParameterError("grid block needs 'times' or 'geometric'")

    mc = MCConfig()
    if "mc" in cp:
        m = cp["mc"]
        mc = MCConfig(
            n_paths=int(m.get("n_paths", "1000")),
            seed=int(m["seed"]) if "seed" in m else None,
            inner_steps=int(m["inner_steps"]) if "inner_steps" in m else None,
        )
    tols = ToleranceConfig()
    if "tolerances" in cp:
        tb = cp["tolerances"]
        tols = ToleranceConfig(
            quad_tol=float(tb.get("quad_tol", "1e-10")),
            psd_tol=float(tb.get("psd_tol", "1e-10")),
        )
    out = OutputConfig()
    if "output" in cp:
        ob = cp["output"]
        out = OutputConfig(csv=ob.get("csv") or None, json=ob.get("json") or None)
    return RunConfig(spec, grid, mc, tols, out)


def serialize_config(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["process"] = spec_to_params(cfg.process)
    if cfg.grid.times is not None:
        cp["grid"] = {"times": " ".join(repr(float(t)) for t in cfg.grid.times)}
    else:
        start, stop, points = cfg.grid.geometric
        cp["grid"] = {"geometric": f"{float(start)!r} {float(stop)!r} {int(points)}"}
    mc = {}
    if cfg.mc.n_paths != 1000:
        mc["n_paths"] = str(cfg.mc.n_paths)
    if cfg.mc.seed is not None:
        mc["seed"] = str(cfg.mc.seed)
    if cfg.mc.inner_steps is not None:
        mc["inner_steps"] = str(cfg.mc.inner_steps)
    if mc:
        cp["mc"] = mc
    cp["tolerances"] = {
        "quad_tol": repr(cfg.tolerances.quad_tol),
        "psd_tol": repr(cfg.tolerances.psd_tol),
    }
    out = {}
    if cfg.output.csv:
        out["csv"] = cfg.output.csv
    if cfg.output.json:
        out["json"] = cfg.output.json
    if out:
        cp["output"] = out
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
