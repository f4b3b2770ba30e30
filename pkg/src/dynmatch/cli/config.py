"""Experiment spec files: flat key = value pairs under section headers.

Example::

    [model]
    spec = pareto:c=1,beta=2

    [market]
    lambda = 1
    eta = 1
    n = 1000

    [policy]
    spec = population:z=347

    [simulation]
    horizon = 1500
    warmup = 150
    replications = 100
    base_seed = 20240101

Sections ``[sweep]``, ``[fluid]`` and ``[output]`` are optional.  Unknown
sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from ..analytics import MarketParams
from ..sim import SimConfig, parse_policy
from ..sim.engine import Policy
from ..utility_models import UtilityModel, parse_model

__all__ = ["SpecError", "ExperimentSpec", "load_spec", "parse_spec_text", "parse_grid", "bundled_spec"]


class SpecError(ValueError):
    """Invalid experiment spec."""


_KEYS = {
    "model": {"spec"},
    "market": {"lambda", "eta", "lambda_b", "lambda_s", "eta_b", "eta_s", "n"},
    "policy": {"spec"},
    "simulation": {"horizon", "warmup", "replications", "base_seed", "initial_buyers",
                   "initial_sellers", "probe_level"},
    "sweep": {"grid", "target", "common_random_numbers"},
    "fluid": {"kind", "z", "v", "vb", "vs", "b0", "s0", "t_end", "dt", "delta", "cycles"},
    "output": {"path"},
}


@dataclass
class ExperimentSpec:
    model: UtilityModel
    params: MarketParams
    policy: Policy | None = None
    horizon: float = 1500.0
    warmup: float = 150.0
    replications: int = 100
    base_seed: int = 0
    initial_buyers: int | None = None
    initial_sellers: int | None = None
    probe_level: float = math.inf
    grid: list[float] | None = None
    targets: list[str | None] = field(default_factory=lambda: [None])
    common_random_numbers: bool = True
    fluid: dict[str, str] = field(default_factory=dict)
    output: str | None = None
    source: str = "<string>"

    def sim_config(self) -> SimConfig:
        if self.policy is None:
            raise SpecError(f"{self.source}: a [policy] section is required for simulation")
        try:
            return SimConfig(self.model, self.params, self.policy, self.horizon, self.warmup,
                             self.initial_buyers, self.initial_sellers, self.replications,
                             self.base_seed, self.probe_level)
        except ValueError as exc:
            raise SpecError(f"{self.source}: {exc}") from exc

    def with_overrides(self, seed: int | None = None, reps: int | None = None) -> "ExperimentSpec":
        out = self
        if seed is not None:
            out = replace(out, base_seed=seed)
        if reps is not None:
            out = replace(out, replications=reps)
        return out


def parse_grid(text: str) -> list[float]:
    """``"0:1000:1"`` (inclusive start:stop:step) or a comma list ``"0.7, 0.75"``."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" not in text:
            return [float(x) for x in text.split(",") if x.strip()]
        parts = [float(p) for p in text.split(":")]
    except ValueError as exc:
        raise SpecError(f"bad grid {text!r}: {exc}") from exc
    if len(parts) != 3 or not parts[2] > 0 or parts[1] < parts[0]:
        raise SpecError(f"bad grid {text!r}; use start:stop:step with stop >= start and step > 0")
    start, stop, step = parts
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    # round to the step's decimals so 52.7 stays 52.7
    digits = max(0, -math.floor(math.log10(step)) + 2)
    return [round(start + i * step, digits) for i in range(count)]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise SpecError(f"not a boolean: {text!r}")


def parse_spec_text(text: str, source: str = "<string>") -> ExperimentSpec:
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise SpecError(f"{source}: {exc}") from exc
    for sec in cp.sections():
        if sec not in _KEYS:
            raise SpecError(f"{source}: unknown section [{sec}]")
        extra = set(cp[sec]) - _KEYS[sec]
        if extra:
            raise SpecError(f"{source}: unknown keys {sorted(extra)} in [{sec}]")
    try:
        return _build(cp, source)
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"{source}: {exc}") from exc


def _build(cp: configparser.ConfigParser, source: str) -> ExperimentSpec:
    if "model" not in cp or "spec" not in cp["model"]:
        raise SpecError(f"{source}: [model] spec is required")
    model = parse_model(cp["model"]["spec"])
    mk = cp["market"] if "market" in cp else {}
    lam = float(mk.get("lambda", 1.0))
    eta = float(mk.get("eta", 1.0))
    params = MarketParams(
        lambda_b=float(mk.get("lambda_b", lam)),
        lambda_s=float(mk.get("lambda_s", lam)),
        eta_b=float(mk.get("eta_b", eta)),
        eta_s=float(mk.get("eta_s", eta)),
        n=int(mk.get("n", 1000)),
    )
    spec = ExperimentSpec(model=model, params=params, source=source)
    if "policy" in cp:
        spec.policy = parse_policy(cp["policy"].get("spec", ""))
    if "simulation" in cp:
        s = cp["simulation"]
        spec.horizon = float(s.get("horizon", spec.horizon))
        spec.warmup = float(s.get("warmup", spec.warmup))
        spec.replications = int(s.get("replications", spec.replications))
        spec.base_seed = int(s.get("base_seed", spec.base_seed))
        if "initial_buyers" in s:
            spec.initial_buyers = int(s["initial_buyers"])
        if "initial_sellers" in s:
            spec.initial_sellers = int(s["initial_sellers"])
        if "probe_level" in s:
            spec.probe_level = float(s["probe_level"])
    if "sweep" in cp:
        s = cp["sweep"]
        spec.grid = parse_grid(s.get("grid", ""))
        targets = [t.strip() for t in s.get("target", "").split(",") if t.strip()]
        for t in targets:
            if t not in ("v_b", "v_s"):
                raise SpecError(f"{source}: sweep target must be v_b or v_s, got {t!r}")
        spec.targets = targets or [None]
        spec.common_random_numbers = _bool(s.get("common_random_numbers", "true"))
    if "fluid" in cp:
        spec.fluid = dict(cp["fluid"])
    if "output" in cp:
        spec.output = cp["output"].get("path")
    return spec


def load_spec(path: str | Path) -> ExperimentSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read spec {p}: {exc}") from exc
    return parse_spec_text(text, source=str(p))


def bundled_spec(name: str) -> ExperimentSpec:
    """One of the spec files shipped in ``dynmatch/configs``."""
    if not name.endswith(".ini"):
        name += ".ini"
    res = resources.files("dynmatch") / "configs" / name
    return parse_spec_text(res.read_text(encoding="utf-8"), source=f"configs/{name}")
