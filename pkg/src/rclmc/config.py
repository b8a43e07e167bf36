"""Run configuration: parsing, validation, canonical form and hashing."""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF

METHODS = ("lmc", "rclmc")
TARGETS = ("gaussian", "block_gaussian", "graph", "product", "skewed")
SNAPSHOT_KINDS = ("geometric", "every", "explicit", "cost")
INIT_KINDS = ("point", "normal", "target")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field when known."""

    def __init__(self, message, key=None, path=None, line=None):
        super().__init__(message)
        self.message = message
        self.key = key
        self.path = path
        self.line = line

    def located(self, path, text):
        """Copy of this error with ``path`` and the line of ``key`` in ``text``."""
        line = self.line
        if line is None:
            line = locate_key(text, self.key) if text is not None else None
        return ConfigError(self.message, self.key, path, line or 1)

    def __str__(self):
        if self.path is None:
            return self.message
        return f"{self.path}:{self.line or 1}: {self.message}"


def locate_key(text, key):
    """1-based line of the first occurrence of ``"key"`` in JSON ``text``."""
    if not key:
        return None
    leaf = str(key).split(".")[-1].split("[")[0]
    m = re.search(r'"' + re.escape(leaf) + r'"\s*:', text)
    if m is None:
        return None
    return text.count("\n", 0, m.start()) + 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True,
                      allow_nan=False)


def config_hash(obj) -> str:
    """16 hex digits of FNV-1a/64 over the canonical JSON of ``obj``."""
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    return f"{fnv1a64(canonical_json(obj).encode('utf-8')):016x}"


@dataclass
class RunConfig:
    method: str
    target: dict
    h: float
    M: int
    N: int
    phi: str = "uniform"
    seed: int = 0
    init: object = "standard"
    observables: list = field(default_factory=lambda: [{"second_moment": True}])
    snapshots: dict = field(default_factory=lambda: {"geometric": 1.3})
    reference: float | None = None
    label: str | None = None

    def to_dict(self):
        out = {
            "method": self.method,
            "target": copy.deepcopy(self.target),
            "phi": self.phi,
            "h": self.h,
            "M": self.M,
            "N": self.N,
            "seed": self.seed,
            "init": copy.deepcopy(self.init),
            "observables": copy.deepcopy(self.observables),
            "snapshots": copy.deepcopy(self.snapshots),
        }
        if self.reference is not None:
            out["reference"] = self.reference
        if self.label is not None:
            out["label"] = self.label
        return out

    def to_json(self):
        return canonical_json(self.to_dict())

    @property
    def hash(self):
        return config_hash(self)

    @classmethod
    def from_dict(cls, d):
        return parse_config(d)

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return parse_config(d)

    @property
    def error_observable(self):
        """The observable whose error is reported in output tables."""
        for obs in self.observables:
            (name, _), = obs.items()
            if name != "mean":
                return obs
        raise ConfigError("no scalar observable to report", "observables")


def _number(d, key, kind, positive=True, allow_zero=False):
    if key not in d:
        raise ConfigError(f"missing required field '{key}'", key)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {v!r}", key)
    if kind is int:
        if isinstance(v, float):
            if not v.is_integer():
                raise ConfigError(f"'{key}' must be an integer, got {v!r}", key)
            v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"'{key}' must be finite", key)
    if positive and not (v > 0 or (allow_zero and v == 0)):
        what = "non-negative" if allow_zero else "positive"
        raise ConfigError(f"'{key}' must be {what}, got {v!r}", key)
    return v


def _vector(v, key):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                          for x in v):
        raise ConfigError(f"'{key}' must be a number or a list of numbers", key)
    return [float(x) for x in v]


def _parse_init(v):
    if v is None or v == "standard":
        return "standard"
    if not isinstance(v, dict) or len(v) != 1:
        raise ConfigError("'init' must be \"standard\" or an object with exactly one of "
                          + ", ".join(INIT_KINDS), "init")
    (kind, arg), = v.items()
    if kind == "point":
        return {"point": _vector(arg, "point")}
    if kind == "normal":
        if not isinstance(arg, dict) or not set(arg) <= {"mean", "scale"}:
            raise ConfigError("'normal' takes an object with 'mean' and 'scale'", "normal")
        scale = _number({"scale": arg.get("scale", 1.0)}, "scale", float)
        return {"normal": {"mean": _vector(arg.get("mean", 0.0), "mean"), "scale": scale}}
    if kind == "target":
        if not isinstance(arg, dict) or not set(arg) <= {"shift"}:
            raise ConfigError("'target' init takes an object with optional 'shift'", "target")
        return {"target": {"shift": _vector(arg.get("shift", 0.0), "shift")}}
    raise ConfigError(f"unknown init kind {kind!r}; expected one of {', '.join(INIT_KINDS)}",
                      "init")


def _parse_observables(v):
    if not isinstance(v, list) or not v:
        raise ConfigError("'observables' must be a non-empty list", "observables")
    out = []
    for obs in v:
        if isinstance(obs, str):
            obs = {obs: True}
        if not isinstance(obs, dict) or len(obs) != 1:
            raise ConfigError(f"bad observable {obs!r}", "observables")
        (name, arg), = obs.items()
        if name == "psi_spectral":
            k = _number({"psi_spectral": arg}, "psi_spectral", int)
            out.append({"psi_spectral": k})
        elif name in ("second_moment", "mean"):
            out.append({name: True})
        else:
            raise ConfigError(f"unknown observable {name!r}; expected psi_spectral, "
                              "second_moment or mean", "observables")
    return out


def _parse_snapshots(v):
    if not isinstance(v, dict) or len(v) != 1:
        raise ConfigError("'snapshots' must be an object with exactly one of "
                          + ", ".join(SNAPSHOT_KINDS), "snapshots")
    (kind, arg), = v.items()
    if kind == "geometric":
        r = _number({"geometric": arg}, "geometric", float)
        if not r > 1:
            raise ConfigError("geometric ratio must exceed 1", "geometric")
        return {"geometric": r}
    if kind == "every":
        return {"every": _number({"every": arg}, "every", int)}
    if kind in ("explicit", "cost"):
        if not isinstance(arg, list) or not arg:
            raise ConfigError(f"'{kind}' must be a non-empty list of integers", kind)
        vals = [_number({kind: x}, kind, int, allow_zero=True) for x in arg]
        return {kind: sorted(set(vals))}
    raise ConfigError(f"unknown snapshot schedule {kind!r}", "snapshots")


_PHI_RE = re.compile(r"^(uniform|hessian-opt|alpha:[-+0-9.eE]+|explicit:\[.*\])$")


def parse_config(d):
    """Validate a configuration mapping and return a canonical :class:`RunConfig`."""
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {"method", "target", "phi", "h", "M", "N", "seed", "init", "observables",
             "snapshots", "reference", "label"}
    for key in d:
        if key not in known:
            raise ConfigError(f"unknown field '{key}'", key)
    method = d.get("method")
    if method not in METHODS:
        raise ConfigError(f"'method' must be one of {', '.join(METHODS)}, got {method!r}",
                          "method")
    target = d.get("target")
    if isinstance(target, str):
        target = {"name": target}
    if not isinstance(target, dict) or target.get("name") not in TARGETS:
        raise ConfigError(f"'target' must name one of {', '.join(TARGETS)}", "target")
    phi = d.get("phi", "uniform")
    if not isinstance(phi, str) or not _PHI_RE.match(phi.strip()):
        raise ConfigError(f"unparseable phi spec {phi!r}", "phi")
    if phi.startswith("alpha:"):
        try:
            float(phi[6:])
        except ValueError:
            raise ConfigError(f"unparseable phi spec {phi!r}", "phi") from None
    h = _number(d, "h", float)
    M = _number(d, "M", int, allow_zero=True)
    N = _number(d, "N", int)
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MASK64:
        raise ConfigError(f"'seed' must be an unsigned 64-bit integer, got {seed!r}", "seed")
    reference = d.get("reference")
    if reference is not None:
        reference = _number(d, "reference", float, positive=False)
    label = d.get("label")
    if label is not None and not isinstance(label, str):
        raise ConfigError("'label' must be a string", "label")
    return RunConfig(
        method=method,
        target=copy.deepcopy(target),
        phi=phi.strip(),
        h=h,
        M=M,
        N=N,
        seed=seed,
        init=_parse_init(d.get("init", "standard")),
        observables=_parse_observables(d.get("observables", [{"second_moment": True}])),
        snapshots=_parse_snapshots(d.get("snapshots", {"geometric": 1.3})),
        reference=reference,
        label=label,
    )


def _load(text, path):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None


def load_config(path):
    """Read and validate a single-run configuration file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    raw = _load(text, path)
    try:
        return parse_config(raw)
    except ConfigError as exc:
        raise exc.located(path, text) from None


def parse_benchmark(raw):
    """Expand ``{"base": {...}, "runs": [{...}, ...]}`` (or a bare list) into configs."""
    if isinstance(raw, list):
        base, runs = {}, raw
    elif isinstance(raw, dict) and "runs" in raw:
        base, runs = raw.get("base", {}), raw["runs"]
        extra = set(raw) - {"base", "runs"}
        if extra:
            raise ConfigError(f"unknown field '{sorted(extra)[0]}'", sorted(extra)[0])
    else:
        raise ConfigError("benchmark configuration needs a 'runs' list", "runs")
    if not isinstance(runs, list) or not runs:
        raise ConfigError("'runs' must be a non-empty list", "runs")
    configs = []
    for i, run in enumerate(runs):
        if not isinstance(run, dict):
            raise ConfigError(f"run {i} must be an object", "runs")
        merged = copy.deepcopy(base)
        merged.update(run)
        merged.setdefault("label", f"run{i}")
        configs.append(parse_config(merged))
    labels = [c.label for c in configs]
    if len(set(labels)) != len(labels):
        raise ConfigError("run labels must be unique", "label")
    return configs


def load_benchmark(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    raw = _load(text, path)
    if isinstance(raw, dict) and "runs" not in raw:
        try:
            return [parse_config(raw)]
        except ConfigError as exc:
            raise exc.located(path, text) from None
    try:
        return parse_benchmark(raw)
    except ConfigError as exc:
        raise exc.located(path, text) from None
