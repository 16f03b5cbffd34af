"""Experiment specifications: INI parsing, validation, and presets.

A config file has an [experiment] section naming the experiment kind plus
one instance section ([ks], [tr] or [linear]).  Keys holding comma
separated lists define sweep dimensions; scalar keys are broadcast.  The
parser fills documented defaults, rejects unknown sections and keys, and
reports the offending line for malformed values.
"""

import configparser
from dataclasses import dataclass, replace
from typing import Optional

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "parse_config",
    "parse_config_text",
    "emit_config",
    "preset",
    "PRESET_NAMES",
]

KINDS = (
    "ks-perturb",
    "ks-scf-errbounds",
    "tr-perturb",
    "tr-scf-errbounds",
    "single-solve",
)

_EXPERIMENT_KEYS = {
    "kind": str,
    "seed": int,
    "samples": int,
    "refine_passes": int,
    "out": str,
    "init": str,
}

# value None marks list-capable keys; sweeps are built from them
_SECTION_KEYS = {
    "ks": {
        "n": int,
        "k": int,
        "h": "float-list",
        "gamma": float,
        "eps1": "float-list",
        "eps2": "float-list",
        "seed": int,
    },
    "tr": {
        "n": int,
        "k": int,
        "beta": "float-list",
        "eps": "float-list",
        "delta_target": "float-list",
        "seed": int,
    },
    "linear": {"n": int, "k": int, "seed": int, "end": str},
}

_DEFAULTS = {
    "experiment": {"seed": 0, "samples": 500, "refine_passes": 1, "init": ""},
    "ks": {"n": 50, "k": 8, "h": (0.05,), "gamma": 1.0,
           "eps1": (0.0,), "eps2": (0.0,), "seed": 0},
    "tr": {"n": 100, "k": 5, "beta": (10.0,), "seed": 0},
    "linear": {"n": 20, "k": 3, "seed": 0, "end": "smallest"},
}

_SECTION_OF_KIND = {
    "ks-perturb": "ks",
    "ks-scf-errbounds": "ks",
    "tr-perturb": "tr",
    "tr-scf-errbounds": "tr",
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully resolved experiment: kind, instance parameters, and sweep.

    params holds the non-swept instance keys; sweep is one dict per point
    with the swept values.  seed is the master seed every per-point stream
    derives from; samples and refine_passes configure the supremum
    estimator.
    """

    kind: str
    section: str
    params: dict
    sweep: tuple
    out: str
    seed: int = 0
    samples: int = 500
    refine_passes: int = 1
    init: str = "default"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.sweep:
            raise ConfigError("sweep is empty")
        if self.init not in ("default", "random"):
            raise ConfigError(f"init must be 'default' or 'random', got {self.init!r}")
        if self.samples < 1:
            raise ConfigError(f"samples must be positive, got {self.samples}")


def _key_line(text: str, section: str, key: str) -> int:
    """Line number of a key within its section, for error messages."""
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
        elif current == section and stripped.split("=")[0].strip() == key:
            return i
    return 0


def _parse_value(raw: str, typ, section: str, key: str, text: str):
    def fail():
        line = _key_line(text, section, key)
        raise ConfigError(
            f"malformed value for {section}.{key} on line {line}: {raw!r}"
        )

    raw = raw.strip()
    if typ == "float-list":
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if not parts:
            fail()
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            fail()
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        fail()
    return raw


def parse_config(path) -> ExperimentSpec:
    """Parse an experiment config file into a validated spec."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def parse_config_text(text: str) -> ExperimentSpec:
    """Parse config text; unknown sections or keys are hard errors."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc

    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    for section in cp.sections():
        if section != "experiment" and section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")

    exp = dict(_DEFAULTS["experiment"])
    for key, raw in cp["experiment"].items():
        if key not in _EXPERIMENT_KEYS:
            line = _key_line(text, "experiment", key)
            raise ConfigError(f"unknown key experiment.{key} on line {line}")
        exp[key] = _parse_value(raw, _EXPERIMENT_KEYS[key], "experiment", key, text)
    if "kind" not in exp:
        raise ConfigError("experiment.kind is required")
    kind = exp["kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")

    section = _SECTION_OF_KIND.get(kind)
    if section is None:
        present = [s for s in _SECTION_KEYS if s in cp]
        if len(present) != 1:
            raise ConfigError(
                "single-solve needs exactly one of [ks], [tr], [linear], "
                f"got {present or 'none'}"
            )
        section = present[0]
    elif section not in cp:
        raise ConfigError(f"kind {kind} requires a [{section}] section")

    values = dict(_DEFAULTS[section])
    schema = _SECTION_KEYS[section]
    for key, raw in cp[section].items():
        if key not in schema:
            line = _key_line(text, section, key)
            raise ConfigError(f"unknown key {section}.{key} on line {line}")
        values[key] = _parse_value(raw, schema[key], section, key, text)

    if section == "tr":
        has_eps = "eps" in values
        has_target = "delta_target" in values
        if has_eps and has_target:
            raise ConfigError("tr.eps and tr.delta_target are mutually exclusive")
        if kind == "tr-perturb" and not (has_eps or has_target):
            raise ConfigError("tr-perturb needs tr.eps or tr.delta_target")

    params, sweep = _split_sweep(kind, section, values)
    init = exp["init"] or ("random" if kind.endswith("errbounds") else "default")
    return ExperimentSpec(
        kind=kind,
        section=section,
        params=params,
        sweep=sweep,
        out=exp.get("out", f"{kind}.csv"),
        seed=exp["seed"],
        samples=exp["samples"],
        refine_passes=exp["refine_passes"],
        init=init,
    )


def _broadcast(name_a, a, name_b, b):
    if len(a) == len(b):
        return a, b
    if len(a) == 1:
        return a * len(b), b
    if len(b) == 1:
        return a, b * len(a)
    raise ConfigError(
        f"{name_a} and {name_b} lists must match in length, "
        f"got {len(a)} and {len(b)}"
    )


def _split_sweep(kind: str, section: str, values: dict):
    """Separate fixed instance parameters from the sweep points.

    ks-perturb crosses h with zipped (eps1, eps2); tr-perturb crosses beta
    with eps or delta_target; the errbound kinds sweep h or beta alone.
    Every kind yields at least one point.
    """
    v = dict(values)
    if kind == "ks-perturb":
        eps1, eps2 = _broadcast("ks.eps1", v.pop("eps1"), "ks.eps2", v.pop("eps2"))
        hs = v.pop("h")
        sweep = tuple(
            {"h": h, "eps1": e1, "eps2": e2}
            for h in hs
            for e1, e2 in zip(eps1, eps2)
        )
        return v, sweep
    if kind == "ks-scf-errbounds":
        hs = v.pop("h")
        v.pop("eps1", None), v.pop("eps2", None)
        return v, tuple({"h": h} for h in hs)
    if kind == "tr-perturb":
        betas = v.pop("beta")
        if "delta_target" in v:
            key, mags = "delta_target", v.pop("delta_target")
        else:
            key, mags = "eps", v.pop("eps")
        sweep = tuple({key: m, "beta": b} for m in mags for b in betas)
        return v, sweep
    if kind == "tr-scf-errbounds":
        betas = v.pop("beta")
        v.pop("eps", None), v.pop("delta_target", None)
        return v, tuple({"beta": b} for b in betas)
    # single-solve: everything is fixed, one point
    for key in ("h", "eps1", "eps2", "beta", "eps", "delta_target"):
        if key in v and isinstance(v[key], tuple):
            if len(v[key]) != 1:
                raise ConfigError(f"single-solve takes scalar {section}.{key}")
            v[key] = v[key][0]
    return v, ({},)


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(x)) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(spec: ExperimentSpec) -> str:
    """Render a spec back to config text; parse_config_text inverts this."""
    lines = [
        "[experiment]",
        f"kind = {spec.kind}",
        f"seed = {spec.seed}",
        f"samples = {spec.samples}",
        f"refine_passes = {spec.refine_passes}",
        f"init = {spec.init}",
        f"out = {spec.out}",
        "",
        f"[{spec.section}]",
    ]
    merged = dict(spec.params)
    for key in _sweep_keys(spec):
        merged[key] = tuple(point[key] for point in spec.sweep)
    if spec.kind == "ks-perturb":
        # undo the eps1/eps2 zip so the lists read as written
        merged["h"] = tuple(dict.fromkeys(merged["h"]))
        block = len(spec.sweep) // len(merged["h"])
        merged["eps1"] = merged["eps1"][:block]
        merged["eps2"] = merged["eps2"][:block]
    elif spec.kind == "tr-perturb":
        merged["beta"] = tuple(dict.fromkeys(merged["beta"]))
        for key in ("eps", "delta_target"):
            if key in merged:
                merged[key] = tuple(dict.fromkeys(merged[key]))
    for key in sorted(merged):
        lines.append(f"{key} = {_fmt(merged[key])}")
    lines.append("")
    return "\n".join(lines)


def _sweep_keys(spec: ExperimentSpec):
    return tuple(spec.sweep[0].keys()) if spec.sweep and spec.sweep[0] else ()


_PRESETS = {
    "table1": """\
[experiment]
kind = ks-perturb
out = table1.csv

[ks]
n = 50
k = 8
h = 0.05, 0.06, 0.07, 0.08
gamma = 1.0
eps1 = 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12
eps2 = 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12
""",
    "table2": """\
[experiment]
kind = tr-perturb
out = table2.csv

[tr]
n = 100
k = 5
beta = 5, 8, 10, 12, 15
delta_target = 1e-12, 1e-6, 1e-4
seed = 0
""",
    "table3": """\
[experiment]
kind = tr-scf-errbounds
out = table3.csv

[tr]
n = 100
k = 5
beta = 5, 10, 15
seed = 0
""",
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str, seed: Optional[int] = None,
           samples: Optional[int] = None, out: Optional[str] = None) -> ExperimentSpec:
    """Build one of the shipped experiment presets, with optional overrides."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}, expected one of {PRESET_NAMES}")
    spec = parse_config_text(_PRESETS[name])
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if samples is not None:
        updates["samples"] = samples
    if out is not None:
        updates["out"] = out
    return replace(spec, **updates) if updates else spec
