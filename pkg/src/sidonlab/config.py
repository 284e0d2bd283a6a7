"""Config ingestion and CSV emission for the command-line harnesses.

Configs are JSON; schemas are closed (unknown keys rejected).  Every CSV
report starts with provenance comment lines carrying the config hash and
tool version, so identical config+seed reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
from fractions import Fraction
from pathlib import Path

from . import __version__
from .construction import ConstructionSpec, LevelSet, SpecValidationError
from .poisson import CountEvent
from .sidon import PsiSpec, build_from_psi


class ConfigError(ValueError):
    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field


def _require_keys(d: dict, required: set[str], optional: set[str], where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object", where)
    missing = required - d.keys()
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}", where)
    unknown = d.keys() - required - optional
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}", where)


def load_config(path: str) -> tuple[dict, str]:
    """Parse a JSON config; returns (config, sha256 of the raw bytes)."""
    raw = Path(path).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON at line {e.lineno} col {e.colno}: {e.msg}")
    if not isinstance(cfg, dict):
        raise ConfigError("top-level config must be an object")
    return cfg, digest


def parse_psi(d: dict) -> PsiSpec:
    _require_keys(d, {"kind"}, {"alpha", "base", "table"}, "psi")
    return PsiSpec.from_dict(d)


def parse_construction(d: dict, depth_hint: int | None = None):
    """Explicit stages or a generator reference.  Returns
    (ConstructionSpec, generator ledger rows or None, PsiSpec or None)."""
    if "generator" in d:
        _require_keys(d, {"generator"}, {"h1"}, "construction")
        g = d["generator"]
        _require_keys(g, {"type", "psi", "numStages"}, {"sets"}, "construction.generator")
        if g["type"] != "optimal-sidon":
            raise ConfigError(
                f"unknown generator type {g['type']!r}", "construction.generator.type"
            )
        psi = parse_psi(g["psi"])
        num = g["numStages"]
        if not isinstance(num, int) or num < 2:
            raise ConfigError("numStages must be an integer >= 2",
                              "construction.generator.numStages")
        sets = g.get("sets", "singer")
        if sets not in ("singer", "greedy"):
            raise ConfigError(f"unknown set generator {sets!r}",
                              "construction.generator.sets")
        h1 = d.get("h1", 1)
        spec, ledger = build_from_psi(psi, h1, num, sets)
        return spec, ledger, psi
    _require_keys(d, {"h1", "stages"}, set(), "construction")
    try:
        spec = ConstructionSpec.from_dict(d)
    except (SpecValidationError, TypeError, KeyError) as e:
        raise ConfigError(f"invalid construction: {e}", "construction") from e
    return spec, None, None


def parse_level_set(d: dict, where: str = "set") -> LevelSet:
    _require_keys(d, {"stage", "ranges"}, set(), where)
    try:
        return LevelSet.from_ranges(d["stage"], [tuple(r) for r in d["ranges"]])
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{where}: {e}", where) from e


def parse_event(d: dict, where: str = "event") -> CountEvent:
    _require_keys(d, {"set", "count"}, {"shift"}, where)
    return CountEvent(
        parse_level_set(d["set"], where + ".set"), d["count"], d.get("shift", 0)
    )


def parse_epsilon(cfg: dict, args=None) -> Fraction | None:
    if args is not None and getattr(args, "epsilon_num", None) is not None:
        return Fraction(args.epsilon_num, args.epsilon_den or 1)
    if "epsilon" in cfg:
        e = cfg["epsilon"]
        _require_keys(e, {"num", "den"}, set(), "epsilon")
        return Fraction(e["num"], e["den"])
    return None


# ---------------------------------------------------------------------------
# CSV output


def frac_cols(name: str) -> list[str]:
    return [f"{name}_num", f"{name}_den", name]


def frac_vals(x) -> list:
    f = Fraction(x)
    return [f.numerator, f.denominator, float(f)]


def write_csv(path, header: list[str], rows: list[list], digest: str):
    """RFC-4180 body preceded by provenance comments; written atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={digest}\n")
        fh.write(f"# tool_version={__version__}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    tmp.replace(path)
