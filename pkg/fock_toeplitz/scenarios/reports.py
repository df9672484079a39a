"""Scenario reports: scalar tables, ratio tables, threshold flags and provenance."""

import json
import logging
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

import numpy as np
import scipy

from .. import __version__
from ..errors import ConfigError

logger = logging.getLogger(__name__)

REPORT_FORMAT = "fock-toeplitz-report"


def jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become strings so the output stays strict JSON."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    return value


@dataclass(frozen=True)
class RatioEntry:
    """One equivalence-constant estimate tracked over a sweep."""

    values: tuple

    @property
    def minimum(self) -> float:
        return float(np.min(self.values))

    @property
    def maximum(self) -> float:
        return float(np.max(self.values))

    @property
    def median(self) -> float:
        return float(np.median(self.values))

    @property
    def spread(self) -> float:
        """max / min; inf when the sweep hits zero."""
        lo = self.minimum
        return self.maximum / lo if lo > 0 else math.inf

    def as_dict(self) -> dict:
        return {
            "min": self.minimum,
            "median": self.median,
            "max": self.maximum,
            "spread": self.spread,
            "values": list(self.values),
        }


@dataclass
class Report:
    scenario: str
    tolerances: Mapping[str, float]
    provenance: Dict[str, Any] = field(default_factory=dict)
    scalars: Dict[str, float] = field(default_factory=dict)
    ratios: Dict[str, RatioEntry] = field(default_factory=dict)
    flags: Dict[str, dict] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)

    def scalar(self, name: str, value: float) -> float:
        self.scalars[name] = float(value)
        return float(value)

    def ratio(self, name: str, values: Iterable[float]) -> RatioEntry:
        entry = RatioEntry(tuple(float(v) for v in values))
        if not entry.values:
            raise ValueError(f"ratio {name!r} has no samples")
        self.ratios[name] = entry
        return entry

    def _threshold(self, key: str) -> float:
        if key not in self.tolerances:
            raise ConfigError(f"flag threshold {key!r} is not present in the config tolerances")
        return float(self.tolerances[key])

    def flag_below(self, name: str, value: float, threshold_key: str) -> bool:
        """Pass when value <= tolerances[threshold_key]."""
        threshold = self._threshold(threshold_key)
        passed = bool(value <= threshold)
        self.flags[name] = {"value": float(value), "threshold": threshold_key,
                            "limit": threshold, "passed": passed}
        return passed

    def flag_spread(self, name: str, entry: RatioEntry, threshold_key: str = "ratio_window",
                    widen: float = 1.0) -> bool:
        """Ratio stability: max/min within the configured window times ``widen``."""
        if widen < 1.0:
            raise ValueError(f"window factor for {name!r} must be >= 1, got {widen}")
        threshold = self._threshold(threshold_key) * widen
        passed = bool(entry.spread <= threshold)
        self.flags[name] = {"value": float(entry.spread), "threshold": threshold_key,
                            "limit": threshold, "passed": passed}
        if widen != 1.0:
            self.flags[name]["widen"] = float(widen)
        return passed

    def flag_close(self, name: str, value: float, target: float, threshold_key: str) -> bool:
        """Pass when |value - target| <= tolerances[threshold_key] * max(1, |target|)."""
        gap = abs(value - target) / max(1.0, abs(target))
        threshold = self._threshold(threshold_key)
        passed = bool(gap <= threshold)
        self.flags[name] = {"value": float(value), "target": float(target),
                            "threshold": threshold_key, "limit": threshold, "passed": passed}
        return passed

    def flag_true(self, name: str, value: bool, threshold_key: Optional[str] = None) -> bool:
        entry = {"value": bool(value), "passed": bool(value)}
        if threshold_key is not None:
            entry["threshold"] = threshold_key
            entry["limit"] = self._threshold(threshold_key)
        self.flags[name] = entry
        return bool(value)

    @property
    def passed(self) -> bool:
        return all(f["passed"] for f in self.flags.values())

    @property
    def failed_flags(self) -> list:
        return sorted(name for name, f in self.flags.items() if not f["passed"])

    def as_dict(self) -> dict:
        return jsonable({
            "format": REPORT_FORMAT,
            "scenario": self.scenario,
            "passed": self.passed,
            "scalars": self.scalars,
            "ratios": {k: v.as_dict() for k, v in self.ratios.items()},
            "flags": self.flags,
            "details": self.details,
            "provenance": self.provenance,
        })

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir) / f"{self.scenario}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())
        logger.info("report written: %s", path)
        return path


def provenance(config_hash: str, seed: int) -> Dict[str, Any]:
    return {
        "config_hash": config_hash,
        "seed": seed,
        "versions": {
            "fock_toeplitz": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def new_report(scenario: str, cfg) -> Report:
    return Report(scenario, dict(cfg.tolerances), provenance(cfg.hash, cfg.seed))
