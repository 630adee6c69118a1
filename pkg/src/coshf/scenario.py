"""Mission scenarios: ground users, eavesdropper, UAV endpoints and radio parameters.

All internal values are linear SI units (meters, seconds, watts). Config
documents may carry dB / dBm / mW suffixed keys; they are converted on load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "Scenario",
    "ScenarioError",
    "db_to_linear",
    "dbm_to_watt",
    "load_scenario",
    "serialize_scenario",
    "save_scenario",
    "random_scenario",
    "default_scenario",
]


class ScenarioError(ValueError):
    """Raised for malformed or physically inconsistent scenario data."""


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** (x_dbm / 10.0) * 1e-3


def _as_point(value, key: str) -> np.ndarray:
    p = np.asarray(value, dtype=float)
    if p.shape != (2,):
        raise ScenarioError(f"{key}: expected a planar point, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ScenarioError(f"non-finite value: {key}")
    return p


@dataclass(frozen=True)
class Scenario:
    """Immutable mission description.

    Positions are horizontal coordinates in meters; both UAVs fly at the
    fixed altitude ``alt``. ``N`` is the number of turning points inserted
    on each inter-hover flight leg.
    """

    K: int
    gu_pos: np.ndarray          # (K, 2) m
    eve_pos: np.ndarray         # (2,) m
    alt: float                  # m
    T: float                    # s
    V: float                    # m/s
    d_min: float                # m
    P_S: float                  # W
    P_J: float                  # W
    beta0: float                # linear power gain at 1 m
    sigma2_gu: float            # W
    sigma2_eve: float           # W
    start_S: np.ndarray         # (2,) m
    end_S: np.ndarray           # (2,) m
    start_J: np.ndarray         # (2,) m
    end_J: np.ndarray           # (2,) m
    N: int = 1

    def __post_init__(self):
        gu = np.asarray(self.gu_pos, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "gu_pos", gu)
        for name in ("eve_pos", "start_S", "end_S", "start_J", "end_J"):
            object.__setattr__(self, name, _as_point(getattr(self, name), name))
        for arr in (self.gu_pos, self.eve_pos, self.start_S, self.end_S,
                    self.start_J, self.end_J):
            arr.flags.writeable = False
        self._validate()

    def _validate(self) -> None:
        if self.K < 1:
            raise ScenarioError("invariant violated: K >= 1")
        if self.gu_pos.shape != (self.K, 2):
            raise ScenarioError(
                f"gu_pos must have shape ({self.K}, 2), got {self.gu_pos.shape}")
        if not np.all(np.isfinite(self.gu_pos)):
            raise ScenarioError("non-finite value: gu_pos")
        scalars = dict(T=self.T, V=self.V, alt=self.alt, beta0=self.beta0,
                       sigma2_gu=self.sigma2_gu, sigma2_eve=self.sigma2_eve,
                       P_S=self.P_S, P_J=self.P_J, d_min=self.d_min)
        for k, v in scalars.items():
            if not math.isfinite(v):
                raise ScenarioError(f"non-finite value: {k}")
        for k in ("T", "V", "alt", "beta0", "sigma2_gu", "sigma2_eve"):
            if scalars[k] <= 0:
                raise ScenarioError(f"invariant violated: {k} > 0")
        for k in ("P_S", "P_J", "d_min"):
            if scalars[k] < 0:
                raise ScenarioError(f"invariant violated: {k} >= 0")
        if self.N < 0:
            raise ScenarioError("invariant violated: N >= 0")
        if float(np.linalg.norm(self.start_S - self.start_J)) < self.d_min:
            raise ScenarioError("initial separation below d_min")
        if float(np.linalg.norm(self.end_S - self.end_J)) < self.d_min:
            raise ScenarioError("final separation below d_min")
        reach = max(float(np.linalg.norm(self.end_S - self.start_S)),
                    float(np.linalg.norm(self.end_J - self.start_J))) / self.V
        if self.T < reach:
            raise ScenarioError(
                f"invariant violated: T >= {reach:.3f} s needed to reach end points")

    # -- convenience -------------------------------------------------------

    @property
    def alt2(self) -> float:
        return self.alt * self.alt

    def with_(self, **changes) -> "Scenario":
        """Copy with fields replaced (re-validates)."""
        return replace(self, **changes)

    def node_pos(self, m) -> np.ndarray:
        """Position of ground node ``m``: a user index or ``'e'`` for Eve."""
        if m == "e":
            return self.eve_pos
        return self.gu_pos[int(m)]

    def node_sigma2(self, m) -> float:
        return self.sigma2_eve if m == "e" else self.sigma2_gu

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        if (self.K, self.N) != (other.K, other.N):
            return False
        for name in ("alt", "T", "V", "d_min", "P_S", "P_J", "beta0",
                     "sigma2_gu", "sigma2_eve"):
            if getattr(self, name) != getattr(other, name):
                return False
        for name in ("gu_pos", "eve_pos", "start_S", "end_S", "start_J", "end_J"):
            if not np.array_equal(getattr(self, name), getattr(other, name)):
                return False
        return True

    __hash__ = None


# -- config documents ------------------------------------------------------

_REQUIRED = ("K", "T", "V", "d_min", "alt", "P_S", "P_J", "beta0",
             "sigma2_gu", "sigma2_eve", "gu_pos", "eve_pos",
             "start_S", "end_S", "start_J", "end_J")

# canonical key and accepted (alternate key, converter) pairs
_SCALAR_KEYS = {
    "T": (("T_s", float),),
    "V": (("V_mps", float),),
    "d_min": (("d_min_m", float),),
    "alt": (("alt_m", float),),
    "P_S": (("P_S_W", float), ("P_S_mW", lambda x: float(x) * 1e-3)),
    "P_J": (("P_J_W", float), ("P_J_mW", lambda x: float(x) * 1e-3)),
    "beta0": (("beta0", float), ("beta0_dB", db_to_linear)),
    "sigma2_gu": (("sigma2_gu_W", float), ("sigma2_gu_dBm", dbm_to_watt)),
    "sigma2_eve": (("sigma2_eve_W", float), ("sigma2_eve_dBm", dbm_to_watt)),
}
_POINT_KEYS = {
    "eve_pos": "eve_pos_m",
    "start_S": "start_S_m",
    "end_S": "end_S_m",
    "start_J": "start_J_m",
    "end_J": "end_J_m",
}


def _parse_document(text: str) -> dict:
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    doc = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"cannot parse config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            doc[key] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"cannot parse value for {key}: {value!r}") from exc
    return doc


def load_scenario(source) -> Scenario:
    """Build a Scenario from a config document.

    ``source`` may be a dict, a path to a UTF-8 document, or the document
    text itself (JSON object or ``key = value`` lines). dB-valued keys
    (``beta0_dB``, ``*_dBm``, ``*_mW``) are converted to linear SI.
    """
    if isinstance(source, Scenario):
        return source
    if isinstance(source, dict):
        doc = dict(source)
    else:
        if isinstance(source, Path) or (isinstance(source, str)
                                        and "\n" not in source
                                        and "=" not in source
                                        and not source.lstrip().startswith("{")):
            doc = _parse_document(Path(source).read_text(encoding="utf-8"))
        else:
            doc = _parse_document(str(source))

    fields: dict = {}
    if "noise_dBm" in doc:  # shorthand setting both receiver noise powers
        doc.setdefault("sigma2_gu_dBm", doc["noise_dBm"])
        doc.setdefault("sigma2_eve_dBm", doc["noise_dBm"])
    for canon, alternates in _SCALAR_KEYS.items():
        if canon in doc:
            fields[canon] = float(doc[canon])
            continue
        for alt_key, conv in alternates:
            if alt_key in doc:
                fields[canon] = conv(doc[alt_key])
                break
    for canon, alt_key in _POINT_KEYS.items():
        if canon in doc:
            fields[canon] = doc[canon]
        elif alt_key in doc:
            fields[canon] = doc[alt_key]
    if "gu_pos" in doc:
        fields["gu_pos"] = doc["gu_pos"]
    elif "gu_pos_m" in doc:
        fields["gu_pos"] = doc["gu_pos_m"]
    if "K" in doc:
        fields["K"] = int(doc["K"])
    fields["N"] = int(doc.get("N", 1))

    missing = [k for k in _REQUIRED if k not in fields]
    if missing:
        raise ScenarioError(f"missing key: {', '.join(missing)}")
    return Scenario(
        K=fields["K"],
        gu_pos=np.asarray(fields["gu_pos"], dtype=float),
        eve_pos=fields["eve_pos"],
        alt=fields["alt"],
        T=fields["T"],
        V=fields["V"],
        d_min=fields["d_min"],
        P_S=fields["P_S"],
        P_J=fields["P_J"],
        beta0=fields["beta0"],
        sigma2_gu=fields["sigma2_gu"],
        sigma2_eve=fields["sigma2_eve"],
        start_S=fields["start_S"],
        end_S=fields["end_S"],
        start_J=fields["start_J"],
        end_J=fields["end_J"],
        N=fields["N"],
    )


def serialize_scenario(sc: Scenario) -> str:
    """Canonical JSON document; linear SI keys so round trips are exact."""
    doc = {
        "K": sc.K,
        "N": sc.N,
        "T_s": sc.T,
        "V_mps": sc.V,
        "d_min_m": sc.d_min,
        "alt_m": sc.alt,
        "P_S_W": sc.P_S,
        "P_J_W": sc.P_J,
        "beta0": sc.beta0,
        "sigma2_gu_W": sc.sigma2_gu,
        "sigma2_eve_W": sc.sigma2_eve,
        "gu_pos_m": sc.gu_pos.tolist(),
        "eve_pos_m": sc.eve_pos.tolist(),
        "start_S_m": sc.start_S.tolist(),
        "end_S_m": sc.end_S.tolist(),
        "start_J_m": sc.start_J.tolist(),
        "end_J_m": sc.end_J.tolist(),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(serialize_scenario(sc), encoding="utf-8")


def random_scenario(seed: int, K: int = 4, area: float = 500.0, **overrides) -> Scenario:
    """Scenario with users and Eve placed uniformly in an ``area`` x ``area`` square.

    The radio and mission parameters default to the standard benchmark
    setting (T=150 s, V=10 m/s, d_min=3 m, P_S=10 mW, P_J=1 mW,
    beta0=-30 dB, noise -80 dBm, altitude 100 m); UAV start/end points sit
    at the square's corners. Deterministic for a fixed seed.
    """
    if area <= 0:
        raise ScenarioError("invariant violated: area > 0")
    rng = np.random.default_rng(seed)
    gu = rng.uniform(0.0, area, size=(K, 2))
    eve = rng.uniform(0.0, area, size=2)
    params = dict(
        K=K,
        gu_pos=gu,
        eve_pos=eve,
        alt=100.0,
        T=150.0,
        V=10.0,
        d_min=3.0,
        P_S=10e-3,
        P_J=1e-3,
        beta0=db_to_linear(-30.0),
        sigma2_gu=dbm_to_watt(-80.0),
        sigma2_eve=dbm_to_watt(-80.0),
        start_S=np.array([0.9 * area, 0.9 * area]),
        end_S=np.array([0.9 * area, 0.1 * area]),
        start_J=np.array([0.1 * area, 0.9 * area]),
        end_J=np.array([0.1 * area, 0.1 * area]),
        N=1,
    )
    params.update(overrides)
    return Scenario(**params)


def default_scenario(seed: int = 0) -> Scenario:
    """The K=4 benchmark scenario used throughout the test suite."""
    return random_scenario(seed=seed, K=4, area=500.0)
