"""YAML configuration: schema, loading, and the artifact digest.

One file describes a run end to end: the system (from the rhs catalogue),
the initial segment, the stability certificate, declared bounds, and the
abstraction/validation options.  Seeds are mandatory: every sampled
procedure must be reproducible from the file alone.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
import yaml

from .certificates import (
    DeltaIssCertificate,
    KFunction,
    KLFunction,
    halanay_rate,
)
from .errors import ConfigError
from .system import RhsSpec, StateFunction, TimeDelaySystem

SCHEMA_VERSION = 1

_DIGEST_SECTIONS = ("system", "initial", "certificate", "bounds", "abstraction")


@dataclass
class LoadedConfig:
    raw: dict
    sys: TimeDelaySystem
    cert: DeltaIssCertificate
    xi0_spec: dict
    b_j: float
    seed: int
    epsilon: float
    refine: int
    min_per_cell: int
    tau_grid_div: int
    overrides: dict
    validation: dict
    probes: dict

    def xi0(self, count: int) -> StateFunction:
        return build_initial(self.xi0_spec, self.sys, count)

    @property
    def xi0_curvature(self) -> float:
        return float(self.xi0_spec.get("curvature", 0.0))

    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    """Stable hash of the sections that determine the built artifact."""
    payload = {k: raw.get(k) for k in _DIGEST_SECTIONS}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      default=float)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing key {key!r} in section {where!r}")
    return section[key]


def build_system(raw: dict) -> TimeDelaySystem:
    sec = _need(raw, "system", "<top>")
    kind = _need(sec, "kind", "system")
    state_box = np.asarray(_need(sec, "state_box", "system"), dtype=float)
    input_box = np.asarray(_need(sec, "input_box", "system"), dtype=float)
    n, m = state_box.shape[0], input_box.shape[0]
    if kind == "linear":
        rhs = RhsSpec.linear(sec["a0"], sec["a1"], sec["b"])
    elif kind == "tanh":
        rhs = RhsSpec.tanh(sec["a0"], sec["a1"], sec["b"])
    elif kind == "polynomial":
        terms = [(t["out"], t["coef"], t["powers"]) for t in sec["terms"]]
        rhs = RhsSpec.polynomial(n, m, terms)
    else:
        raise ConfigError(f"unknown system kind {kind!r}")
    return TimeDelaySystem(
        delta=float(_need(sec, "delta", "system")),
        r=float(sec.get("input_delay", 0.0)),
        rhs=rhs,
        state_box=state_box,
        input_box=input_box,
        kappa=float(_need(sec, "kappa", "system")),
        embed_inflation=float(sec.get("embed_inflation", 1.25)),
    )


def build_initial(spec: dict, sys: TimeDelaySystem, count: int) -> StateFunction:
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return StateFunction.constant(np.asarray(spec.get("value", [0.0] * sys.n),
                                                 dtype=float),
                                      sys.delta, count)
    if kind == "kink":
        va, vm, vb = (np.atleast_1d(np.asarray(v, dtype=float))
                      for v in spec["values"])
        pos = float(spec.get("position", 0.5))

        def fn(t):
            fr = (t + sys.delta) / sys.delta
            if fr <= pos:
                w = fr / pos if pos > 0 else 1.0
                return (1 - w) * va + w * vm
            w = (fr - pos) / (1 - pos)
            return (1 - w) * vm + w * vb

        return StateFunction.from_callable(fn, sys.delta, count)
    if kind == "samples":
        samples = np.asarray(spec["samples"], dtype=float)
        base = StateFunction(samples, sys.delta / (samples.shape[0] - 1))
        if samples.shape[0] == count:
            return base
        return StateFunction.from_callable(base.value, sys.delta, count)
    raise ConfigError(f"unknown initial kind {kind!r}")


def build_certificate(raw: dict, sys: TimeDelaySystem) -> DeltaIssCertificate:
    sec = _need(raw, "certificate", "<top>")
    bspec = _need(sec, "beta", "certificate")
    bkind = bspec.get("kind", "exp")
    if bkind == "halanay":
        rhs = sys.rhs
        if not (isinstance(rhs, RhsSpec) and rhs.a0.shape == (1, 1)
                and rhs.kind == 0):
            raise ConfigError("halanay beta needs the scalar linear catalogue "
                              "system")
        a = -float(rhs.a0[0, 0])
        b = abs(float(rhs.a1[0, 0]))
        sigma = halanay_rate(a, b, sys.delta)
        pad = float(bspec.get("pad", 1.0))
        beta = KLFunction(C=pad * math.exp(sigma * sys.delta), sigma=sigma)
        default_gamma = KFunction(c=1.0 / (a - b))
    elif bkind == "exp":
        beta = KLFunction(C=float(_need(bspec, "C", "beta")),
                          sigma=float(_need(bspec, "sigma", "beta")))
        default_gamma = None
    else:
        raise ConfigError(f"unknown beta kind {bkind!r}")
    gspec = sec.get("gamma")
    if gspec is None:
        if default_gamma is None:
            raise ConfigError("certificate.gamma is required unless beta is "
                              "halanay")
        gamma = default_gamma
    else:
        gamma = KFunction(c=float(_need(gspec, "gain", "gamma")),
                          exponent=float(gspec.get("exponent", 1.0)))
    return DeltaIssCertificate(beta=beta, gamma=gamma)


def load_config(path) -> LoadedConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    if int(raw.get("version", 0)) != SCHEMA_VERSION:
        raise ConfigError(f"config version must be {SCHEMA_VERSION}")
    if "seed" not in raw:
        raise ConfigError("a top-level seed is mandatory")

    sys_ = build_system(raw)
    cert = build_certificate(raw, sys_)
    absec = raw.get("abstraction", {})
    bounds = raw.get("bounds", {})
    overrides = {k: absec[k] for k in ("tau", "N", "theta", "lambda_u")
                 if absec.get(k) is not None}
    return LoadedConfig(
        raw=raw,
        sys=sys_,
        cert=cert,
        xi0_spec=raw.get("initial", {"kind": "constant"}),
        b_j=float(_need(bounds, "B_J", "bounds")),
        seed=int(raw["seed"]),
        epsilon=float(_need(absec, "epsilon", "abstraction")),
        refine=int(absec.get("refine", 4)),
        min_per_cell=int(absec.get("min_substeps_per_cell", 2)),
        tau_grid_div=int(absec.get("tau_grid_div", 10)),
        overrides=overrides,
        validation=raw.get("validation", {"words": 100, "word_length": 10}),
        probes=raw.get("probes", {"count": 200, "horizon_steps": 10}),
    )
