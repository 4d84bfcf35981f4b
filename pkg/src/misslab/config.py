"""Run configuration: JSON documents plus command-line overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .data import KINDS
from .errors import ConfigError, UnknownMethodError
from .estimators.bootstrap import DEFAULT_B
from .estimators.mice import DEFAULT_CYCLES
from .simlab import METHODS, GenConfig, ScenarioSpec, check_methods

DEFAULT_SEED = 20240229
DEFAULT_NS = (230, 400, 1000)
DEFAULT_M = 1000
FIT_METHODS = ("CC", "IPW", "MI5", "MI20", "ML")
SEED_ENV = "MISSLAB_SEED"

_SIM_KEYS = {"mode", "scenario", "n", "M", "seed", "methods", "jobs", "out", "gen",
             "ml_bootstrap", "cycles"}
_FIT_KEYS = {"mode", "data", "response", "predictors", "methods", "bootstrap", "seed", "out",
             "schema", "cycles", "jobs"}
_GEN_KEYS = {"p1", "p2", "normal_params", "beta_true"}


@dataclass(frozen=True)
class RunConfig:
    mode: str = "simulate"
    gen: GenConfig = field(default_factory=GenConfig)
    scenarios: tuple = ()
    methods: tuple = METHODS
    M: int = DEFAULT_M
    ns: tuple = DEFAULT_NS
    base_seed: int = DEFAULT_SEED
    parallelism: int = 1
    out: str | None = None
    ml_bootstrap: int = 0
    cycles: int = DEFAULT_CYCLES
    data: str | None = None
    response: str | None = None
    predictors: tuple = ()
    bootstrap: int = DEFAULT_B
    schema: dict | None = None

    def to_dict(self) -> dict:
        """Echo that :func:`parse_config` reads back into an equal config."""
        if self.mode == "fit":
            return {
                "mode": "fit", "data": self.data, "response": self.response,
                "predictors": list(self.predictors), "methods": list(self.methods),
                "bootstrap": self.bootstrap, "seed": self.base_seed, "cycles": self.cycles,
                "schema": self.schema, "out": self.out,
            }
        return {
            "mode": "simulate",
            "scenario": [{"id": s.id, "a": s.a, "b": s.b} for s in self.scenarios],
            "n": list(self.ns), "M": self.M, "seed": self.base_seed,
            "methods": list(self.methods), "jobs": self.parallelism, "out": self.out,
            "ml_bootstrap": self.ml_bootstrap, "cycles": self.cycles,
            "gen": {
                "p1": self.gen.p1,
                "p2": {str(k): v for k, v in sorted(self.gen.p2.items())},
                "normal_params": {f"{z},{z1}": list(v)
                                  for (z, z1), v in sorted(self.gen.normal_params.items())},
                "beta_true": list(self.gen.beta_true),
            },
        }


def _int(value, key, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise ConfigError(f"{key}: expected an integer, got {value!r}", key)
    try:
        out = int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}", key) from None
    if minimum is not None and out < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {out}", key)
    return out


def _float(value, key):
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}", key)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}", key) from None


def _list(value):
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _scenario(item) -> ScenarioSpec:
    if isinstance(item, str):
        return ScenarioSpec.named(item)
    if isinstance(item, Mapping):
        unknown = set(item) - {"id", "a", "b"}
        if unknown:
            raise ConfigError(f"scenario: unknown key {sorted(unknown)[0]!r}", "scenario")
        if "a" not in item or "b" not in item:
            if "id" in item:
                return ScenarioSpec.named(item["id"])
            raise ConfigError("scenario: custom scenarios need both 'a' and 'b'", "scenario")
        a, b = _float(item["a"], "scenario.a"), _float(item["b"], "scenario.b")
        return ScenarioSpec(str(item.get("id", f"custom({a:g},{b:g})")), a, b)
    if isinstance(item, (list, tuple)) and len(item) == 2:
        a, b = _float(item[0], "scenario"), _float(item[1], "scenario")
        return ScenarioSpec(f"custom({a:g},{b:g})", a, b)
    raise ConfigError(f"scenario: cannot interpret {item!r}", "scenario")


def _scenarios(value) -> tuple:
    if isinstance(value, Mapping):
        return (_scenario(value),)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return (_scenario(value),)
    return tuple(_scenario(v) for v in _list(value))


def _gen(doc: Mapping) -> GenConfig:
    unknown = set(doc) - _GEN_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"gen: unknown key {key!r}", f"gen.{key}")
    kw: dict[str, Any] = {}
    if "p1" in doc:
        kw["p1"] = _float(doc["p1"], "gen.p1")
    if "p2" in doc:
        p2 = doc["p2"]
        if not isinstance(p2, Mapping) or {str(k) for k in p2} != {"0", "1"}:
            raise ConfigError("gen.p2: expected a map with keys '0' and '1'", "gen.p2")
        kw["p2"] = {int(k): _float(v, "gen.p2") for k, v in p2.items()}
    if "normal_params" in doc:
        np_doc = doc["normal_params"]
        cells = {}
        try:
            for k, v in np_doc.items():
                z, z1 = (int(s) for s in str(k).split(","))
                mu, sd = v
                cells[(z, z1)] = (_float(mu, "gen.normal_params"), _float(sd, "gen.normal_params"))
        except (AttributeError, ValueError, TypeError):
            raise ConfigError("gen.normal_params: expected {'z,z1': [mu, sigma]}",
                              "gen.normal_params") from None
        if set(cells) != {(0, 0), (0, 1), (1, 0), (1, 1)}:
            raise ConfigError("gen.normal_params: need all four (z, z1) cells", "gen.normal_params")
        kw["normal_params"] = cells
    if "beta_true" in doc:
        bt = doc["beta_true"]
        if not isinstance(bt, (list, tuple)):
            raise ConfigError("gen.beta_true: expected a list of four numbers", "gen.beta_true")
        kw["beta_true"] = tuple(_float(b, "gen.beta_true") for b in bt)
    return GenConfig(**kw)


def load_document(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", "config") from None
    if not text.strip():
        return {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}", "config") from None
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object", "config")
    # a metadata file written by a previous run carries the config under "config"
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]
    return doc


def parse_config(path=None, overrides: Mapping | None = None, *, mode: str | None = None,
                 env: Mapping | None = None) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    ``overrides`` (flag values; ``None`` entries ignored) win over the file.
    The seed falls back to ``$MISSLAB_SEED`` and then to a fixed default.
    """
    doc = load_document(path) if path is not None else {}
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    mode = mode or doc.get("mode", "simulate")
    if mode not in ("simulate", "fit"):
        raise ConfigError(f"mode must be 'simulate' or 'fit', got {mode!r}", "mode")
    allowed = _SIM_KEYS if mode == "simulate" else _FIT_KEYS
    unknown = set(doc) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown configuration key {key!r}", key)

    env = os.environ if env is None else env
    if "seed" in doc:
        seed = _int(doc["seed"], "seed", 0)
    elif env.get(SEED_ENV):
        seed = _int(env[SEED_ENV], SEED_ENV, 0)
    else:
        seed = DEFAULT_SEED
    out = str(doc["out"]) if doc.get("out") is not None else None
    cycles = _int(doc.get("cycles", DEFAULT_CYCLES), "cycles", 1)

    if mode == "fit":
        methods = tuple(_list(doc.get("methods", list(FIT_METHODS))))
        bad = [m for m in methods if m not in FIT_METHODS]
        if bad:
            raise UnknownMethodError(f"unknown methods {bad}; expected a subset of "
                                     f"{list(FIT_METHODS)}", "methods")
        for key in ("data", "response", "predictors"):
            if not doc.get(key):
                raise ConfigError(f"fit mode requires {key!r}", key)
        schema = doc.get("schema")
        if schema is not None:
            if not isinstance(schema, Mapping) or any(k not in KINDS for k in schema.values()):
                raise ConfigError(f"schema must map column names to one of {KINDS}", "schema")
            schema = dict(schema)
        return RunConfig(
            mode="fit", methods=methods, base_seed=seed, out=out, cycles=cycles,
            data=str(doc["data"]), response=str(doc["response"]),
            predictors=tuple(_list(doc["predictors"])),
            bootstrap=_int(doc.get("bootstrap", DEFAULT_B), "bootstrap", 50),
            schema=schema, parallelism=_int(doc.get("jobs", 1), "jobs", 1),
        )

    gen_doc = doc.get("gen", {})
    if not isinstance(gen_doc, Mapping):
        raise ConfigError("gen must be an object", "gen")
    methods = tuple(_list(doc.get("methods", list(METHODS))))
    check_methods(methods)
    scenarios = _scenarios(doc.get("scenario", ["S1", "S2", "S3", "S4"]))
    if not scenarios:
        raise ConfigError("at least one scenario is required", "scenario")
    ns = tuple(_int(v, "n", 10) for v in _list(doc.get("n", list(DEFAULT_NS))))
    if not ns:
        raise ConfigError("at least one sample size is required", "n")
    return RunConfig(
        mode="simulate", gen=_gen(gen_doc), scenarios=scenarios, methods=methods,
        M=_int(doc.get("M", DEFAULT_M), "M", 2), ns=ns, base_seed=seed,
        parallelism=_int(doc.get("jobs", 1), "jobs", 1), out=out,
        ml_bootstrap=_int(doc.get("ml_bootstrap", 0), "ml_bootstrap", 0), cycles=cycles,
    )
