"""Flat ``section.key=value`` configuration covering the corpus and pipeline.

Every tunable lives under one of the sections below; values are parsed
using the type of the built-in default, so a file only needs the keys it
changes. Lines starting with ``#`` are comments.
"""

from dataclasses import dataclass, fields, replace

from .pipeline import PipelineConfig, default_config
from .synthgen import SynthConfig
from .tensorseq import InvalidInput


class ConfigError(InvalidInput):
    """Unknown key or unparsable value in a configuration file or override."""


# section name -> attribute of PipelineConfig (None = the corpus config)
SECTIONS = {
    "synth": None,
    "miner": "miner_train",
    "loc": "loc_train",
    "loss": "loss_weights",
    "mining": "mining",
    "post": "postprocess",
}
MODEL_KEYS = ("hidden", "context_radius")


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig
    pipeline: PipelineConfig


def default_run_config(seed=0):
    return RunConfig(replace(SynthConfig(), seed=seed), default_config(seed))


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _parse(text, like, key):
    text = text.strip()
    try:
        if isinstance(like, bool):
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("true", "1")
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
        if isinstance(like, tuple):
            return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {key}") from None
    return text


def _sections(cfg):
    yield "synth", cfg.synth
    for name, attr in SECTIONS.items():
        if attr is not None:
            yield name, getattr(cfg.pipeline, attr)


def flatten(cfg):
    """Ordered ``{key: text}`` view of every setting."""
    out = {f"model.{k}": _format(getattr(cfg.pipeline, k)) for k in MODEL_KEYS}
    for name, obj in _sections(cfg):
        for f in fields(obj):
            out[f"{name}.{f.name}"] = _format(getattr(obj, f.name))
    return out


def dumps(cfg):
    return "".join(f"{k}={v}\n" for k, v in flatten(cfg).items())


def parse_lines(lines, source="<config>"):
    values = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        values[key.strip()] = value.strip()
    return values


def apply(cfg, values):
    """Return ``cfg`` with the textual ``values`` overriding its settings."""
    known = flatten(cfg)
    pipe_changes, per_section = {}, {}
    for key, text in values.items():
        if key not in known:
            raise ConfigError(f"unknown configuration key {key!r}")
        section, name = key.split(".", 1)
        per_section.setdefault(section, {})[name] = text

    synth = cfg.synth
    for section, obj in _sections(cfg):
        changes = per_section.get(section)
        if not changes:
            continue
        parsed = {k: _parse(v, getattr(obj, k), f"{section}.{k}") for k, v in changes.items()}
        new = replace(obj, **parsed)
        if section == "synth":
            synth = new
        else:
            pipe_changes[SECTIONS[section]] = new
    for k, v in per_section.get("model", {}).items():
        pipe_changes[k] = _parse(v, getattr(cfg.pipeline, k), f"model.{k}")
    return RunConfig(synth, replace(cfg.pipeline, **pipe_changes))


def load(path=None, overrides=(), seed=0):
    """Defaults, then the file at ``path``, then ``key=value`` overrides."""
    cfg = default_run_config(seed)
    if path is not None:
        with open(path, encoding="utf-8") as f:
            cfg = apply(cfg, parse_lines(f.read().splitlines(), str(path)))
    if overrides:
        cfg = apply(cfg, parse_lines(overrides, "--set"))
    return cfg
