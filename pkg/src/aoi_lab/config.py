"""Scenario configuration files.

Sectioned ``key = value`` text with ``[channel]``, ``[traffic]``,
``[policy]`` and ``[solver]`` sections. Keys before the first section header
are assigned to their home section, so a flat file also works. ``#``
starts a comment anywhere on a line; ``;`` starts a comment line. A JSON object with the same section names (or flat
keys) is accepted too. Unknown keys are an error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .channel import ChannelModel, InfeasibleError
from .model import ATFixed, ConfigError, FTT, Scenario, Threshold


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int(s):
    if isinstance(s, bool):
        raise ValueError("boolean given")
    f = float(s)
    if f != int(f):
        raise ValueError(f"not an integer: {s!r}")
    return int(f)


def _floats(s):
    if isinstance(s, (list, tuple)):
        return tuple(float(x) for x in s)
    return tuple(float(x) for x in str(s).replace(";", ",").split(",") if x.strip())


def _ints(s):
    return tuple(_int(x) for x in _floats(s))


def _choice(*opts):
    def conv(s):
        v = str(s).strip()
        for o in opts:
            if v.lower() == o.lower():
                return o
        raise ValueError(f"expected one of {', '.join(opts)}; got {s!r}")
    return conv


# (section, key) -> (default, converter, description); default None = required or unset
SCHEMA = {
    ("channel", "variant"): ("normal", _choice("normal", "shannon", "fading"), "power model: normal approximation, Shannon or block fading"),
    ("channel", "K"): (None, _int, "packet length in bits"),
    ("channel", "N"): (None, float, "noise power in mW"),
    ("channel", "epsilon"): (None, float, "target codeword error probability"),
    ("channel", "W"): (None, float, "bandwidth (shannon only)"),
    ("channel", "T"): (None, _int, "coherence time in slots (fading only)"),
    ("channel", "gain"): ("rayleigh", _choice("rayleigh", "constant"), "fading gain law (fading only)"),
    ("channel", "form"): ("exact", _choice("exact", "printed"), "blocklength root: exact or as commonly typeset"),
    ("channel", "tau_min"): (None, _int, "shortest duration in slots"),
    ("channel", "tau_max"): (None, _int, "longest duration in slots"),
    ("traffic", "lambda"): (None, float, "per-slot generation probability (NP and P)"),
    ("traffic", "model"): ("NP", _choice("NP", "P", "AT"), "generation model"),
    ("traffic", "errorfree"): (False, _bool, "ignore transmission errors on the link"),
    ("policy", "kind"): ("ftt", _choice("ftt", "threshold", "at"), "policy family for `sim`"),
    ("policy", "t_s"): (None, _int, "fixed duration (ftt, at)"),
    ("policy", "h"): (None, _int, "age threshold (threshold)"),
    ("policy", "tau_a"): (None, _int, "duration at or below the threshold"),
    ("policy", "tau_b"): (None, _int, "duration above the threshold"),
    ("policy", "h_a"): (None, _int, "generation age threshold (at)"),
    ("solver", "a_max"): (None, _int, "SMDP truncation age (default tau_max + ceil(20/lambda))"),
    ("solver", "tol"): (1e-8, float, "value-iteration span tolerance, relative to the gain"),
    ("solver", "max_iter"): (100000, _int, "value-iteration iteration cap"),
    ("solver", "betas"): ((0.0, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6), _floats, "Lagrange weights"),
    ("solver", "horizon"): (1000000, _int, "simulated slots"),
    ("solver", "warmup"): (None, _int, "discarded slots (default horizon/10)"),
    ("solver", "replicas"): (1, _int, "independent simulation runs"),
    ("solver", "stride"): (1, _int, "duration-grid stride for the LP bound"),
    ("solver", "numerator"): ("proof", _choice("proof", "statement", "displayed"), "LP bound numerator form"),
    ("solver", "pc_grid"): (20, _int, "power budgets for `bounds`"),
    ("solver", "h_a_max"): (None, _int, "largest generation threshold in the AT sweep (default 20 tau_max)"),
    ("solver", "h_max"): (None, _int, "largest threshold searched by DE (default tau_max + ceil(20/lambda))"),
    ("solver", "de_population"): (30, _int, "DE population"),
    ("solver", "de_F"): (0.7, float, "DE differential weight"),
    ("solver", "de_CR"): (0.9, float, "DE crossover rate"),
    ("solver", "de_generations"): (300, _int, "DE generations"),
    ("solver", "fading_T"): ((2, 10, 50), _ints, "coherence times for `fading`"),
}

SECTIONS = ("channel", "traffic", "policy", "solver")
HOME = {}
for (sec, key) in SCHEMA:
    HOME.setdefault(key, sec)


@dataclass
class Config:
    values: dict                       # (section, key) -> typed value
    lines: dict = field(default_factory=dict)
    path: str = ""

    def get(self, section, key):
        if (section, key) in self.values:
            return self.values[(section, key)]
        return SCHEMA[(section, key)][0]

    def require(self, section, key):
        v = self.get(section, key)
        if v is None:
            raise ConfigError(f"missing required key '{key}' in [{section}]")
        return v

    def canonical(self) -> dict:
        """All settings with defaults filled in, as plain JSON data."""
        out = {s: {} for s in SECTIONS}
        for (sec, key) in SCHEMA:
            v = self.get(sec, key)
            out[sec][key] = list(v) if isinstance(v, tuple) else v
        return out

    def _where(self, section, key):
        ln = self.lines.get((section, key))
        return f"line {ln}: " if ln else ""

    # ---- builders ------------------------------------------------------
    def channel(self) -> ChannelModel:
        variant = self.get("channel", "variant")
        K = self.require("channel", "K")
        N = self.require("channel", "N")
        lo = self.require("channel", "tau_min")
        hi = self.require("channel", "tau_max")
        if lo > hi:
            raise ConfigError(f"{self._where('channel', 'tau_max')}tau_max={hi} is below tau_min={lo}")
        try:
            if variant == "shannon":
                return ChannelModel.shannon(K, N, self.require("channel", "W"), lo, hi)
            eps = self.require("channel", "epsilon")
            if variant == "fading":
                return ChannelModel.block_fading(K, N, eps, self.require("channel", "T"), lo, hi,
                                                 self.get("channel", "gain"))
            return ChannelModel.normal_approx(K, N, eps, lo, hi, self.get("channel", "form") == "printed")
        except (ConfigError, InfeasibleError):
            raise
        except ValueError as exc:
            raise ConfigError(f"[channel]: {exc}") from None

    def scenario(self) -> Scenario:
        ch = self.channel()
        model = self.get("traffic", "model")
        lam = self.get("traffic", "lambda")
        if lam is None:
            if model != "AT":
                raise ConfigError("missing required key 'lambda' in [traffic]")
            lam = 1.0
        eps = self.get("channel", "epsilon")
        if eps is None or self.get("traffic", "errorfree"):
            eps = 0.0
        try:
            return Scenario(lam, eps, ch, model)
        except ValueError as exc:
            raise ConfigError(f"{exc}") from None

    def policy(self):
        kind = self.get("policy", "kind")
        try:
            if kind == "threshold":
                return Threshold(self.require("policy", "h"), self.require("policy", "tau_a"),
                                 self.require("policy", "tau_b"))
            if kind == "at":
                return ATFixed(self.require("policy", "h_a"), self.require("policy", "t_s"))
            return FTT(self.require("policy", "t_s"))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"[policy]: {exc}") from None


def _validate(values, lines):
    def where(k):
        ln = lines.get(k)
        return f"line {ln}: " if ln else ""
    eps = values.get(("channel", "epsilon"))
    if eps is not None and not 0.0 < eps < 1.0:
        raise ConfigError(f"{where(('channel', 'epsilon'))}epsilon={eps} must lie in (0, 1)")
    lam = values.get(("traffic", "lambda"))
    if lam is not None and not 0.0 < lam <= 1.0:
        raise ConfigError(f"{where(('traffic', 'lambda'))}lambda={lam} must lie in (0, 1]")
    for key in ("K", "tau_min", "tau_max", "T"):
        v = values.get(("channel", key))
        if v is not None and v < 1:
            raise ConfigError(f"{where(('channel', key))}{key}={v} must be >= 1")
    for key in ("N", "W"):
        v = values.get(("channel", key))
        if v is not None and not v > 0:
            raise ConfigError(f"{where(('channel', key))}{key}={v} must be positive")


def _store(values, lines, section, key, raw, lineno):
    loc = f"line {lineno}: " if lineno else ""
    if section is None:
        if key not in HOME:
            raise ConfigError(f"{loc}unknown key '{key}'")
        section = HOME[key]
    if section not in SECTIONS:
        raise ConfigError(f"{loc}unknown section [{section}]")
    if (section, key) not in SCHEMA:
        raise ConfigError(f"{loc}unknown key '{key}' in [{section}]")
    if (section, key) in values:
        raise ConfigError(f"{loc}duplicate key '{key}' in [{section}]")
    try:
        values[(section, key)] = SCHEMA[(section, key)][1](raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{loc}bad value for '{key}': {exc}") from None
    lines[(section, key)] = lineno


def parse_text(text: str, path: str = "") -> Config:
    values, lines = {}, {}
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
        for k, v in data.items():
            if isinstance(v, dict):
                for kk, vv in v.items():
                    _store(values, lines, k, kk, vv, None)
            else:
                _store(values, lines, None, k, v, None)
    else:
        section = None
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith(";"):
                continue
            if line.startswith("["):
                if not line.endswith("]"):
                    raise ConfigError(f"line {n}: malformed section header {raw.strip()!r}")
                section = line[1:-1].strip().lower()
                if section not in SECTIONS:
                    raise ConfigError(f"line {n}: unknown section [{section}]")
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected key = value, got {raw.strip()!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            _store(values, lines, section, k, v, n)
    _validate(values, lines)
    return Config(values, lines, path)


def load_config(path) -> Config:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text, str(p))


def load_scenario(path) -> Scenario:
    return load_config(path).scenario()


def defaults_text() -> str:
    out = []
    for sec in SECTIONS:
        out.append(f"[{sec}]")
        for (s, key), (default, _, doc) in SCHEMA.items():
            if s != sec:
                continue
            if default is None:
                shown = "(required)" if (s, key) in _REQUIRED else "(unset)"
            elif isinstance(default, tuple):
                shown = ",".join(f"{x:g}" for x in default)
            else:
                shown = str(default)
            out.append(f"{key} = {shown}    # {doc}")
        out.append("")
    return "\n".join(out)


_REQUIRED = {("channel", "K"), ("channel", "N"), ("channel", "tau_min"), ("channel", "tau_max")}
