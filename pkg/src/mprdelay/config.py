"""INI-style run configuration with presets and key=value overrides.

Sections are ``[net]``, ``[phy]`` and ``[sim]``; ``[preset] name = ...``
pulls in a preset file first.  Presets ship with the package and may also be
placed in the directory named by ``MPRDELAY_PRESET_DIR``.  Precedence, low to
high: built-in defaults, preset, config file, ``--set`` overrides.
"""

from __future__ import annotations

import configparser
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .contention import AccessMode, NetworkConfig
from .errors import DomainError, MprDelayError
from .timing import PhyParams, SlotTimes, slot_times

PRESET_ENV = "MPRDELAY_PRESET_DIR"
HEADER_TITLE = "; mprdelay resolved config"


class ConfigError(MprDelayError):
    """Unreadable, incomplete or inconsistent configuration."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _mode(text: str) -> str:
    return AccessMode.parse(text).value


SCHEMA = {
    "preset": {"name": str},
    "net": {
        "n_stations": int,
        "mpr_capability": int,
        "backoff_factor": float,
        "min_window": int,
        "arrival_rate": float,
        "payload_bits": float,
        "access_mode": _mode,
    },
    "phy": {
        "phy_header_s": float,
        "mac_header_bits": float,
        "data_rate_bps": float,
        "sifs_s": float,
        "difs_s": float,
        "ack_s": float,
        "idle_slot_s": float,
        "rts_s": float,
        "cts_s": float,
        "prop_delay_s": float,
        "t_idle": float,
        "t_coll": float,
        "t_succ": float,
    },
    "sim": {
        "duration_s": float,
        "warmup_s": float,
        "seed": int,
        "queue_capacity": int,
        "runs": int,
        "saturated": _bool,
    },
}

DEFAULTS = {
    "net": {"mpr_capability": "1", "backoff_factor": "2.0", "min_window": "16", "arrival_rate": "0.0",
            "access_mode": "aloha"},
    "sim": {"warmup_s": "0.0", "seed": "0", "runs": "1", "saturated": "false"},
}

# short names accepted by --set and sweep axes
ALIASES = {
    "N": "net.n_stations",
    "M": "net.mpr_capability",
    "r": "net.backoff_factor",
    "W0": "net.min_window",
    "lam": "net.arrival_rate",
    "PL": "net.payload_bits",
    "mode": "net.access_mode",
}


def _canonical(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolve_key(key: str) -> tuple[str, str]:
    key = ALIASES.get(key.strip(), key.strip())
    if "." not in key:
        raise ConfigError(f"override key {key!r} must look like section.key")
    section, name = key.split(".", 1)
    if section not in SCHEMA or name not in SCHEMA[section]:
        raise ConfigError(f"unknown config key {section}.{name}")
    return section, name


def preset_dirs() -> list[Path]:
    dirs = []
    if os.environ.get(PRESET_ENV):
        dirs.append(Path(os.environ[PRESET_ENV]))
    dirs.append(Path(str(resources.files("mprdelay") / "presets")))
    return dirs


def _read_ini(text: str, origin: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {origin}: {exc}") from None
    return {s: dict(parser[s]) for s in parser.sections()}


def load_preset(name: str) -> tuple[dict[str, dict[str, str]], list[str]]:
    for d in preset_dirs():
        path = d / f"{name}.ini"
        if path.is_file():
            raw = _read_ini(path.read_text(), str(path))
            meta = raw.pop("preset", {})
            required = [k.strip() for k in meta.get("required", "").split(",") if k.strip()]
            return raw, required
    raise ConfigError(f"preset {name!r} not found in {[str(d) for d in preset_dirs()]}")


def _extract_header(text: str) -> str | None:
    """Config embedded as a comment header in CSV output."""
    lines = []
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        lines.append(line[2:] if line.startswith("# ") else line[1:])
    return "\n".join(lines) if lines else None


def read_config_text(text: str, origin: str = "<config>") -> dict[str, dict[str, str]]:
    """Parse an INI file, a CSV with a config header or a JSON output."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
            return {s: {k: str(v) for k, v in kv.items()} for s, kv in doc["config"].items()}
        except (ValueError, KeyError, AttributeError) as exc:
            raise ConfigError(f"cannot read config from JSON {origin}: {exc}") from None
    if stripped.startswith("#"):
        header = _extract_header(stripped)
        if header and "[" in header:
            text = header
    return _read_ini(text, origin)


@dataclass(frozen=True)
class SimSettings:
    duration_s: float | None
    warmup_s: float
    seed: int
    queue_capacity: int | None
    runs: int
    saturated: bool


@dataclass(frozen=True)
class RunConfig:
    sections: dict
    net: NetworkConfig
    st: SlotTimes
    phy: PhyParams | None
    sim: SimSettings

    def header(self) -> str:
        return render_header(self.sections)

    def with_values(self, changes: dict[str, str]) -> RunConfig:
        """Rebuild with ``section.key`` (or alias) values replaced."""
        sections = {s: dict(kv) for s, kv in self.sections.items()}
        for key, value in changes.items():
            s, k = resolve_key(key)
            sections.setdefault(s, {})[k] = str(value)
        return build(sections)


def render_header(sections: dict) -> str:
    lines = [HEADER_TITLE]
    for s in ("preset", "net", "phy", "sim"):
        if s in sections and sections[s]:
            lines.append(f"[{s}]")
            lines.extend(f"{k} = {v}" for k, v in sections[s].items())
    return "\n".join("# " + line for line in lines) + "\n"


def _typed(sections: dict) -> dict[str, dict]:
    out = {}
    for s, kv in sections.items():
        if s not in SCHEMA:
            raise ConfigError(f"unknown section [{s}]")
        out[s] = {}
        for k, v in kv.items():
            if k not in SCHEMA[s]:
                raise ConfigError(f"unknown key {s}.{k}")
            try:
                out[s][k] = SCHEMA[s][k](v)
            except (ValueError, DomainError) as exc:
                raise ConfigError(f"bad value for {s}.{k}: {v!r} ({exc})") from None
    return out


def build(raw: dict[str, dict[str, str]]) -> RunConfig:
    """Merge defaults and preset into ``raw``, validate and build objects."""
    merged: dict[str, dict[str, str]] = {s: dict(kv) for s, kv in DEFAULTS.items()}
    required: list[str] = []
    name = raw.get("preset", {}).get("name")
    if name:
        preset, required = load_preset(name)
        for s, kv in preset.items():
            merged.setdefault(s, {}).update(kv)
    for s, kv in raw.items():
        merged.setdefault(s, {}).update(kv)

    for key in required:
        s, k = resolve_key(key)
        if k not in merged.get(s, {}):
            raise ConfigError(f"preset {name!r} requires an explicit value for {s}.{k}")

    typed = _typed(merged)
    canon = {s: {k: _canonical(v) for k, v in sorted(kv.items())} for s, kv in typed.items() if kv}
    net_kv, phy_kv, sim_kv = typed.get("net", {}), typed.get("phy", {}), typed.get("sim", {})

    if "n_stations" not in net_kv:
        raise ConfigError("net.n_stations is required")
    try:
        net = NetworkConfig(**net_kv)
        phy = None
        direct = [k for k in ("t_idle", "t_coll", "t_succ") if k in phy_kv]
        if direct:
            if len(direct) != 3:
                raise ConfigError("give all of phy.t_idle, phy.t_coll, phy.t_succ or none")
            st = SlotTimes(phy_kv["t_idle"], phy_kv["t_coll"], phy_kv["t_succ"])
        else:
            missing = [k for k in ("phy_header_s", "mac_header_bits", "data_rate_bps", "sifs_s", "difs_s", "ack_s")
                       if k not in phy_kv]
            if missing:
                raise ConfigError(f"[phy] needs slot times or PHY parameters; missing {', '.join(missing)}")
            phy = PhyParams(**phy_kv)
            st = slot_times(net.access_mode, phy, net.payload_bits)
        sim = SimSettings(
            sim_kv.get("duration_s"), sim_kv["warmup_s"], sim_kv["seed"], sim_kv.get("queue_capacity"),
            sim_kv["runs"], sim_kv["saturated"],
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(canon, net, st, phy, sim)


def load_config(path: str | os.PathLike | None = None, overrides=(), preset: str | None = None) -> RunConfig:
    """Read ``path`` (INI, CSV header or JSON output), apply preset and overrides."""
    raw: dict[str, dict[str, str]] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        raw = read_config_text(text, str(path))
    if preset:
        raw.setdefault("preset", {})["name"] = preset
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, value = item.split("=", 1)
        s, k = resolve_key(key)
        raw.setdefault(s, {})[k] = value.strip()
    return build(raw)
