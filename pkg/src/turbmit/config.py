"""Pipeline configuration and its JSON file format.

The config file is a JSON object with optional sections ``flow``,
``selection``, ``deblur`` and ``postprocess`` plus a top-level
``refinement_passes``. Any missing key takes its default; an empty file
means all defaults. Example::

    {
      "refinement_passes": 2,
      "selection": {"keep_fraction": 0.5, "min_keep": 8},
      "deblur": {"method": "wiener", "nsr": 0.001}
    }
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .deblur import DeblurParams
from .postprocess import PostprocessParams
from .registration import FlowParams
from .selection import SelectionParams

_SECTIONS = {
    "flow": FlowParams,
    "selection": SelectionParams,
    "deblur": DeblurParams,
    "postprocess": PostprocessParams,
}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    flow: FlowParams = field(default_factory=FlowParams)
    selection: SelectionParams = field(default_factory=SelectionParams)
    deblur: DeblurParams = field(default_factory=DeblurParams)
    postprocess: PostprocessParams = field(default_factory=PostprocessParams)
    refinement_passes: int = 2

    def __post_init__(self):
        if self.refinement_passes < 1:
            raise ConfigError("refinement_passes must be >= 1")

    @property
    def ringing_radius(self):
        if self.postprocess.ringing_radius is not None:
            return self.postprocess.ringing_radius
        return self.deblur.psf_radius

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - set(_SECTIONS) - {"refinement_passes"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, kind in _SECTIONS.items():
            section = data.get(name) or {}
            allowed = {f.name for f in fields(kind)}
            bad = set(section) - allowed
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            try:
                kwargs[name] = kind(**section)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid [{name}] section: {exc}") from exc
        if "refinement_passes" in data:
            kwargs["refinement_passes"] = int(data["refinement_passes"])
        return cls(**kwargs)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        if not text.strip():
            return cls()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def load_config(path=None):
    if path is None:
        return PipelineConfig()
    return PipelineConfig.from_json(Path(path).read_text())


def save_config(config, path):
    Path(path).write_text(config.to_json() + "\n")
