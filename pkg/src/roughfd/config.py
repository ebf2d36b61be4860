"""INI-style run configuration.

A configuration is a ``key = value`` file with sections::

    [study]
    equation = advection            ; required: advection | wave
    resolutions = 32, 64, 128, 256, 512, 1024
    reference_resolution = 16384
    final_time = 1.0
    cfl = 0.4                       ; theta fraction (advection) or safety (wave)
    seed = 0
    norms = 1, 2
    domain_length = 2.0
    reference = self                ; self | characteristics
    label = gamma 1/2

    [coefficient]
    kind = lognormal                ; lognormal | smooth | constant
    correlation_length = 0.1
    variance = 0.5
    mean_log = 0.0
    mean = 1.1
    amplitude = 0.5

    [initial_data]
    kind = weierstrass_hat          ; required
    gamma = 0.5
    num_terms = 400
    count = 30

    [expected]                      ; optional reference rates
    band = 0.15
    w.L1 = 0.4554

    [run]                           ; single solves (advect, wave, coefficient)
    num_cells = 512
    snapshot_times = 0.25, 0.5, 0.75

    [ci]                            ; overrides applied with --profile ci
    resolutions = 32, 64, 128, 256, 512
    reference_resolution = 4096

Keys of ``[ci]`` may name any key of ``[study]`` or ``[run]``. Unknown
sections or keys are errors.
"""

import configparser
from dataclasses import asdict, dataclass, field

from roughfd.convergence import CoefficientSpec, InitialDataSpec, StudyConfig
from roughfd.exceptions import ConfigError, InvalidArgumentError

__all__ = ["RunConfig", "load_config", "parse_config", "PROFILES"]

PROFILES = ("full", "ci")

_STUDY_KEYS = {
    "equation": str,
    "resolutions": "ints",
    "reference_resolution": int,
    "final_time": float,
    "cfl": float,
    "seed": int,
    "norms": "ints",
    "domain_length": float,
    "reference": str,
    "label": str,
}
_COEFFICIENT_KEYS = {
    "kind": str,
    "correlation_length": float,
    "variance": float,
    "mean_log": float,
    "mean": float,
    "amplitude": float,
}
_DATA_KEYS = {"kind": str, "gamma": float, "num_terms": int, "count": int}
_RUN_KEYS = {"num_cells": int, "snapshot_times": "floats"}
_SECTIONS = ("study", "coefficient", "initial_data", "expected", "run", "ci")

#: Defaults used when neither the file nor the profile sets them.
_DEFAULT_CFL = {"advection": 0.4, "wave": 1.0}


@dataclass
class RunConfig:
    """A study configuration plus the settings of single solves."""

    study: StudyConfig
    num_cells: int
    snapshot_times: tuple = ()
    profile: str = "full"
    source: str = ""
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        study = asdict(self.study)
        study["expected_rates"] = {f"{v}.L{m}": r
                                   for (v, m), r in self.study.expected_rates.items()}
        return {
            "profile": self.profile,
            "study": study,
            "run": {"num_cells": self.num_cells,
                    "snapshot_times": list(self.snapshot_times)},
            "source": self.source,
        }


def _convert(section, key, raw, kind):
    name = f"{section}.{key}"
    try:
        if kind == "ints":
            return tuple(int(s) for s in raw.split(",") if s.strip())
        if kind == "floats":
            return tuple(float(s) for s in raw.split(",") if s.strip())
        if kind is str:
            return raw.strip()
        return kind(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {name} = {raw!r}", key=name) from None


def _read_section(parser, section, schema, overrides=None):
    out = {}
    if parser.has_section(section):
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key {section}.{key}", key=f"{section}.{key}")
            out[key] = _convert(section, key, raw, schema[key])
    for key, raw in (overrides or {}).items():
        out[key] = _convert("ci", key, raw, schema[key])
    return out


def _expected(parser):
    rates, band = {}, None
    if not parser.has_section("expected"):
        return rates, band
    for key, raw in parser.items("expected"):
        name = f"expected.{key}"
        if key == "band":
            band = _convert("expected", key, raw, float)
            continue
        var, _, norm = key.partition(".")
        if not norm.startswith("l") or norm[1:] not in ("1", "2"):
            raise ConfigError(f"expected rates are named <variable>.L1 or <variable>.L2, "
                              f"got {name}", key=name)
        rates[(var, int(norm[1:]))] = _convert("expected", key, raw, float)
    return rates, band


def parse_config(text, profile="full", seed=None, source="<string>"):
    """Parse configuration ``text`` into a :class:`RunConfig`.

    Raises :class:`ConfigError` naming the offending key.
    """
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}", key="profile")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", key=section)
    if not parser.has_section("study"):
        raise ConfigError("missing section [study]", key="study")
    if not parser.has_option("study", "equation"):
        raise ConfigError("missing required key study.equation", key="study.equation")
    if not parser.has_option("initial_data", "kind"):
        raise ConfigError("missing required key initial_data.kind", key="initial_data.kind")

    study_over, run_over = {}, {}
    if profile == "ci" and parser.has_section("ci"):
        for key, raw in parser.items("ci"):
            if key in _STUDY_KEYS:
                study_over[key] = raw
            elif key in _RUN_KEYS:
                run_over[key] = raw
            else:
                raise ConfigError(f"unknown key ci.{key}", key=f"ci.{key}")

    study = _read_section(parser, "study", _STUDY_KEYS, study_over)
    coef = _read_section(parser, "coefficient", _COEFFICIENT_KEYS)
    data = _read_section(parser, "initial_data", _DATA_KEYS)
    run = _read_section(parser, "run", _RUN_KEYS, run_over)
    rates, band = _expected(parser)
    if seed is not None:
        study["seed"] = int(seed)
    study.setdefault("cfl", _DEFAULT_CFL.get(study["equation"], 0.4))

    try:
        coef_spec = CoefficientSpec(**coef)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), key="coefficient.kind") from None
    try:
        data_spec = InitialDataSpec(**data)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc), key="initial_data.kind") from None
    try:
        cfg = StudyConfig(coefficient=coef_spec, initial_data=data_spec,
                          expected_rates=rates, band=band, **study)
    except InvalidArgumentError as exc:
        raise ConfigError(f"invalid [study]: {exc}", key=_guess_key(str(exc))) from None
    for (var, _m) in rates:
        if var not in cfg.variables:
            raise ConfigError(f"unknown variable {var!r} in [expected]",
                              key=f"expected.{var}")
    num_cells = run.get("num_cells", max(cfg.resolutions))
    if num_cells < 2 or cfg.reference_resolution % num_cells:
        raise ConfigError("run.num_cells must divide study.reference_resolution",
                          key="run.num_cells")
    return RunConfig(cfg, num_cells, run.get("snapshot_times", ()), profile, source)


def _guess_key(message):
    for key in _STUDY_KEYS:
        if key in message:
            return f"study.{key}"
    if "initial data" in message:
        return "initial_data.kind"
    if "characteristics" in message:
        return "study.reference"
    return "study"


def load_config(path, profile="full", seed=None):
    """Read and parse a configuration file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}",
                          key="config") from None
    return parse_config(text, profile=profile, seed=seed, source=str(path))
