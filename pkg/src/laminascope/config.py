"""INI configuration for the detection pipeline.

Every tunable lives under a section named after its stage, with
kebab-case keys (``[contour] rdp-epsilon = 2.0``).  Values from a file are
applied first, then ``section.key=value`` overrides.
"""

from __future__ import annotations

import configparser
import os
from importlib import resources

from .baseline import BaselineConfig, LaminaTemplate
from .despeckle import DiffusionConfig
from .hough import HoughConfig
from .morphology import MorphologyConfig
from .phasesym import LogGaborBank, NoiseModel, PhaseSymConfig
from .pipeline import PipelineConfig

ENV_VAR = "LAMINA_SCOPE_CONFIG"


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.replace(" ", "").split(",") if x)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.replace(" ", "").split(",") if x)


# (section, key) -> (path into the nested config dict, parser)
KEYS: dict[tuple[str, str], tuple[tuple[str, ...], object]] = {
    ("despeckle", "alpha"): (("despeckle", "alpha"), float),
    ("despeckle", "iterations"): (("despeckle", "iterations"), int),
    ("despeckle", "scales"): (("despeckle", "scales"), int),
    ("despeckle", "window"): (("despeckle", "window"), int),
    ("despeckle", "region"): (("despeckle", "region"), _ints),
    ("despeckle", "step"): (("despeckle", "step"), float),
    ("despeckle", "pad"): (("despeckle", "pad"), int),
    ("morphology", "se1-size"): (("morphology", "se1_size"), int),
    ("morphology", "se2-size"): (("morphology", "se2_size"), int),
    ("morphology", "se2-mode"): (("morphology", "se2_mode"), str),
    ("morphology", "otsu-gain"): (("morphology", "otsu_gain"), float),
    ("morphology", "min-contrast"): (("morphology", "min_contrast"), float),
    ("edgemap", "edge-threshold-frac"): (("edge_frac",), float),
    ("contour", "rdp-epsilon"): (("rdp_epsilon",), float),
    ("contour", "min-contour-points"): (("min_contour_points",), int),
    ("hough", "theta-min"): (("hough", "theta_min"), float),
    ("hough", "theta-max"): (("hough", "theta_max"), float),
    ("hough", "theta-res"): (("hough", "theta_res"), float),
    ("hough", "rho-res"): (("hough", "rho_res"), float),
    ("hough", "n-peaks"): (("hough", "n_peaks"), int),
    ("hough", "min-seg-len"): (("hough", "min_seg_len"), float),
    ("hough", "max-gap"): (("hough", "max_gap"), float),
    ("phasesym", "scales"): (("phasesym", "bank", "scales"), int),
    ("phasesym", "orientations"): (("phasesym", "bank", "orientations"), _floats),
    ("phasesym", "min-wavelength"): (("phasesym", "bank", "min_wavelength"), float),
    ("phasesym", "mult"): (("phasesym", "bank", "mult"), float),
    ("phasesym", "sigma-ratio"): (("phasesym", "bank", "sigma_ratio"), float),
    ("phasesym", "angular-spread"): (("phasesym", "bank", "angular_spread"), float),
    ("phasesym", "lowpass-radius"): (("phasesym", "bank", "lowpass_radius"), float),
    ("phasesym", "lowpass-sharpness"): (("phasesym", "bank", "lowpass_sharpness"), int),
    ("phasesym", "pad"): (("phasesym", "bank", "pad"), int),
    ("phasesym", "polarity"): (("phasesym", "bank", "polarity"), str),
    ("phasesym", "k-sigma"): (("phasesym", "noise", "k_sigma"), float),
    ("phasesym", "underestimate-factor"): (("phasesym", "noise", "underestimate_factor"), float),
    ("phasesym", "dilation-size"): (("phasesym", "dilation_size"), int),
    ("phasesym", "otsu-gain"): (("phasesym", "otsu_gain"), float),
    ("baseline", "lamina-angle"): (("baseline", "lamina", "angle"), float),
    ("baseline", "lamina-length"): (("baseline", "lamina", "length"), float),
    ("baseline", "lamina-along-sigma"): (("baseline", "lamina", "along_blur_sigma"), float),
    ("baseline", "lamina-across-sigma"): (("baseline", "lamina", "across_blur_sigma"), float),
    ("baseline", "lf-angle"): (("baseline", "lf", "angle"), float),
    ("baseline", "lf-length"): (("baseline", "lf", "length"), float),
    ("baseline", "lf-along-sigma"): (("baseline", "lf", "along_blur_sigma"), float),
    ("baseline", "lf-across-sigma"): (("baseline", "lf", "across_blur_sigma"), float),
    ("baseline", "max-laminae"): (("baseline", "max_laminae"), int),
    ("baseline", "exclusion-mm"): (("baseline", "exclusion_mm"), float),
    ("baseline", "stop-fraction"): (("baseline", "stop_fraction"), float),
    ("baseline", "lf-band-mm"): (("baseline", "lf_band_mm"), float),
    ("baseline", "use-ridge-map"): (("baseline", "use_ridge_map"), _bool),
    ("baseline", "fast"): (("baseline", "fast"), _bool),
    ("pipeline", "mm-per-px"): (("mm_per_px",), float),
    ("pipeline", "method"): (("method",), str),
    ("pipeline", "skin-offset"): (("skin_offset",), _bool),
    ("pipeline", "outlier-mm"): (("outlier_mm",), float),
}


def valid_keys() -> list[str]:
    return [f"{s}.{k}" for s, k in KEYS]


def config_from_dict(d: dict) -> PipelineConfig:
    """Rebuild a PipelineConfig from the nested dict made by ``to_dict``."""
    d = dict(d)
    desp = dict(d.pop("despeckle"))
    desp["region"] = tuple(desp["region"])
    ps = dict(d.pop("phasesym"))
    bank = dict(ps.pop("bank"))
    bank["orientations"] = tuple(bank["orientations"])
    base = dict(d.pop("baseline"))
    return PipelineConfig(
        despeckle=DiffusionConfig(**desp),
        morphology=MorphologyConfig(**d.pop("morphology")),
        hough=HoughConfig(**d.pop("hough")),
        phasesym=PhaseSymConfig(bank=LogGaborBank(**bank), noise=NoiseModel(**ps.pop("noise")),
                                **ps),
        baseline=BaselineConfig(lamina=LaminaTemplate(**base.pop("lamina")),
                                lf=LaminaTemplate(**base.pop("lf")), **base),
        **d,
    )


def _set(tree: dict, path: tuple[str, ...], value) -> None:
    for p in path[:-1]:
        tree = tree[p]
    tree[path[-1]] = value


def _apply(tree: dict, section: str, key: str, raw: str, origin: str) -> None:
    spec = KEYS.get((section.strip().lower(), key.strip().lower()))
    if spec is None:
        raise ConfigError(f"unknown config key {section}.{key} ({origin}); valid keys: "
                          + ", ".join(valid_keys()))
    path, parse = spec
    try:
        value = parse(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key} ({origin}): {exc}") from None
    _set(tree, path, value)


def parse_override(text: str) -> tuple[str, str, str]:
    """Split ``section.key=value``."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    name, value = text.split("=", 1)
    if "." not in name:
        raise ConfigError(f"override {text!r} lacks a section (section.key=value)")
    section, key = name.split(".", 1)
    return section, key, value


def load_config(path=None, overrides=(), use_env: bool = True) -> PipelineConfig:
    """Defaults, then the INI file (or $LAMINA_SCOPE_CONFIG), then overrides."""
    tree = PipelineConfig().to_dict()
    if path is None and use_env:
        path = os.environ.get(ENV_VAR) or None
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                _apply(tree, section, key, raw, str(path))
    for ov in overrides:
        _apply(tree, *parse_override(ov), "override")
    try:
        return config_from_dict(tree)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def default_ini_text() -> str:
    return resources.files("laminascope").joinpath("default.ini").read_text()
