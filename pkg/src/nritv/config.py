"""Experiment configuration: a single JSON document checked against a schema."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import jsonschema
import numpy as np

from .sim import DEFAULT_REMAPS, Lesion, MaskSpec, PhantomSpec, default_lesions, rank_demo_spec
from .solver import SolverParams

DEFAULT_N = 80
DEFAULT_CONTRASTS = ("T1", "T2", "PD")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is a JSON pointer to the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path or "/"


def load_schema():
    return json.loads(resources.files("nritv").joinpath("config_schema.json").read_text())


def _pointer(parts):
    return "".join(f"/{p}" for p in parts)


@dataclass
class ExperimentConfig:
    seed: int = 0
    phantom: PhantomSpec = field(default_factory=lambda: PhantomSpec(n=DEFAULT_N, lesions=default_lesions()))
    R: float = 5.0
    acs_fraction: float = 0.4
    P: int = 8
    width_frac: float = 0.35
    sigma: float = 0.0
    solver: SolverParams = field(default_factory=SolverParams)
    dataset_dir: str | None = None
    recon_dir: str | None = None

    @property
    def n(self):
        return self.phantom.n

    def seeds(self):
        """Independent ``(mask, coils, noise)`` seeds derived from the top-level seed."""
        children = np.random.SeedSequence(self.seed).spawn(3)
        return tuple(int(c.generate_state(1, dtype=np.uint64)[0]) for c in children)

    def mask_spec(self):
        return MaskSpec(n=self.n, R=self.R, acs_fraction=self.acs_fraction, seed=self.seeds()[0])


def _phantom(doc):
    n = doc.get("n", DEFAULT_N)
    if doc.get("preset", "standard") == "rank_demo":
        for key in ("contrasts", "lesions"):
            if key in doc:
                raise ConfigError(f"/phantom/{key}", "not allowed together with preset 'rank_demo'")
        return rank_demo_spec(n)
    remaps = tuple(DEFAULT_REMAPS[c] if isinstance(c, str) else tuple(c) for c in doc.get("contrasts", DEFAULT_CONTRASTS))
    lesions_doc = doc.get("lesions", "default")
    if lesions_doc == "default":
        lesions = default_lesions()
    else:
        lesions = tuple(
            Lesion(center=tuple(l["center"]), radius=l["radius"], intensity=l["intensity"], contrast=l["contrast"])
            for l in lesions_doc
        )
    for k, lesion in enumerate(lesions):
        if lesion.contrast >= len(remaps):
            where = "/phantom/lesions" if lesions_doc == "default" else f"/phantom/lesions/{k}/contrast"
            raise ConfigError(where, f"lesion targets contrast {lesion.contrast} but only {len(remaps)} contrasts exist")
    return PhantomSpec(n=n, remaps=remaps, lesions=lesions)


def parse_config(doc):
    """Validate a decoded JSON document and build an :class:`ExperimentConfig`."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = errors[0]
        raise ConfigError(_pointer(err.absolute_path), err.message)
    cfg = ExperimentConfig(seed=doc.get("seed", 0), phantom=_phantom(doc.get("phantom", {})))
    mask = doc.get("mask", {})
    coils = doc.get("coils", {})
    cfg.R = float(mask.get("R", cfg.R))
    cfg.acs_fraction = float(mask.get("acs_fraction", cfg.acs_fraction))
    cfg.P = int(coils.get("P", cfg.P))
    cfg.width_frac = float(coils.get("width_frac", cfg.width_frac))
    cfg.sigma = float(doc.get("noise", {}).get("sigma", cfg.sigma))
    cfg.solver = replace(SolverParams(), **doc.get("solver", {}))
    out = doc.get("output", {})
    cfg.dataset_dir = out.get("dataset")
    cfg.recon_dir = out.get("recon")
    spec = cfg.mask_spec()
    if spec.n_lines < spec.n_acs or spec.n_lines < 1:
        raise ConfigError("/mask/R", f"line budget {spec.n_lines} cannot hold {spec.n_acs} calibration lines at n={cfg.n}")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("/", f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"{path} is not valid JSON: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(doc)
