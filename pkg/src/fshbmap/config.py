"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored.  Every key belongs to
:class:`ExperimentConfig`; unknown or repeated keys are errors, as is a
missing required key.  ``none`` (or an empty value) clears an optional key.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
import math

from .errors import ConfigError, FshbmapError
from .images import make_phantom, read_pgm
from .metrics import SsimConfig
from .model import HyperParams
from .operators import DictionaryKind, IdentitySensing, RadonSpec
from .pipeline import METHODS, ReconTask
from .spsa import SpsaConfig, format_float

_REQUIRED = object()


@dataclass(frozen=True)
class ExperimentConfig:
    n_rays: int = _REQUIRED
    samples_per_ray: int = _REQUIRED
    image: str = "phantom"
    phantom_width: int = 32
    phantom_height: int = 32
    phantom_seed: int = 0
    phantom_shapes: int = 6
    phantom_texture: float = 0.1
    sensing: str = "radon"
    detector_spacing: float | None = None
    dictionary: str = "haar2d"
    dictionaries: str = "haar2d,dct2d"
    sigma_u_sq: float = 1.0
    sigma_eps_sq: float = 0.1
    a: float = 1.0
    sigma_x_sq: float = 10.0
    tau: float = 0.0
    z_floor: float = 1e-8
    alpha0: float = 0.1
    stability_A: float | None = None
    alpha_exp: float = 0.602
    c0: float = 0.1
    gamma_exp: float = 0.101
    n_iters: int = 500
    log_every: int = 10
    method: str = "fshbmap"
    seed: int = 0
    trials: int = 1
    sparsity: str | None = None
    output_dir: str | None = None

    def __post_init__(self):
        missing = [f.name for f in fields(self) if getattr(self, f.name) is _REQUIRED]
        if missing:
            raise ConfigError(f"missing required keys: {', '.join(missing)}")
        if self.sensing not in ("radon", "identity"):
            raise ConfigError(f"sensing must be 'radon' or 'identity', got {self.sensing!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        for name in ("phantom_width", "phantom_height", "phantom_shapes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        try:
            self.dictionary_list()
            self.sparsity_list()
            DictionaryKind(self.dictionary)
            if not self.sigma_eps_sq >= 0:
                raise ConfigError("sigma_eps_sq must be nonnegative")
            if self.sigma_eps_sq > 0:
                self.hyper_params()
            self.spsa_config()
        except FshbmapError as exc:
            raise ConfigError(str(exc)) from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- parsing -----------------------------------------------------------

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_pairs(cls, pairs):
        """Build from ``(key, raw string)`` pairs; later pairs override earlier ones."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in pairs:
            if key not in types:
                raise ConfigError(f"unknown key {key!r}")
            values[key] = _convert(key, types[key], raw)
        return cls(**values)

    @classmethod
    def from_text(cls, text, overrides=()):
        return cls.from_pairs(list(parse_text(text)) + list(overrides))

    @classmethod
    def from_file(cls, path, overrides=()):
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        return cls.from_text(text, overrides)

    def to_text(self):
        """Fully resolved configuration in the input format."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                v = "none"
            elif isinstance(v, float):
                v = format_float(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    # -- builders ----------------------------------------------------------

    def hyper_params(self):
        """Model hyperparameters; a zero noise variance is only valid for simulation."""
        if self.sigma_eps_sq == 0:
            raise ConfigError("sigma_eps_sq must be positive for fshbmap and random_x")
        return HyperParams(
            sigma_u_sq=self.sigma_u_sq, sigma_eps_sq=self.sigma_eps_sq, a=self.a,
            sigma_x_sq=self.sigma_x_sq, tau=self.tau, z_floor=self.z_floor,
        )

    def spsa_config(self):
        return SpsaConfig(
            alpha0=self.alpha0, stability_A=self.stability_A, alpha_exp=self.alpha_exp,
            c0=self.c0, gamma_exp=self.gamma_exp, n_iters=self.n_iters,
            seed=self.seed, log_every=self.log_every,
        )

    def dictionary_list(self):
        items = [s.strip() for s in self.dictionaries.split(",") if s.strip()]
        if not items:
            raise ConfigError("dictionaries must name at least one dictionary")
        return [DictionaryKind(s) for s in items]

    def sparsity_list(self):
        if self.sparsity is None:
            return None
        try:
            items = [int(s) for s in self.sparsity.split(",") if s.strip()]
        except ValueError:
            raise ConfigError("sparsity must be a comma-separated list of integers") from None
        if not items or min(items) < 1:
            raise ConfigError("sparsity levels must be positive integers")
        return items

    def load_image(self):
        """Ground-truth image: a PGM file or the configured phantom."""
        if self.image == "phantom":
            return make_phantom(self.phantom_width, self.phantom_height,
                                seed=self.phantom_seed, n_shapes=self.phantom_shapes,
                                texture=self.phantom_texture)
        return read_pgm(self.image)

    def geometry(self, width, height):
        try:
            if self.sensing == "identity":
                return IdentitySensing(width, height)
            return RadonSpec(width, height, self.n_rays, self.samples_per_ray,
                             detector_spacing=self.detector_spacing)
        except FshbmapError as exc:
            raise ConfigError(f"invalid geometry: {exc}") from exc

    def task(self, image, dictionary=None, methods=None):
        """Reconstruction task for ``image``.

        The greedy baselines never read the hyperparameters, so when only they
        run a noiseless configuration falls back to the defaults.
        """
        height, width = image.shape
        methods = [self.method] if methods is None else methods
        greedy_only = all(m in ("omp", "cosamp") for m in methods)
        params = HyperParams() if greedy_only and self.sigma_eps_sq == 0 else self.hyper_params()
        try:
            return ReconTask(
                ground_truth=image, radon=self.geometry(width, height),
                dictionary=self.dictionary if dictionary is None else dictionary,
                params=params, spsa=self.spsa_config(), seed=self.seed,
                ssim_config=SsimConfig(),
            )
        except ConfigError:
            raise
        except FshbmapError as exc:
            raise ConfigError(str(exc)) from exc


def parse_text(text):
    """Yield ``(key, value)`` pairs from ``key = value`` lines."""
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key in seen:
            raise ConfigError(f"line {lineno}: key {key!r} given twice")
        seen.add(key)
        yield key, value.strip()


def _convert(key, type_name, raw):
    raw = raw.strip()
    optional = "None" in type_name
    if optional and raw.lower() in ("", "none"):
        return None
    base = type_name.split("|")[0].strip()
    try:
        if base == "int":
            return int(raw)
        if base == "float":
            value = float(raw)
            if math.isnan(value):
                raise ValueError
            return value
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {base}") from None
    if not raw:
        raise ConfigError(f"{key}: empty value")
    return raw
