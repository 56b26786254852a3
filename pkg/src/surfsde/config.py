"""Experiment configuration: a single TOML file, parsed and validated.

The file has four blocks: [experiment] (name, suites, seed, output),
[curve] or [domain_map] (which geometry the run uses), [model] with nested
[model.noise], and [discretization]. Unknown suite names and inconsistent
sizes are rejected at parse time with the offending field named.
"""

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import geometry, operators, pullback


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Discretization:
    n_grid: int = 96
    time_steps: int = 64
    galerkin_dim: int = 8
    noise_modes: int = 8
    paths: int = 100
    horizon: float = 1.0

    def validate(self):
        for name in ("n_grid", "time_steps", "galerkin_dim", "noise_modes", "paths"):
            if getattr(self, name) < 1:
                raise ConfigError(f"discretization.{name} must be >= 1")
        if self.galerkin_dim > self.n_grid // 2:
            raise ConfigError(
                "discretization.galerkin_dim exceeds resolvable modes (n > N/2)"
            )
        if self.noise_modes > self.galerkin_dim:
            raise ConfigError("discretization.noise_modes exceeds galerkin_dim")
        if self.horizon <= 0.0:
            raise ConfigError("discretization.horizon must be positive")
        return self


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    suites: tuple
    master_seed: int
    output_dir: str
    curve_family: str
    curve_params: dict
    map_family: str
    map_params: dict
    model_spec: dict
    noise_spec: dict
    disc: Discretization
    raw: dict = field(default_factory=dict, repr=False)

    def make_curve(self):
        return geometry.make_curve(
            self.curve_family,
            horizon=self.disc.horizon,
            n_grid=self.disc.n_grid,
            **self.curve_params,
        )

    def make_map(self):
        return pullback.make_map(self.map_family, horizon=self.disc.horizon, **self.map_params)

    def make_model(self):
        kind = self.model_spec.get("nonlinearity", "stefan")
        if kind == "stefan":
            nonlin = operators.StefanNonlinearity(
                a=self.model_spec.get("a", 1.0),
                b=self.model_spec.get("b", 1.0),
                rho=self.model_spec.get("rho", 1.0),
            )
        elif kind == "porous_media":
            nonlin = operators.PorousMediaNonlinearity(p=self.model_spec.get("p", 2.0))
        elif kind == "linear_heat":
            nonlin = operators.LinearHeatNonlinearity()
        else:
            raise ConfigError(f"model.nonlinearity: unknown kind {kind!r}")
        return operators.StefanModel(nonlinearity=nonlin, noise=self.make_noise())

    def make_noise(self, n_modes=None):
        n_modes = n_modes or self.disc.noise_modes
        coupling = self.noise_spec.get("coupling", "additive")
        gamma0 = self.noise_spec.get("gamma0", 0.0)
        decay = self.noise_spec.get("decay", 1.5)
        f_bound = self.noise_spec.get("f_bound")
        return operators.NoiseModel(
            mode_amplitudes=operators.noise_spectrum(gamma0, n_modes, decay),
            coupling=coupling,
            f_bound=f_bound,
        )


def _section(data, name, default=None):
    value = data.get(name, default if default is not None else {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return dict(value)


def load_config(path, known_suites):
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, known_suites)


def parse_config(data, known_suites):
    exp = _section(data, "experiment")
    suites = tuple(exp.get("suites", []))
    if not suites:
        raise ConfigError("experiment.suites must list at least one suite")
    for s in suites:
        if s not in known_suites:
            raise ConfigError(
                f"experiment.suites: unknown suite {s!r} (known: {sorted(known_suites)})"
            )

    disc_data = _section(data, "discretization")
    try:
        disc = Discretization(**disc_data).validate()
    except TypeError as exc:
        raise ConfigError(f"[discretization]: {exc}") from exc

    curve = _section(data, "curve", {"family": "dilating_circle"})
    curve_family = curve.pop("family", "dilating_circle")
    if curve_family not in geometry.CURVE_FAMILIES:
        raise ConfigError(f"curve.family: unknown family {curve_family!r}")

    dmap = _section(data, "domain_map", {"family": "dilation"})
    map_family = dmap.pop("family", "dilation")
    if map_family not in pullback.MAP_FAMILIES:
        raise ConfigError(f"domain_map.family: unknown family {map_family!r}")

    model = _section(data, "model", {"nonlinearity": "linear_heat"})
    noise = model.pop("noise", {})
    if not isinstance(noise, dict):
        raise ConfigError("[model.noise] must be a table")

    return ExperimentConfig(
        name=str(exp.get("name", "experiment")),
        suites=suites,
        master_seed=int(exp.get("master_seed", 0)),
        output_dir=str(exp.get("output_dir", "out")),
        curve_family=curve_family,
        curve_params=curve,
        map_family=map_family,
        map_params=dmap,
        model_spec=model,
        noise_spec=noise,
        disc=disc,
        raw=data,
    )
