"""Dataclass configuration for grids, rendering, losses and full runs."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from .losses import DEFAULT_DEPTH_BINS, DEFAULT_TAU, DEFAULT_U
from .rendering import DEFAULT_ANGLE_RANGES, DEFAULT_POSITION_RANGES, PosePerturbation
from .targets import DEPTH_MODE_BOX_CENTER, DEPTH_MODE_SURFACE


class ConfigError(ValueError):
    """A configuration value is outside its validity range."""


@dataclass(frozen=True)
class GridConfig:
    """BEV grid and height lattice for the foreground volume."""

    x_range: tuple[float, float] = (-50.0, 50.0)
    y_range: tuple[float, float] = (-50.0, 50.0)
    cell_size: float = 100.0 / 128.0
    z_range: tuple[float, float] = (-1.0, 3.0)
    z_cells: int = 4
    n_classes: int = 1

    @property
    def n_x(self) -> int:
        return round((self.x_range[1] - self.x_range[0]) / self.cell_size)

    @property
    def n_y(self) -> int:
        return round((self.y_range[1] - self.y_range[0]) / self.cell_size)

    def validate(self) -> None:
        if self.cell_size <= 0 or self.z_cells < 1 or self.n_classes < 1:
            raise ConfigError("grid cell size, z cells and classes must be positive")
        if self.x_range[1] <= self.x_range[0] or self.y_range[1] <= self.y_range[0] \
                or self.z_range[1] <= self.z_range[0]:
            raise ConfigError("grid ranges must be nonempty")


@dataclass(frozen=True)
class RenderConfig:
    """Render-target geometry: resolution, samples, depth window, stride."""

    width: int = 88
    height: int = 48
    samples: int = 64
    near: float = 1.0
    far: float = 61.2
    stride: int = 8

    def validate(self) -> None:
        if min(self.width, self.height, self.samples, self.stride) < 1:
            raise ConfigError("render dimensions, samples and stride must be >= 1")
        if not 0 < self.near < self.far:
            raise ConfigError(f"need 0 < near < far, got ({self.near}, {self.far})")


@dataclass(frozen=True)
class LossConfig:
    tau: float = DEFAULT_TAU
    u_const: float = DEFAULT_U
    depth_bins: int = DEFAULT_DEPTH_BINS
    depth_mode: str = DEPTH_MODE_BOX_CENTER

    def validate(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must be in (0, 1), got {self.tau}")
        if self.u_const <= 0 or self.depth_bins < 1:
            raise ConfigError("u_const must be positive and depth_bins >= 1")
        if self.depth_mode not in (DEPTH_MODE_BOX_CENTER, DEPTH_MODE_SURFACE):
            raise ConfigError(f"unknown depth mode {self.depth_mode!r}")


@dataclass(frozen=True)
class NoiseConfig:
    """Simulated 2D-detector imperfections."""

    sigma: float = 0.1
    fn_rate: float = 0.1
    fp_rate: float = 0.5

    def validate(self) -> None:
        if self.sigma < 0 or not 0 <= self.fn_rate <= 1 or self.fp_rate < 0:
            raise ConfigError("noise parameters out of range")


@dataclass(frozen=True)
class BiasConfig:
    """Location bias injected into the simulated detector's outputs."""

    dl_img: float = 0.0
    dl_bev: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class RunConfig:
    """Everything a full pipeline run needs, minus the output directory."""

    preset: str = "nuscenes"
    domain: str = "source"
    seed: int = 0
    n_scenes: int = 2
    input_width: int = 704
    input_height: int = 384
    n_boxes: tuple[int, int] = (3, 8)
    grid: GridConfig = field(default_factory=GridConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    perturb: PosePerturbation = field(default_factory=PosePerturbation)
    loss: LossConfig = field(default_factory=LossConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    bias: BiasConfig = field(default_factory=BiasConfig)

    def validate(self) -> None:
        if self.domain not in ("source", "target"):
            raise ConfigError(f"domain must be source or target, got {self.domain!r}")
        if self.n_scenes < 1 or self.input_width < 1 or self.input_height < 1:
            raise ConfigError("n_scenes and input resolution must be >= 1")
        if not 1 <= self.n_boxes[0] <= self.n_boxes[1]:
            raise ConfigError(f"invalid box count range {self.n_boxes}")
        self.grid.validate()
        self.render.validate()
        self.loss.validate()
        self.noise.validate()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        def tup(x):
            return tuple(x) if isinstance(x, (list, tuple)) else x

        kwargs = dict(data)
        if "grid" in kwargs:
            g = {k: tup(v) for k, v in kwargs["grid"].items()}
            kwargs["grid"] = GridConfig(**g)
        if "render" in kwargs:
            kwargs["render"] = RenderConfig(**kwargs["render"])
        if "perturb" in kwargs:
            p = {k: tup(v) for k, v in kwargs["perturb"].items()}
            kwargs["perturb"] = PosePerturbation(**p)
        if "loss" in kwargs:
            kwargs["loss"] = LossConfig(**kwargs["loss"])
        if "noise" in kwargs:
            kwargs["noise"] = NoiseConfig(**kwargs["noise"])
        if "bias" in kwargs:
            b = {k: tup(v) for k, v in kwargs["bias"].items()}
            kwargs["bias"] = BiasConfig(**b)
        if "n_boxes" in kwargs:
            kwargs["n_boxes"] = tuple(kwargs["n_boxes"])
        return cls(**kwargs)

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})
