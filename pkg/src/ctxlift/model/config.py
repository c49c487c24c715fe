from dataclasses import asdict, dataclass, field, fields

VARIANTS = ("step0", "step1", "step2", "step3")


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    """Hyperparameters of the lifting network.

    ``variant`` selects the ablation rung: ``step0`` lifts bare 2D joints,
    ``step1`` concatenates context sampled at the detections, ``step2`` adds
    pose-context fusion and ``step3`` adds deformable context extraction.
    ``active_levels`` masks pyramid levels out of the model entirely.
    """

    n_joints: int = 17
    n_levels: int = 4
    dim: int = 128
    n_deform_layers: int = 4
    n_fusion_layers: int = 4
    n_joint_layers: int = 4
    attention_heads: int = 8
    deform_heads: int = 4
    deform_points: int = 4
    variant: str = "step3"
    frames: int = 1
    n_temporal_layers: int = 1
    active_levels: tuple = (True, True, True, True)
    level_channels: tuple = (48, 48, 48, 48)
    mlp_ratio: int = 2
    output_scale: float = 1000.0
    offset_lr_scale: float = 0.1
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.active_levels = tuple(bool(a) for a in self.active_levels)
        self.level_channels = tuple(int(c) for c in self.level_channels)
        self.validate()

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.n_joints < 1 or self.n_levels < 1 or self.dim < 2:
            raise ConfigError("n_joints, n_levels must be >= 1 and dim >= 2")
        if self.dim % self.attention_heads:
            raise ConfigError("dim must be divisible by attention_heads")
        if self.dim % self.deform_heads:
            raise ConfigError("dim must be divisible by deform_heads")
        if self.deform_points < 1:
            raise ConfigError("deform_points must be >= 1")
        if min(self.n_deform_layers, self.n_fusion_layers, self.n_joint_layers,
               self.n_temporal_layers) < 0:
            raise ConfigError("layer counts must be >= 0")
        if self.frames < 1 or self.frames % 2 == 0:
            raise ConfigError("frames must be a positive odd number")
        if len(self.active_levels) != self.n_levels or len(self.level_channels) != self.n_levels:
            raise ConfigError("active_levels and level_channels need one entry per level")
        if self.uses_context and not any(self.active_levels):
            raise ConfigError("context variants need at least one active level")

    @property
    def uses_context(self):
        return self.variant != "step0"

    @property
    def levels(self):
        """Indices of active pyramid levels."""
        return [l for l, on in enumerate(self.active_levels) if on] if self.uses_context else []

    @property
    def tokens_per_joint(self):
        return 1 + len(self.levels)

    @property
    def joint_dim(self):
        return self.tokens_per_joint * self.dim

    def replace(self, **changes):
        data = self.to_dict()
        data.update(changes)
        return ModelConfig.from_dict(data)

    def to_dict(self):
        d = asdict(self)
        d.pop("extra")
        d["active_levels"] = list(self.active_levels)
        d["level_channels"] = list(self.level_channels)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)} - {"extra"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("active_levels", "level_channels"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def desk_config(variant="step3", **overrides):
    """Reduced-width configuration used by the desk-scale ablation runs."""
    base = dict(dim=8, n_deform_layers=1, n_fusion_layers=1, n_joint_layers=1,
                attention_heads=2, deform_heads=2, deform_points=2, variant=variant)
    base.update(overrides)
    return ModelConfig(**base)
