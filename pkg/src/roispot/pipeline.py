"""Joint configuration and end-to-end helpers."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

from .core import FeatureVolume, FrameGeometry, ValidationError
from .evaluation import EvalConfig
from .roi import RoiConfig, RoiTrack, select_rois
from .saliency import SaliencyConfig, build_saliency
from .spotting import NmsConfig


def _section(cls, values):
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ValidationError(f"{cls.__name__} section must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    if "tolerances" in values:
        values = dict(values, tolerances=tuple(values["tolerances"]))
    try:
        return cls(**values)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


@dataclass
class _GeometryKeys:
    # partial geometry override; unspecified sides keep their defaults
    high_w: int = None
    high_h: int = None
    low_w: int = None
    low_h: int = None

    @property
    def values(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class PipelineConfig:
    saliency: SaliencyConfig = field(default_factory=SaliencyConfig)
    roi: RoiConfig = field(default_factory=RoiConfig)
    nms: NmsConfig = field(default_factory=NmsConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    geometry: FrameGeometry = field(default_factory=lambda: FrameGeometry(448, 448, 224, 224))

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        sections = {"saliency": SaliencyConfig, "roi": RoiConfig, "nms": NmsConfig,
                    "eval": EvalConfig}
        unknown = set(doc) - set(sections) - {"geometry", "paths"}
        if unknown:
            raise ValidationError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {k: _section(c, doc.get(k)) for k, c in sections.items() if k in doc}
        if "geometry" in doc:
            base = cls().geometry
            kwargs["geometry"] = replace(base, **_section(_GeometryKeys, doc["geometry"]).values)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["nms"]["mode"] = self.nms.mode.value
        d["eval"]["tolerances"] = list(self.eval.tolerances)
        return d

    def updated(self, **sections) -> "PipelineConfig":
        """Copy with individual fields overridden, e.g. ``updated(roi={"tau": 0.3})``."""
        new = {}
        for name, changes in sections.items():
            if changes:
                new[name] = replace(getattr(self, name), **changes)
        return replace(self, **new)


def clip_rois(fv: FeatureVolume, cfg: PipelineConfig = PipelineConfig(), threads: int = 1):
    """Saliency volume and RoI track for one clip of features."""
    sv = build_saliency(fv, cfg.saliency)
    return sv, select_rois(sv, cfg.roi, cfg.geometry, threads=threads)
