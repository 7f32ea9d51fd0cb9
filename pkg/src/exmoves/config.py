"""Pipeline configuration, stored as JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import FormatError
from .exemplar import ExMoveParams
from .synthetic import SyntheticSpec


@dataclass
class PipelineConfig:
    seed: int
    workers: int = 1
    train_stride: tuple[int, int, int] = (4, 4, 4)
    extract_stride: tuple[int, int, int] = (8, 8, 4)
    scales: tuple[float, ...] = (1.0, 0.75, 0.5)
    pyramid_levels: int = 3
    max_iterations: int = 10
    k_pos: int = 10
    k_neg: int = 3
    exmove_C: float = 100.0
    classifier_C: float = 1.0
    classifier_C_grid: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    cv_folds: int = 3
    pool: str = "probability"
    codebook_size: int = 64
    kmeans_max_iters: int = 100
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)

    def exmove_params(self, seed: int) -> ExMoveParams:
        return ExMoveParams(
            C=self.exmove_C,
            max_iterations=self.max_iterations,
            k_pos=self.k_pos,
            k_neg=self.k_neg,
            stride=tuple(self.train_stride),
            seed=seed,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        return json.loads(json.dumps(d))  # tuples -> lists

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        if "seed" not in data:
            raise FormatError("config: 'seed' is mandatory")
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise FormatError(f"config: unknown keys {sorted(unknown)}")
        kw = {}
        for name, value in data.items():
            if name == "synthetic":
                syn_known = {f.name for f in fields(SyntheticSpec)}
                bad = set(value) - syn_known
                if bad:
                    raise FormatError(f"config: unknown synthetic keys {sorted(bad)}")
                kw[name] = SyntheticSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in value.items()})
            elif isinstance(value, list):
                kw[name] = tuple(value)
            else:
                kw[name] = value
        cfg = cls(**kw)
        if cfg.pool not in ("probability", "raw"):
            raise FormatError(f"config: pool must be 'probability' or 'raw', got {cfg.pool!r}")
        if cfg.workers < 1:
            raise FormatError("config: workers must be >= 1")
        return cfg

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        return cls.from_dict(data)
