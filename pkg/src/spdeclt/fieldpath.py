"""The FieldPath container (one trajectory of the field on the grid)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec


@dataclass
class PathFlags:
    """Validity monitors for one trajectory; flags only ever turn on."""

    range_exit: bool = False
    exit_step: int = -1
    clamp_count: int = 0
    clamp_excess: bool = False
    monotone_violations: int = 0
    weighted_norm_sup: float = 0.0

    @property
    def valid(self) -> bool:
        return not (self.range_exit or self.clamp_excess)

    def to_dict(self) -> dict:
        return {
            "range_exit": self.range_exit, "exit_step": self.exit_step,
            "clamp_count": self.clamp_count, "clamp_excess": self.clamp_excess,
            "monotone_violations": self.monotone_violations,
            "weighted_norm_sup": self.weighted_norm_sup,
        }


@dataclass
class FieldPath:
    """Snapshots u(t_n, y_j), shape (n_t + 1, n_y), plus run metadata."""

    spec: GridSpec
    snapshots: np.ndarray
    kernel_kind: str = "none"
    eps: float = 0.0
    master_seed: int | None = None
    replicate_index: int | None = None
    flags: PathFlags = field(default_factory=PathFlags)
    centered: bool = False

    def __post_init__(self):
        self.snapshots = np.asarray(self.snapshots, dtype=float)
        if self.snapshots.shape != (self.spec.n_t + 1, self.spec.n_y):
            raise ValueError(
                f"snapshots shape {self.snapshots.shape} does not match grid "
                f"({self.spec.n_t + 1}, {self.spec.n_y})"
            )

    def at(self, n: int) -> np.ndarray:
        return self.snapshots[n]

    def metadata(self) -> dict:
        return {
            "kernel": self.kernel_kind, "eps": self.eps, "master_seed": self.master_seed,
            "replicate_index": self.replicate_index, "centered": self.centered,
            "flags": self.flags.to_dict(),
        }
