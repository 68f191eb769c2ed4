from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import InvalidParameter


@dataclass(frozen=True)
class GlobalConfig:
    """Numerical settings shared by every module.

    ``tail_fraction`` selects the leading block of the truncated Fock space on
    which quantitative assertions are made; the outer band carries truncation
    noise because ``[Q, P] = i hbar`` cannot hold in finite dimension.
    """

    hbar: float = 1.0
    fock_dim: int = 64
    tail_fraction: float = 0.5
    tol_linalg: float = 1e-10

    def __post_init__(self):
        if not (math.isfinite(self.hbar) and self.hbar > 0):
            raise InvalidParameter(f"hbar must be positive, got {self.hbar}")
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 4:
            raise InvalidParameter(f"fock_dim must be an integer >= 4, got {self.fock_dim}")
        if not 0 < self.tail_fraction < 1:
            raise InvalidParameter(f"tail_fraction must lie in (0, 1), got {self.tail_fraction}")
        if not self.tol_linalg > 0:
            raise InvalidParameter("tol_linalg must be positive")
        object.__setattr__(self, "fock_dim", int(self.fock_dim))

    @property
    def interior(self) -> int:
        """Size of the truncation-safe leading block."""
        return math.ceil(self.tail_fraction * self.fock_dim)

    def replace(self, **changes) -> "GlobalConfig":
        return GlobalConfig(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)
