"""A single travelling-wave problem: kernel, birth function, delay and speed."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .birth import BirthFunction
from .kernels import Kernel

__all__ = ["ProblemSpec"]


@dataclass(frozen=True)
class ProblemSpec:
    """Give either ``c`` or ``eps = 1/c^2``; the other is derived.

    ``speed_offset`` is the advection velocity ``B`` when the problem came
    from an advective model, so reports can quote ``c + B``.
    """

    kernel: Kernel
    g: BirthFunction
    h: float
    q: float = 1.0
    c: Optional[float] = None
    eps: Optional[float] = None
    speed_offset: float = 0.0

    def __post_init__(self):
        if not self.h >= 0:
            raise ValueError(f"delay h must be nonnegative, got {self.h}")
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        c, eps = self.c, self.eps
        if c is None and eps is None:
            return
        if c is not None and not c > 0:
            raise ValueError(f"speed must be positive, got {c}")
        if eps is not None and not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        if c is None:
            object.__setattr__(self, "c", 1.0 / math.sqrt(eps))
        elif eps is None:
            object.__setattr__(self, "eps", 1.0 / (c * c))
        elif abs(c - 1.0 / math.sqrt(eps)) > 1e-12 * c:
            raise ValueError(f"inconsistent c={c} and eps={eps}")

    @property
    def has_speed(self) -> bool:
        return self.eps is not None

    def with_speed(self, c: float) -> "ProblemSpec":
        return ProblemSpec(self.kernel, self.g, self.h, self.q, c=c, speed_offset=self.speed_offset)

    def with_eps(self, eps: float) -> "ProblemSpec":
        return ProblemSpec(self.kernel, self.g, self.h, self.q, eps=eps, speed_offset=self.speed_offset)
