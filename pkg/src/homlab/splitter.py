"""180-degree power splitters and the Mach-Zehnder network built from two.

Port convention: the sum port carries ``(E1 + E2)/sqrt(2)`` and the
difference port ``(E1 - E2)/sqrt(2)`` for a balanced, phase-perfect splitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError
from .signals import SampledSignal, check_compatible, rotate_phase

Blocked = Literal["none", "plus_arm", "minus_arm"]


@dataclass(frozen=True)
class SplitterSpec:
    """Power splitter with transmitted power fraction ``t_power``.

    ``phase_error`` (rad) is applied between the two contributions to the
    difference port, the way a real 180-degree hybrid misses its nominal
    phase by a few degrees.
    """

    t_power: float = 0.5
    phase_error: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.t_power < 1.0:
            raise DomainError(f"t_power must lie in (0, 1), got {self.t_power!r}")

    @classmethod
    def from_ratio(cls, a: float, b: float, phase_error: float = 0.0) -> "SplitterSpec":
        """``from_ratio(49.3, 50.7)`` for a 49.3:50.7 splitter."""
        return cls(a / (a + b), phase_error)


IDEAL = SplitterSpec()


@dataclass(frozen=True)
class MziConfig:
    ps1: SplitterSpec = IDEAL
    ps2: SplitterSpec = IDEAL
    arm_phase: float = 0.0
    blocked: Blocked = "none"

    def __post_init__(self):
        if self.blocked not in ("none", "plus_arm", "minus_arm"):
            raise DomainError(f"blocked must be none, plus_arm or minus_arm, got {self.blocked!r}")


def split(e1: SampledSignal, e2: SampledSignal,
          spec: SplitterSpec = IDEAL) -> tuple[SampledSignal, SampledSignal]:
    """Return ``(e_plus, e_minus)``.

    e_plus  = sqrt(t) e1 + sqrt(1-t) e2
    e_minus = sqrt(1-t) e1 - exp(i phase_error) sqrt(t) e2
    """
    check_compatible(e1, e2)
    a = math.sqrt(spec.t_power)
    b = math.sqrt(1.0 - spec.t_power)
    e2_rot = rotate_phase(e2, spec.phase_error)
    plus = e1.with_samples(a * e1.samples + b * e2.samples)
    minus = e1.with_samples(b * e1.samples - a * e2_rot.samples)
    return plus, minus


def mzi_classical(e1: SampledSignal, e2: SampledSignal,
                  cfg: MziConfig = MziConfig()) -> tuple[SampledSignal, SampledSignal]:
    """Split, phase the minus arm by ``arm_phase``, optionally block an arm, recombine.

    With ideal splitters the outputs are ``(E+ +- exp(i theta) E-)/sqrt(2)``;
    for ``theta = 0`` and no block they reproduce ``(e1, e2)``.
    """
    plus, minus = split(e1, e2, cfg.ps1)
    minus = rotate_phase(minus, cfg.arm_phase)
    if cfg.blocked == "plus_arm":
        plus = plus.with_samples(np.zeros_like(plus.samples))
    elif cfg.blocked == "minus_arm":
        minus = minus.with_samples(np.zeros_like(minus.samples))
    return split(plus, minus, cfg.ps2)
