"""Fixed-step feedback controller baseline.

Regulates the event rate into a target band by stepping both thresholds,
falls back to lengthening the refractory dead time when threshold steps
alone do not bring a saturated stream down, and trims the low-pass
bandwidth when the noise fraction is too high.  One adjustment class per
call, ER regulation first; reaching a good operating point generally takes
several steps, which is exactly what the one-shot learned policy is
compared against.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core import BiasSettings


@dataclass(frozen=True)
class RuleControllerConfig:
    er_lo: float  # events/s band the controller regulates into
    er_hi: float
    noise_max: float  # acceptable isolated-event fraction
    step: int = 25


@dataclass(frozen=True)
class ControllerAction:
    """Full five-axis relative change, in bias tuple order."""

    d_on: int = 0
    d_off: int = 0
    d_fo: int = 0
    d_hpf: int = 0
    d_refr: int = 0

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.d_on, self.d_off, self.d_fo, self.d_hpf, self.d_refr)

    def is_zero(self) -> bool:
        return not any(self.as_tuple())

    def apply_to(self, b: BiasSettings) -> BiasSettings:
        return b.shifted(self.as_tuple())


def rule_controller_step(
    er: float,
    noise_frac: float,
    cfg: RuleControllerConfig,
    er_saturated: bool = False,
) -> ControllerAction:
    """One controller decision from the current measurements.

    ``er_saturated`` is the caller's flag that the previous threshold
    increase left the rate above the band; the refractory dead time is then
    lengthened as well (its bias moves down, which lengthens the dead time).
    """
    if er > cfg.er_hi:
        d_refr = -cfg.step if er_saturated else 0
        return ControllerAction(d_on=cfg.step, d_off=cfg.step, d_refr=d_refr)
    if er < cfg.er_lo:
        return ControllerAction(d_on=-cfg.step, d_off=-cfg.step)
    if noise_frac > cfg.noise_max:
        return ControllerAction(d_fo=-cfg.step)
    return ControllerAction()
