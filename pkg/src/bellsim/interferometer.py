"""Single-photon two-beamsplitter interferometer with an optional absorber.

The second beamsplitter has the complementary reflectivity of the first,
which makes one output port fully dark (complete destructive interference)
at zero phase for every input reflectivity. Placing a perfect absorber in
the reflected arm destroys the interference: the photon is either absorbed
(probability = the arm intensity) or reaches the output ports, where the
dark port can now fire; a dark-port click therefore certifies the absorber
is present even though the photon provably never reached it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .streams import batch_uniforms

OUTCOMES = ("exploded", "dark_port", "bright_port")


@dataclass(frozen=True)
class InterferometerSpec:
    reflectivity: float = 0.5
    bomb_present: bool = False
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.reflectivity < 1.0):
            raise ValueError(
                f"reflectivity must lie strictly inside (0, 1), got {self.reflectivity}"
            )
        if not math.isfinite(self.phase):
            raise ValueError(f"phase must be finite, got {self.phase!r}")


def _beamsplitter(reflectivity: float) -> np.ndarray:
    t = math.sqrt(1.0 - reflectivity)
    r = math.sqrt(reflectivity)
    return np.array([[t, 1j * r], [1j * r, t]], dtype=np.complex128)


def port_probabilities(spec: InterferometerSpec) -> dict[str, float]:
    """Exact outcome probabilities by amplitude propagation."""
    amps = _beamsplitter(spec.reflectivity) @ np.array([1.0, 0.0], dtype=np.complex128)
    exploded = 0.0
    if spec.bomb_present:
        # Perfect absorber in the reflected arm: a projective which-path
        # measurement that removes that arm's amplitude.
        exploded = float(abs(amps[1]) ** 2)
        amps = np.array([amps[0], 0.0], dtype=np.complex128)
    amps[0] *= np.exp(1j * spec.phase)
    out = _beamsplitter(1.0 - spec.reflectivity) @ amps
    return {
        "exploded": exploded,
        "dark_port": float(abs(out[0]) ** 2),
        "bright_port": float(abs(out[1]) ** 2),
    }


def run_bomb_trials(spec: InterferometerSpec, trials: int, seed: int) -> dict[str, float]:
    """Empirical outcome frequencies from i.i.d. sampling, one stream per trial."""
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    probs = port_probabilities(spec)
    cdf = np.cumsum([probs[name] for name in OUTCOMES])
    u = batch_uniforms(seed, np.arange(trials, dtype=np.uint64), 1)[:, 0]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(OUTCOMES) - 1)
    tally = np.bincount(idx, minlength=len(OUTCOMES))
    return {name: float(tally[i] / trials) for i, name in enumerate(OUTCOMES)}
