"""Control-point encoding of input signals.

An input signal is described by a small number of control points spread
uniformly over the simulation horizon; concretization turns the control-point
vector into a piecewise-constant signal.  All types here are immutable value
objects and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SignalSpec",
    "InputSpec",
    "TestInput",
    "segment_interval",
    "value_at",
    "random_input",
]


@dataclass(frozen=True)
class SignalSpec:
    """One piecewise-constant input signal described by control points."""

    name: str
    n_points: int
    range_lo: float
    range_hi: float
    horizon: float
    interpolation: str = "piecewise-constant"

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError(f"{self.name}: n_points must be >= 1")
        if not self.range_lo < self.range_hi:
            raise ValueError(f"{self.name}: range_lo must be < range_hi")
        if not self.horizon > 0:
            raise ValueError(f"{self.name}: horizon must be positive")
        if self.interpolation != "piecewise-constant":
            raise ValueError(
                f"unsupported interpolation {self.interpolation!r}; "
                "only 'piecewise-constant' is supported"
            )

    @property
    def width(self) -> float:
        """Width of the admissible value range."""
        return self.range_hi - self.range_lo


@dataclass(frozen=True)
class InputSpec:
    """Ordered tuple of signals sharing one horizon."""

    signals: tuple[SignalSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "signals", tuple(self.signals))
        if not self.signals:
            raise ValueError("InputSpec needs at least one signal")
        horizons = {s.horizon for s in self.signals}
        if len(horizons) != 1:
            raise ValueError(f"signals disagree on horizon: {sorted(horizons)}")
        names = [s.name for s in self.signals]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate signal names in {names}")

    @property
    def horizon(self) -> float:
        return self.signals[0].horizon

    @property
    def dimension(self) -> int:
        """Total feature dimension: sum of control-point counts."""
        return sum(s.n_points for s in self.signals)

    def signal(self, name: str) -> SignalSpec:
        for s in self.signals:
            if s.name == name:
                return s
        raise KeyError(f"unknown signal {name!r}")

    def feature_names(self) -> list[str]:
        """Flat column names, signal by signal: ``<signal>_cp<j>``."""
        return [f"{s.name}_cp{j}" for s in self.signals for j in range(s.n_points)]

    def feature_targets(self) -> list[tuple[str, int]]:
        """(signal name, control-point index) for each flat feature."""
        return [(s.name, j) for s in self.signals for j in range(s.n_points)]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-feature (lo, hi) arrays in flat feature order."""
        lo = np.array([s.range_lo for s in self.signals for _ in range(s.n_points)])
        hi = np.array([s.range_hi for s in self.signals for _ in range(s.n_points)])
        return lo, hi


@dataclass(frozen=True)
class TestInput:
    """A concrete assignment of values to every control point.

    ``values`` maps signal name to a float array with one entry per control
    point.  Range containment is checked on construction.
    """

    __test__ = False  # not a pytest class, despite the name

    values: dict[str, np.ndarray]
    spec: InputSpec = field(compare=False)

    def __post_init__(self):
        frozen = {}
        for s in self.spec.signals:
            if s.name not in self.values:
                raise ValueError(f"missing values for signal {s.name!r}")
            v = np.asarray(self.values[s.name], dtype=float)
            if v.shape != (s.n_points,):
                raise ValueError(
                    f"{s.name}: expected {s.n_points} control points, got {v.shape}"
                )
            if np.any(v < s.range_lo) or np.any(v > s.range_hi):
                raise ValueError(
                    f"{s.name}: control points outside [{s.range_lo}, {s.range_hi}]"
                )
            v.setflags(write=False)
            frozen[s.name] = v
        if set(self.values) - {s.name for s in self.spec.signals}:
            raise ValueError("values reference signals not in the spec")
        object.__setattr__(self, "values", frozen)

    def as_vector(self) -> np.ndarray:
        """Flat feature vector, signal by signal, point by point."""
        return np.concatenate([self.values[s.name] for s in self.spec.signals])

    @classmethod
    def from_vector(cls, spec: InputSpec, x) -> "TestInput":
        x = np.asarray(x, dtype=float)
        if x.shape != (spec.dimension,):
            raise ValueError(f"expected vector of length {spec.dimension}, got {x.shape}")
        values, k = {}, 0
        for s in spec.signals:
            values[s.name] = x[k : k + s.n_points].copy()
            k += s.n_points
        return cls(values=values, spec=spec)


def segment_interval(spec: SignalSpec, j: int) -> tuple[float, float]:
    """Time interval owned by control point ``j``.

    The horizon is cut into ``n_points`` equal-width segments; segment ``j``
    covers ``[j*h/n, (j+1)*h/n]``.
    """
    if not 0 <= j < spec.n_points:
        raise IndexError(f"control point index {j} out of range [0, {spec.n_points})")
    w = spec.horizon / spec.n_points
    return (j * w, (j + 1) * w)


def value_at(inp: TestInput, spec: InputSpec, signal: str, t: float) -> float:
    """Value of the concretized piecewise-constant signal at time ``t``.

    Segment ``j`` owns ``[t_lo, t_hi)``; the final segment also owns its right
    endpoint so the signal is total over ``[0, horizon]``.
    """
    sig = spec.signal(signal)
    if not 0 <= t <= sig.horizon:
        raise ValueError(f"t={t} outside [0, {sig.horizon}]")
    j = min(int(t * sig.n_points / sig.horizon), sig.n_points - 1)
    return float(inp.values[signal][j])


def sample_channels(inp: TestInput, spec: InputSpec, times: np.ndarray) -> dict[str, np.ndarray]:
    """Concretize every signal at the given sample instants (vectorized)."""
    times = np.asarray(times, dtype=float)
    out = {}
    for s in spec.signals:
        idx = np.minimum((times * s.n_points / s.horizon).astype(int), s.n_points - 1)
        out[s.name] = inp.values[s.name][idx]
    return out


def random_input(spec: InputSpec, rng: np.random.Generator) -> TestInput:
    """Draw each control point uniformly from its signal's range."""
    values = {
        s.name: rng.uniform(s.range_lo, s.range_hi, size=s.n_points)
        for s in spec.signals
    }
    return TestInput(values=values, spec=spec)
