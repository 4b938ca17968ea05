from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError


@dataclass(frozen=True)
class Spectrum:
    """An ``(x, y, sigma)`` series, sorted by x on construction.

    ``sigma_known`` records whether the uncertainties are real (supplied or
    Poisson) or the unit default, which decides whether fit covariances are
    rescaled by the reduced chi-square.
    """

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray | None = None
    sigma_known: bool | None = None
    x_unit: str = ""
    y_unit: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.size != y.size:
            raise InputError(f"x and y lengths differ ({x.size} vs {y.size})")
        if x.size == 0:
            raise InputError("empty series")
        if self.sigma is None:
            sigma = np.ones_like(y)
            known = False if self.sigma_known is None else self.sigma_known
        else:
            sigma = np.asarray(self.sigma, dtype=float).ravel()
            if sigma.size != y.size:
                raise InputError("sigma length does not match y")
            known = True if self.sigma_known is None else self.sigma_known
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(sigma))):
            raise InputError("series contains non-finite values")
        if np.any(sigma <= 0):
            raise InputError("sigma must be > 0")
        order = np.argsort(x, kind="stable")
        x, y, sigma = x[order], y[order], sigma[order]
        if np.any(np.diff(x) <= 0):
            raise InputError("x values must be distinct")
        for name, arr in (("x", x), ("y", y), ("sigma", sigma)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "sigma_known", bool(known))

    @classmethod
    def counts(cls, x, y, **kwargs):
        """Counting data with Poisson ``sigma = sqrt(max(y, 1))``."""
        y = np.asarray(y, dtype=float)
        return cls(x, y, np.sqrt(np.maximum(y, 1.0)), True, **kwargs)

    def __len__(self):
        return self.x.size

    def with_x(self, x):
        return Spectrum(x, self.y, self.sigma, self.sigma_known, self.x_unit, self.y_unit, dict(self.metadata))
