"""Direction-switching laws on the unit sphere and their exact samplers.

A dissipation law carries a density ``chi`` with respect to the surface
measure of the unit sphere S^{m-1}.  Its image on the sphere of radius
c*t has density ``chi(x / (c t))`` in the same unit-sphere normalization;
every integral over the radius-c*t sphere therefore multiplies by the
surface Jacobian (c t)^{m-1} exactly once, which is done at the
integration sites and never here.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from .core import FlightParams
from .errors import DomainError
from .specfun import bessel_i0, gamma_half

__all__ = [
    "DissipationLaw",
    "UniformLaw",
    "CircularGaussianLaw",
    "law_from_config",
]

_UNIT_TOL = 1e-12


class DissipationLaw(ABC):
    """Common interface of the supported direction laws."""

    def __init__(self, params: FlightParams):
        self.params = params

    @property
    def m(self) -> int:
        return self.params.m

    @abstractmethod
    def density(self, u) -> float:
        """chi(u) for a unit vector u (surface density on S^{m-1})."""

    @abstractmethod
    def density_from_axis_cos(self, ux):
        """chi as a function of the first coordinate of the unit direction.

        Vectorized fast path for the quadrature engines; valid because
        both supported laws depend on the direction only through its
        first component (trivially for the uniform law).
        """

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` exact unit-vector samples, shape (size, m)."""

    @abstractmethod
    def config(self) -> dict:
        """JSON-serializable description used by the CLI."""

    def _check_unit(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.m,):
            raise DomainError(f"direction must be an {self.m}-vector")
        if abs(float(u @ u) - 1.0) > 2 * _UNIT_TOL:
            raise DomainError(f"direction must be a unit vector, |u|^2={u @ u}")
        return u

    def sphere_density(self, x, t: float) -> float:
        """Density chi(x/(ct)) of the scaled law on the sphere of radius c*t.

        The value is in the unit-sphere normalization described in the
        module docstring.  ``x`` must lie on the sphere to relative 1e-9.
        """
        x = np.asarray(x, dtype=float)
        ct = self.params.radius(t)
        r = float(np.linalg.norm(x))
        if abs(r - ct) > 1e-9 * ct:
            raise DomainError(f"point at radius {r} is off the sphere of radius {ct}")
        return self.density(x / r)


class UniformLaw(DissipationLaw):
    """Isotropic scattering: constant density 1/area(S^{m-1})."""

    def __init__(self, params: FlightParams):
        super().__init__(params)
        m = params.m
        self._value = gamma_half(m) / (2.0 * math.pi ** (m / 2.0))

    def density(self, u) -> float:
        self._check_unit(u)
        return self._value

    def density_from_axis_cos(self, ux):
        return np.broadcast_to(self._value, np.shape(ux)).copy() \
            if np.ndim(ux) else self._value

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        v = rng.standard_normal((size, self.m))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def config(self) -> dict:
        return {"kind": "uniform"}


class CircularGaussianLaw(DissipationLaw):
    """Planar law with density exp(k cos(theta)) / (2 pi I0(k)).

    ``k = 0`` degenerates to the uniform law on the circle; positive k
    concentrates directions around the +x1 axis.  Sampling is exact by
    rejection from the uniform envelope with acceptance exp(k(cos t - 1));
    practical for k up to ~10.
    """

    def __init__(self, params: FlightParams, k: float):
        if params.m != 2:
            raise DomainError("circular Gaussian law is planar only (m=2)")
        super().__init__(params)
        self.k = float(k)
        self._norm = 1.0 / (2.0 * math.pi * bessel_i0(self.k))

    def density(self, u) -> float:
        u = self._check_unit(u)
        return self._norm * math.exp(self.k * float(u[0]))

    def density_from_axis_cos(self, ux):
        # the argument is the cosine of an angle; clipping guards the
        # exponential against ill-conditioned geometry near rho -> 0
        ux = np.clip(np.asarray(ux, dtype=float), -1.0, 1.0)
        return self._norm * np.exp(self.k * ux)

    def sample_angles(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.k == 0.0:
            return rng.uniform(-np.pi, np.pi, size)
        out = np.empty(size)
        have = 0
        while have < size:
            want = size - have
            cand = rng.uniform(-np.pi, np.pi, int(want * 2.2) + 16)
            acc = rng.random(cand.size) < np.exp(self.k * (np.cos(cand) - 1.0))
            got = cand[acc][:want]
            out[have:have + got.size] = got
            have += got.size
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        th = self.sample_angles(rng, size)
        return np.column_stack([np.cos(th), np.sin(th)])

    def config(self) -> dict:
        return {"kind": "circular_gaussian", "k": self.k}


def law_from_config(config: dict, params: FlightParams) -> DissipationLaw:
    """Build a law from its run-config description."""
    kind = config.get("kind")
    if kind == "uniform":
        return UniformLaw(params)
    if kind == "circular_gaussian":
        if "k" not in config:
            raise DomainError("circular_gaussian law needs a concentration 'k'")
        return CircularGaussianLaw(params, float(config["k"]))
    raise DomainError(f"unknown dissipation law kind {kind!r}")
