"""Discrete space configuration."""
from dataclasses import dataclass

from .basis import num_polys

MAX_K = 4


@dataclass(frozen=True)
class SpaceConfig:
    """Polynomial degrees of the HDG spaces.

    Fluxes use ``[P_k]^dim``, scalars ``P_{k+1}`` and traces ``P_k`` on each
    face.  ``stabilization`` selects the penalty ``1/h_F`` per face
    (``"face"``) or the global ``1/h`` (``"global"``).
    """

    dim: int
    k: int
    stabilization: str = "face"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not 0 <= self.k <= MAX_K:
            raise ValueError(f"k must be in [0, {MAX_K}], got {self.k}")
        if self.stabilization not in ("face", "global"):
            raise ValueError(f"unknown stabilization {self.stabilization!r}")

    @property
    def scalar_degree(self):
        return self.k + 1

    @property
    def n_flux_scalar(self):
        return num_polys(self.k, self.dim)

    @property
    def n_flux(self):
        return self.dim * self.n_flux_scalar

    @property
    def n_scalar(self):
        return num_polys(self.k + 1, self.dim)

    @property
    def n_trace(self):
        """Trace unknowns per face."""
        return num_polys(self.k, self.dim - 1)

    @property
    def n_faces_local(self):
        return self.dim + 1

    @property
    def n_trace_local(self):
        return self.n_faces_local * self.n_trace

    @property
    def quad_order(self):
        return 2 * (self.k + 1) + 2
