"""Local equirectangular projection between (lat, lon) degrees and planar metres."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6_371_008.8


@dataclass(frozen=True)
class LocalProjection:
    lat0: float
    lon0: float

    @classmethod
    def about(cls, lat, lon) -> "LocalProjection":
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        return cls(float(lat.mean()), float(lon.mean()))

    @property
    def _kx(self) -> float:
        return EARTH_RADIUS_M * np.pi / 180.0 * np.cos(np.radians(self.lat0))

    @property
    def _ky(self) -> float:
        return EARTH_RADIUS_M * np.pi / 180.0

    def forward(self, lat, lon):
        """(lat, lon) in degrees -> (x, y) in metres east/north of the origin."""
        x = (np.asarray(lon, dtype=float) - self.lon0) * self._kx
        y = (np.asarray(lat, dtype=float) - self.lat0) * self._ky
        return x, y

    def inverse(self, x, y):
        lat = np.asarray(y, dtype=float) / self._ky + self.lat0
        lon = np.asarray(x, dtype=float) / self._kx + self.lon0
        return lat, lon
