"""Point-in-polygon tests and named region sets loaded from GeoJSON.

Containment uses even-odd ray casting (horizontal ray eastward, odd crossing
count means inside) with points on any ring edge or vertex counted as inside.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .errors import DegeneratePolygon, MissingColumn


def _on_segment(x: float, y: float, x1: float, y1: float, x2: float, y2: float) -> bool:
    """True if (x, y) lies exactly on the closed segment (x1,y1)-(x2,y2)."""
    cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
    if cross != 0.0:
        return False
    return min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2)


def point_in_ring(x: float, y: float, ring: Sequence[Sequence[float]]) -> bool:
    """Even-odd crossing test for one linear ring; boundary counts as inside."""
    inside = False
    n = len(ring)
    j = n - 1
    for i in range(n):
        x1, y1 = ring[i][0], ring[i][1]
        x2, y2 = ring[j][0], ring[j][1]
        if _on_segment(x, y, x1, y1, x2, y2):
            return True
        if (y1 > y) != (y2 > y) and x < (x2 - x1) * (y - y1) / (y2 - y1) + x1:
            inside = not inside
        j = i
    return inside


def point_in_polygon(x: float, y: float, rings: Sequence[Sequence[Sequence[float]]]) -> bool:
    """Even-odd test over all rings (exterior first, then holes).

    Crossing parity across every ring resolves holes; a point on any ring
    boundary is inside.
    """
    crossings = 0
    for ring in rings:
        n = len(ring)
        j = n - 1
        for i in range(n):
            x1, y1 = ring[i][0], ring[i][1]
            x2, y2 = ring[j][0], ring[j][1]
            if _on_segment(x, y, x1, y1, x2, y2):
                return True
            if (y1 > y) != (y2 > y) and x < (x2 - x1) * (y - y1) / (y2 - y1) + x1:
                crossings += 1
            j = i
    return crossings % 2 == 1


def _distinct_vertices(ring: Sequence[Sequence[float]]) -> int:
    pts = {(float(p[0]), float(p[1])) for p in ring}
    return len(pts)


@dataclass(frozen=True)
class Region:
    name: str
    rings: tuple[tuple[tuple[float, float], ...], ...]

    def contains(self, lon: float, lat: float) -> bool:
        return point_in_polygon(lon, lat, self.rings)


class RegionSet:
    """Ordered named polygons; assignment is first match in file order."""

    def __init__(self, regions: Sequence[Region]):
        for region in regions:
            for ring in region.rings:
                if _distinct_vertices(ring) < 3:
                    raise DegeneratePolygon(
                        f"region {region.name!r} has a ring with fewer than 3 distinct vertices"
                    )
        self.regions = tuple(regions)

    def __len__(self) -> int:
        return len(self.regions)

    def assign(self, lon: float, lat: float) -> str | None:
        for region in self.regions:
            if region.contains(lon, lat):
                return region.name
        return None

    @classmethod
    def from_geojson(cls, path: str) -> "RegionSet":
        """Load a FeatureCollection of Polygons carrying a ``name`` property."""
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("type") != "FeatureCollection":
            raise MissingColumn("regions file must be a GeoJSON FeatureCollection")
        regions = []
        for feature in doc.get("features", []):
            geom = feature.get("geometry") or {}
            if geom.get("type") != "Polygon":
                raise MissingColumn(
                    f"unsupported geometry type {geom.get('type')!r}; expected Polygon"
                )
            name = (feature.get("properties") or {}).get("name")
            if not name:
                raise MissingColumn("every region feature needs a 'name' property")
            rings = tuple(
                tuple((float(x), float(y)) for x, y in ring) for ring in geom["coordinates"]
            )
            regions.append(Region(name=str(name), rings=rings))
        return cls(regions)
