import json

import numpy as np
import pytest

from modeboost.errors import DegeneratePolygon, MissingColumn
from modeboost.geo import Region, RegionSet, point_in_polygon, point_in_ring

from oracles import winding_number_inside

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]


def test_point_inside_unit_square():
    assert point_in_ring(0.5, 0.5, UNIT_SQUARE)


def test_point_outside():
    assert not point_in_ring(2.0, 2.0, UNIT_SQUARE)


def test_vertex_counts_as_inside():
    assert point_in_ring(0.0, 0.0, UNIT_SQUARE)
    assert point_in_ring(1.0, 1.0, UNIT_SQUARE)


def test_edge_counts_as_inside():
    assert point_in_ring(0.5, 0.0, UNIT_SQUARE)
    assert point_in_ring(1.0, 0.5, UNIT_SQUARE)


def test_hole_is_excluded():
    hole = [(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75), (0.25, 0.25)]
    rings = [UNIT_SQUARE, hole]
    assert not point_in_polygon(0.5, 0.5, rings)
    assert point_in_polygon(0.1, 0.1, rings)
    # On the hole boundary: the inclusive boundary rule applies.
    assert point_in_polygon(0.25, 0.5, rings)


def _random_ring(rng, n_vertices):
    """Star-shaped polygon around a random center (always simple)."""
    angles = np.sort(rng.uniform(0, 2 * np.pi, n_vertices))
    radii = rng.uniform(0.2, 1.0, n_vertices)
    cx, cy = rng.uniform(-2, 2, 2)
    pts = [(cx + r * np.cos(a), cy + r * np.sin(a)) for a, r in zip(angles, radii)]
    return pts + [pts[0]]


def test_agrees_with_winding_number_oracle_on_random_points():
    rng = np.random.default_rng(7)
    for trial in range(4):
        ring = _random_ring(rng, 12)
        xs = rng.uniform(-3, 3, 10_000)
        ys = rng.uniform(-3, 3, 10_000)
        for x, y in zip(xs, ys):
            assert point_in_ring(x, y, ring) == winding_number_inside(x, y, ring[:-1])


def test_first_match_assignment_order():
    a = Region("a", ((tuple((x, y) for x, y in UNIT_SQUARE),)))
    shifted = [(x + 0.5, y) for x, y in UNIT_SQUARE]
    b = Region("b", ((tuple(shifted),)))
    rs = RegionSet([a, b])
    # Overlap region [0.5, 1] x [0, 1] belongs to the first polygon in order.
    assert rs.assign(0.75, 0.5) == "a"
    assert rs.assign(1.25, 0.5) == "b"
    assert rs.assign(5.0, 5.0) is None


def test_degenerate_polygon_rejected():
    collapsed = (((0.0, 0.0), (1.0, 1.0), (0.0, 0.0), (1.0, 1.0)),)
    with pytest.raises(DegeneratePolygon):
        RegionSet([Region("broken", collapsed)])


def test_geojson_loading(tmp_path):
    doc = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {"name": "centrum"},
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[4.4, 51.9], [4.5, 51.9], [4.5, 52.0], [4.4, 52.0], [4.4, 51.9]]],
                },
            }
        ],
    }
    path = tmp_path / "regions.geojson"
    path.write_text(json.dumps(doc))
    rs = RegionSet.from_geojson(str(path))
    assert rs.assign(4.45, 51.95) == "centrum"


def test_geojson_requires_name(tmp_path):
    doc = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {},
                "geometry": {"type": "Polygon", "coordinates": [[[0, 0], [1, 0], [1, 1], [0, 0]]]},
            }
        ],
    }
    path = tmp_path / "regions.geojson"
    path.write_text(json.dumps(doc))
    with pytest.raises(MissingColumn):
        RegionSet.from_geojson(str(path))
