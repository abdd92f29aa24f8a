import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from histkernel.geometry import Polygon

settings.register_profile(
    "geometry",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("geometry")


def rect(w: float, h: float, x0: float = 0.0, y0: float = 0.0) -> Polygon:
    return Polygon([(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)])


@st.composite
def convex_polygons(draw, min_extent: float = 4.0, max_extent: float = 60.0):
    """Convex hulls of random point clouds; always simple."""
    n = draw(st.integers(min_value=4, max_value=12))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    extent = draw(st.floats(min_value=min_extent, max_value=max_extent))
    pts = rng.uniform(0.0, extent, size=(n, 2)) + 10.0
    hull = ConvexHull(pts)
    poly = Polygon(pts[hull.vertices])
    if poly.area < 2.0:
        rng2 = np.random.default_rng(seed + 1)
        pts = rng2.uniform(0.0, max_extent, size=(8, 2)) + 10.0
        poly = Polygon(pts[ConvexHull(pts).vertices])
    return poly


@st.composite
def star_polygons(draw):
    """Star-shaped rings: jittered angles around an interior center.

    Angular gaps stay below pi so the center remains inside and the ring is
    simple by the sorted-angle argument.
    """
    n = draw(st.integers(min_value=3, max_value=24))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    spacing = 2.0 * np.pi / n
    angles = np.arange(n) * spacing + rng.uniform(-0.4, 0.4, n) * spacing
    radii = rng.uniform(3.0, 30.0, n)
    pts = np.column_stack([50 + radii * np.cos(angles), 50 + radii * np.sin(angles)])
    return Polygon(pts)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
