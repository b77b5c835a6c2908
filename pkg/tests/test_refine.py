import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multilens.errors import InputError
from multilens.labels import BOUNDING_BOX, POLYGON, LabelSet, Shape, match_and_score, translate_labels
from multilens.raster import Displacement
from multilens.refine import (
    CalibrationPair,
    RefineConfig,
    candidate_grid,
    refine_displacement,
)
from oracles import star_polygon


def box_scene(rng, n=12, width=640, height=480):
    shapes = []
    for i in range(n):
        x, y = rng.uniform(80, width - 120), rng.uniform(80, height - 120)
        shapes.append(Shape.box(f"o{i}", x, y, x + rng.uniform(10, 30), y + rng.uniform(10, 30)))
    return LabelSet(width, height, tuple(shapes))


def poly_scene(rng, n=8):
    shapes = tuple(
        Shape(f"o{i}", POLYGON, tuple(map(tuple, star_polygon(rng, 100 + 60 * i, 200, 12, 10))))
        for i in range(n)
    )
    return LabelSet(640, 480, shapes)


def pairs_for(scenes, d):
    return [CalibrationPair(s, translate_labels(s, d)) for s in scenes]


class TestConfig:
    def test_defaults(self):
        cfg = RefineConfig()
        assert cfg.candidates_per_scale == 121
        assert cfg.budget == 364

    def test_flags_accepted(self):
        assert RefineConfig(kind="mask").kind == POLYGON
        assert RefineConfig(kind="bb").kind == BOUNDING_BOX

    @pytest.mark.parametrize(
        "kw", [dict(n=0), dict(scales=()), dict(scales=(1, 1)), dict(scales=(0.1, 1)), dict(kind="x")]
    )
    def test_rejects(self, kw):
        with pytest.raises(InputError):
            RefineConfig(**kw)


class TestGrid:
    def test_size_and_center(self):
        g = candidate_grid(Displacement(-52.0, 47.0), 5, 1.0)
        assert len(g) == 121
        assert g[60] == Displacement(-52.0, 47.0)
        assert g[0] == Displacement(-57.0, 42.0)
        assert g[1] == Displacement(-56.0, 42.0)

    def test_n1(self):
        assert len(candidate_grid(Displacement(0, 0), 1, 1.0)) == 9

    def test_fine_span(self):
        g = candidate_grid(Displacement(-52.0, 47.0), 5, 0.1)
        xs = sorted({d.dx for d in g})
        assert xs[0] == pytest.approx(-52.5) and xs[-1] == pytest.approx(-51.5)
        assert len(xs) == 11

    def test_rejects(self):
        with pytest.raises(InputError):
            candidate_grid(Displacement(0, 0), 0, 1.0)
        with pytest.raises(InputError):
            candidate_grid(Displacement(0, 0), 2, 0.0)


class TestRefine:
    def test_recovers_fractional(self, rng):
        truth = Displacement(-52.05, 47.2)
        pairs = pairs_for([box_scene(rng) for _ in range(3)], truth)
        out = refine_displacement(Displacement(-51.85, 47.02), pairs)
        assert abs(out.displacement.dx - truth.dx) <= 0.01
        assert abs(out.displacement.dy - truth.dy) <= 0.01
        assert out.mean_iou >= 0.999

    def test_fixed_point(self, rng):
        truth = Displacement(13.0, -7.0)
        pairs = pairs_for([box_scene(rng)], truth)
        out = refine_displacement(truth, pairs)
        assert out.displacement == truth and out.mean_iou == 1.0

    def test_matches_brute_force(self, rng):
        truth = Displacement(20.37, -4.0)
        pairs = pairs_for([box_scene(rng, n=6)], truth)
        out = refine_displacement(Displacement(20.0, -4.0), pairs)

        # exhaustive oracle on the 0.01 lattice of the first scale's reach
        def score(d):
            return match_and_score(translate_labels(pairs[0].source, d), pairs[0].target).mean_iou

        best = max(
            score(Displacement(20.0 + i / 100, -4.0 + j / 100))
            for i in range(-60, 61, 1)
            for j in (-1, 0, 1)
        )
        assert out.mean_iou >= best - 1e-9
        assert abs(out.displacement.dx - truth.dx) <= 0.01

    def test_polygons(self, rng):
        truth = Displacement(4.3, -2.6)
        pairs = pairs_for([poly_scene(rng)], truth)
        out = refine_displacement(Displacement(4.0, -2.0), pairs, RefineConfig(kind="mask"))
        assert abs(out.displacement.dx - truth.dx) <= 0.1
        assert abs(out.displacement.dy - truth.dy) <= 0.1
        assert out.mean_iou >= 0.97

    def test_budget_and_trace(self, rng):
        pairs = pairs_for([box_scene(rng)], Displacement(3.3, 1.1))
        stages = []
        out = refine_displacement(Displacement(3.0, 1.4), pairs, on_stage=stages.append)
        assert out.evaluations == 1 + 3 * 121
        assert [r.stage for r in out.trace] == [0, 1, 2, 3]
        assert [r.scale for r in out.trace] == [None, 1.0, 0.1, 0.01]
        assert stages == out.trace
        assert out.elapsed_ms >= 0

    def test_custom_budget(self, rng):
        pairs = pairs_for([box_scene(rng)], Displacement(3.3, 1.1))
        cfg = RefineConfig(n=2, scales=(0.5, 0.05))
        assert refine_displacement(Displacement(3, 1), pairs, cfg).evaluations == 1 + 2 * 25

    def test_deterministic(self, rng):
        pairs = pairs_for([box_scene(rng), box_scene(rng)], Displacement(-7.77, 9.12))
        a = refine_displacement(Displacement(-7.5, 9.0), pairs)
        b = refine_displacement(Displacement(-7.5, 9.0), pairs)
        assert a.displacement == b.displacement and a.mean_iou == b.mean_iou

    def test_idempotent(self, rng):
        pairs = pairs_for([box_scene(rng)], Displacement(5.55, -3.21))
        first = refine_displacement(Displacement(5.0, -3.0), pairs)
        second = refine_displacement(first.displacement, pairs)
        assert second.mean_iou >= first.mean_iou
        assert abs(second.displacement.dx - first.displacement.dx) <= 0.01
        assert abs(second.displacement.dy - first.displacement.dy) <= 0.01

    def test_empty_inputs(self, rng):
        src = box_scene(rng)
        with pytest.raises(InputError):
            refine_displacement(Displacement(0, 0), [])
        with pytest.raises(InputError):
            refine_displacement(Displacement(0, 0), [CalibrationPair(src, LabelSet(640, 480))])
        with pytest.raises(InputError):
            refine_displacement(Displacement(0, 0), [CalibrationPair(LabelSet(640, 480), src)])
        with pytest.raises(InputError):
            refine_displacement(Displacement(math.nan, 0), [CalibrationPair(src, src)])

    @given(
        st.floats(-30, 30), st.floats(-30, 30), st.floats(-4, 4), st.floats(-4, 4),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=25, deadline=None)
    def test_invariants(self, tx, ty, ex, ey, seed):
        g = np.random.default_rng(seed)
        pairs = pairs_for([box_scene(g, n=5)], Displacement(tx, ty))
        init = Displacement(tx + ex, ty + ey)
        cfg = RefineConfig()
        out = refine_displacement(init, pairs, cfg)
        ious = [r.mean_iou for r in out.trace]
        assert all(b >= a for a, b in zip(ious, ious[1:]))
        assert out.evaluations == cfg.budget
        reach = cfg.n * sum(cfg.scales) + 0.5 * cfg.scales[0] + 1e-9
        assert abs(out.displacement.dx - init.dx) <= reach
        assert abs(out.displacement.dy - init.dy) <= reach
        assert 0 <= out.mean_iou <= 1
