"""SVG rendering: panels, filters, determinism."""

import numpy as np
import pytest

from tidysim import PlotError, Table, render_plot
from tidysim.tableio import column_from_values


def aggregate_fixture():
    rows = []
    for effect in (0.2, 0.5, 0.9):
        for n in (4, 8, 12, 16):
            for outcome in ("post", "change"):
                power = min(0.05 + effect * n / 16.0
                            + (0.1 if outcome == "change" else 0.0), 1.0)
                rows.append((n, effect, outcome, power))
    n_col = [r[0] for r in rows]
    return Table({
        "sample_size": column_from_values("integer", n_col),
        "effect_size": column_from_values("real", [r[1] for r in rows]),
        "outcome": column_from_values("categorical", [r[2] for r in rows],
                                      categories=("post", "change")),
        "power": column_from_values("real", [r[3] for r in rows]),
        "power_lo": column_from_values("real", [max(r[3] - 0.05, 0.0) for r in rows]),
        "power_hi": column_from_values("real", [min(r[3] + 0.05, 1.0) for r in rows]),
    })


class TestRenderPlot:
    def test_three_facet_panels(self):
        svg = render_plot(aggregate_fixture(), x="sample_size", y="power",
                          color="outcome", facet="effect_size")
        assert svg.count("effect_size: ") == 3
        assert svg.startswith("<?xml")
        assert svg.rstrip().endswith("</svg>")

    def test_single_row_single_panel(self):
        t = aggregate_fixture().take(np.array([0]))
        svg = render_plot(t, x="sample_size", y="power")
        assert "<circle" in svg and "<line" in svg

    def test_byte_identical_across_invocations(self):
        t = aggregate_fixture()
        a = render_plot(t, x="sample_size", y="power", color="outcome",
                        facet="effect_size")
        b = render_plot(t, x="sample_size", y="power", color="outcome",
                        facet="effect_size")
        assert a == b

    def test_filter_keeps_selected_levels(self):
        svg = render_plot(aggregate_fixture(), x="sample_size", y="power",
                          facet="effect_size",
                          filters={"effect_size": ["0.2", "0.9"]})
        assert svg.count("effect_size: ") == 2

    def test_absent_filter_level_lists_available(self):
        with pytest.raises(PlotError, match="0.2"):
            render_plot(aggregate_fixture(), x="sample_size", y="power",
                        filters={"effect_size": ["0.7"]})

    def test_unknown_column_rejected(self):
        with pytest.raises(PlotError, match="available"):
            render_plot(aggregate_fixture(), x="nope", y="power")

    def test_point_ranges_use_lo_hi(self):
        t = aggregate_fixture().take(np.array([0, 1]))
        with_ranges = render_plot(t, x="sample_size", y="power")
        no_ranges = render_plot(
            Table({k: v for k, v in t.columns.items()
                   if k not in ("power_lo", "power_hi")}),
            x="sample_size", y="power")
        assert with_ranges.count("<line") > no_ranges.count("<line")

    def test_linetype_produces_dashes(self):
        svg = render_plot(aggregate_fixture(), x="sample_size", y="power",
                          color="outcome", linetype="outcome")
        assert "stroke-dasharray" in svg
