"""Determinism and structure of the hand-emitted SVG figures."""
from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from wrk.errors import ConfigError
from wrk.svgplot import line_plot, phase_plot

NS = "{http://www.w3.org/2000/svg}"


def parse(svg: str) -> ET.Element:
    return ET.fromstring(svg)


def test_line_plot_is_valid_svg_with_one_polyline_per_series() -> None:
    x = np.linspace(0.0, 10.0, 50)
    svg = line_plot([("one", x, np.sin(x)), ("two", x, np.cos(x))],
                    title="waves", xlabel="t", ylabel="value")
    root = parse(svg)
    assert root.tag == f"{NS}svg"
    polys = root.findall(f"{NS}polyline")
    assert len(polys) == 2
    texts = [el.text for el in root.findall(f"{NS}text")]
    assert "waves" in texts and "one" in texts and "two" in texts


def test_same_input_gives_byte_identical_svg() -> None:
    x = np.linspace(0.0, 1.0, 20)
    args = [("a", x, x**2)]
    assert line_plot(args, title="p") == line_plot(args, title="p")
    trajs = [(x, x**2), (x, 1 - x)]
    assert phase_plot(trajs) == phase_plot(trajs)


def test_constant_series_draws_horizontal_line() -> None:
    x = np.linspace(0.0, 5.0, 10)
    svg = line_plot([("level", x, np.full(10, 0.7))])
    poly = parse(svg).find(f"{NS}polyline")
    ys = {pt.split(",")[1] for pt in poly.attrib["points"].split()}
    assert len(ys) == 1


def test_plot_input_validation() -> None:
    x = np.arange(4.0)
    with pytest.raises(ConfigError):
        line_plot([])
    with pytest.raises(ConfigError):
        line_plot([("a", x, x[:-1])])
    with pytest.raises(ConfigError):
        line_plot([("a", x, np.array([0.0, 1.0, np.nan, 2.0]))])
    with pytest.raises(ConfigError):
        phase_plot([])


def test_phase_plot_markers() -> None:
    x = np.linspace(0.0, 1.0, 30)
    svg = phase_plot([(np.cos(x), np.sin(x))], points=[(0.5, 0.5, "fixed")],
                     title="plane", xlabel="u", ylabel="v")
    root = parse(svg)
    assert len(root.findall(f"{NS}circle")) == 1
    assert "fixed" in [el.text for el in root.findall(f"{NS}text")]


def test_degenerate_ranges_still_render() -> None:
    x = np.zeros(3)
    svg = line_plot([("z", x, x)])
    assert parse(svg).find(f"{NS}polyline") is not None
