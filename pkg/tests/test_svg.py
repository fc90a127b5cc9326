import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qdspin.svg import heatmap, line_plot

NS = "{http://www.w3.org/2000/svg}"


def test_line_plot_is_well_formed():
    doc = line_plot(np.linspace(0, 1, 20), np.sin(np.arange(20)), "x (s)", "y", "title & more")
    root = ET.fromstring(doc)
    assert root.tag == NS + "svg"
    assert len(root.findall(f".//{NS}polyline")) == 1
    assert "title &amp; more" in doc


def test_heatmap_has_one_cell_per_value():
    z = np.arange(12.0).reshape(3, 4)
    root = ET.fromstring(heatmap([1, 2, 3, 4], [10, 20, 30], z, "x", "y", "z", "map"))
    cells = [r for r in root.iter(NS + "rect") if r.get("class") == "cell"]
    assert len(cells) == 12


def test_heatmap_shape_mismatch():
    with pytest.raises(ValueError):
        heatmap([1, 2], [1, 2], np.zeros((3, 2)), "x", "y", "z", "t")


def test_constant_data_does_not_divide_by_zero():
    ET.fromstring(line_plot([0, 1, 2], [1, 1, 1], "x", "y", "t"))
    ET.fromstring(heatmap([0, 1], [0, 1], np.ones((2, 2)), "x", "y", "z", "t"))
