import xml.etree.ElementTree as ET

import numpy as np
import pytest

from polypack import fileio
from polypack.generators import fcc_spheres, hex_disks
from polypack.geometry import Body
from polypack.hierarchy import FillPlan, fill_interstices
from polypack.packing import InvalidPackingError, Placement, PeriodicPacking, validate
from polypack.render import render_svg


def test_round_trip_exact(tmp_path):
    pk = fill_interstices(hex_disks(1.0).packing, FillPlan(5, 1 / 32))
    path = tmp_path / "p.txt"
    fileio.write_packing(pk, path)
    back = fileio.read_packing(path)
    assert back.period == pk.period and back.bodies == pk.bodies
    assert np.array_equal(back.translations, pk.translations)
    assert np.array_equal(back.body_ref, pk.body_ref)
    assert fileio.dumps_packing(back) == path.read_text()


def test_round_trip_3d_and_boxes():
    pk = PeriodicPacking.from_placements((2.0, 2.0), [Body.box((0, 0), (1, 1)), Body.ball((0, 0), 0.2)],
                                         [Placement(0, (0, 0)), Placement(1, (1.5, 1.5))])
    for p in (pk, fcc_spheres(0.3).packing):
        back = fileio.loads_packing(fileio.dumps_packing(p))
        assert np.array_equal(back.translations, p.translations)


def test_rotations_round_trip():
    c, s = np.cos(0.4), np.sin(0.4)
    pk = PeriodicPacking((1.0, 1.0), (Body.ball((0, 0), 0.2),), [0], [[0.5, 0.5]], [[[c, -s], [s, c]]])
    text = fileio.dumps_packing(pk)
    assert "r11,r12,r21,r22" in text
    assert np.allclose(fileio.loads_packing(text).rotations, pk.rotations)


@pytest.mark.parametrize("text", [
    "",
    "not json\nbody_ref,t1,t2\n",
    '{"n": 2, "periods": [1.0], "bodies": []}\nbody_ref,t1,t2\n',
    '{"n": 2, "periods": [1.0, 1.0], "bodies": [{"kind": "ball", "center": [0, 0], "radius": 0.1}]}\n'
    "body_ref,t1\n0,0.5\n",
    '{"n": 2, "periods": [1.0, 1.0], "bodies": [{"kind": "ball", "center": [0, 0], "radius": 0.1}]}\n'
    "body_ref,t1,t2\n3,0.5,0.5\n",
    '{"n": 2, "periods": [1.0, 1.0], "bodies": [{"kind": "ball", "center": [0, 0], "radius": 0.1}]}\n'
    "body_ref,t1,t2\n0,abc,0.5\n",
    '{"n": 2, "periods": [1.0, 1.0], "bodies": [{"kind": "blob"}]}\nbody_ref,t1,t2\n',
])
def test_malformed_files(text):
    with pytest.raises(InvalidPackingError):
        fileio.loads_packing(text)


def test_missing_file(tmp_path):
    with pytest.raises(InvalidPackingError):
        fileio.read_packing(tmp_path / "nope.txt")


def test_violations_csv():
    pk = PeriodicPacking.from_placements((2.0, 2.0), [Body.ball((0, 0), 0.25)],
                                         [Placement(0, (0.1, 1.0)), Placement(0, (1.8, 1.0))])
    text = fileio.violations_csv(validate(pk))
    lines = text.splitlines()
    assert lines[0] == "i,j,offset,measure,threshold,witness"
    assert lines[1].startswith("0,1,-1 0,")


def test_svg_levels():
    pk = fill_interstices(hex_disks(1.0).packing, FillPlan(5, 1 / 32))
    svg = render_svg(pk)
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    groups = root.findall(f"{ns}g")
    assert len(groups) == 2
    assert groups[0].get("fill") != groups[1].get("fill")
    # base level: 2 disks in 9 images
    assert len(groups[0]) == 18


def test_svg_omits_fine_levels():
    pk = fill_interstices(hex_disks(1.0).packing, FillPlan(5, 1 / 32))
    svg = render_svg(pk, max_shapes=20)
    assert "omitted" in svg


def test_svg_needs_2d():
    with pytest.raises(ValueError):
        render_svg(fcc_spheres(1.0).packing)
