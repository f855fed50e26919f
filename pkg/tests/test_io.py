import json
from pathlib import Path

import numpy as np
import pytest

from pegsocket.design import Correspondence, ErrorModel, JointDesign, PegDesign, SocketDesign, validate_design
from pegsocket.io import (
    DesignFileError,
    canonical_text,
    load_design,
    load_errors,
    parse_design,
    parse_design_file,
    serialize_design,
    write_atomic,
)

GOLDEN = Path(__file__).parent / "golden"
EXPECTED = json.loads((GOLDEN / "expected_reports.json").read_text())


def _raw_design(doc):
    """Build the design straight from the document, bypassing the parser's checks."""
    p, s = doc["peg"], doc["socket"]
    return JointDesign(PegDesign(p["points"], p["tip"], p["bump_radius"]),
                       SocketDesign(s["vertices"], s["insertion_axis"]),
                       Correspondence(frozenset(tuple(x) for x in doc["correspondence"])))


def test_golden_corpus_has_ten_designs():
    assert len(EXPECTED) == 10
    assert sorted(EXPECTED) == sorted(p.stem for p in GOLDEN.glob("*.json") if p.stem != "expected_reports")


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_golden_reports(name):
    text = (GOLDEN / f"{name}.json").read_text()
    doc = json.loads(text)
    assert validate_design(_raw_design(doc)).codes == EXPECTED[name]
    if EXPECTED[name]:
        with pytest.raises(DesignFileError) as exc:
            parse_design(text)
        for code in EXPECTED[name]:
            assert code in str(exc.value)
    else:
        d, errors = parse_design_file(text)
        assert validate_design(d).ok
        assert ("errors" in doc) == (errors is not None)
        # Golden files are stored in canonical form.
        assert serialize_design(d, errors) == text


def test_round_trip_of_noncanonical_text():
    doc = json.loads((GOLDEN / "wedge_trap.json").read_text())
    messy = json.dumps(doc, separators=(",", ":"), sort_keys=False)
    canon = canonical_text(messy)
    assert canon == (GOLDEN / "wedge_trap.json").read_text()
    assert canonical_text(canon) == canon
    d = parse_design(messy)
    np.testing.assert_array_equal(d.peg.points, np.array(doc["peg"]["points"]))


def test_seven_points_cites_bound():
    doc = json.loads((GOLDEN / "v_socket.json").read_text())
    doc["peg"]["points"] = [[0.1 * k, 0.0] for k in range(7)]
    with pytest.raises(DesignFileError, match=r"\$\.peg\.points: 7 items, at most 6 allowed"):
        parse_design(json.dumps(doc))


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.update(extra=1), r"\$: Additional properties"),
    (lambda d: d["peg"].update(colour="red"), r"\$\.peg: Additional properties"),
    (lambda d: d.pop("version"), r"\$: 'version' is a required property"),
    (lambda d: d["socket"]["vertices"][1].append(0.0), r"\$\.socket\.vertices\[1\]: 3 items"),
    (lambda d: d["peg"].update(bump_radius=0), r"\$\.peg\.bump_radius"),
    (lambda d: d["correspondence"].append([5, 0]), r"\$\.correspondence\[2\]\[0\]: point 5 does not exist"),
    (lambda d: d["correspondence"].append([0, 9]), r"\$\.correspondence\[2\]\[1\]: edge 9 does not exist"),
    (lambda d: d.update(errors={"scale": 1.5}), r"\$\.errors\.scale"),
])
def test_schema_errors_are_path_qualified(mutate, where):
    doc = json.loads((GOLDEN / "v_socket.json").read_text())
    mutate(doc)
    with pytest.raises(DesignFileError, match=where):
        parse_design(json.dumps(doc))


def test_malformed_json():
    with pytest.raises(DesignFileError, match="malformed JSON at line 1"):
        parse_design(b'{"version": 1,')


def test_bytes_and_str_agree():
    text = (GOLDEN / "funnel_3.json").read_text()
    a, b = parse_design(text), parse_design(text.encode())
    np.testing.assert_array_equal(a.socket.vertices, b.socket.vertices)


def test_files_and_atomic_write(tmp_path):
    src = (GOLDEN / "funnel_4.json").read_text()
    out = tmp_path / "d.json"
    write_atomic(out, src)
    d, e = load_design(out)
    assert e == ErrorModel(0.02, 0.03, 0.005)
    assert out.read_text() == src
    assert [p.name for p in tmp_path.iterdir()] == ["d.json"]
    (tmp_path / "e.json").write_text('{"dx": 0.1, "dtheta": 0.2}')
    assert load_errors(tmp_path / "e.json") == ErrorModel(0.1, 0.2, 0.0)
    with pytest.raises(DesignFileError, match="cannot read"):
        load_design(tmp_path / "missing.json")
