import hashlib
import math

import pytest

from services.contact_service import NotContactError
from services.manifold_file_service import ManifoldFileError, manifold_file_service

CIRCLE_BUNDLE = """
[chart]
name = "plane_circle"
coords = ["q", "p", "t"]
domain = [["-inf", "inf"], ["-inf", "inf"], [0, "2*pi"]]
periodic = [false, false, true]

[form]
t = "1"
q = "-p"

[projection]
coords = ["q", "p"]
map = ["q", "p"]

[section]
map = ["q", "p", "0"]

[period]
value = "2*pi"
"""

HOPF = """
[chart]
name = "hopf_file"
coords = ["xi1", "xi2", "phi"]
domain = [[0, "2*pi"], [0, "2*pi"], [0, "pi/2"]]
periodic = [true, true, false]

[form]
xi1 = "cos(phi)^2"
xi2 = "sin(phi)^2"

[projection]
coords = ["phi", "psi"]
domain = [[0, "pi/2"], [0, "2*pi"]]
periodic = [false, true]
map = ["phi", "xi2 - xi1"]

[section]
map = ["0", "psi", "phi"]

[period]
value = "2*pi"

[surface]
periodic = [false, true]
collapsed = [true, false]
"""


@pytest.fixture
def write(tmp_path):
    def _write(text, name="manifold.toml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


def test_reads_and_digests(write):
    path = write(CIRCLE_BUNDLE)
    document, digest = manifold_file_service.read(path)
    assert digest == hashlib.sha256(path.read_bytes()).hexdigest()
    assert document.chart.coords == ["q", "p", "t"]
    assert document.period.resolve() == pytest.approx(2 * math.pi)


def test_builds_a_descriptor(write):
    descriptor, _ = manifold_file_service.load(write(CIRCLE_BUNDLE))
    chart = descriptor.chart
    assert chart.periodic == (False, False, True)
    assert chart.domain[2] == pytest.approx((0.0, 2 * math.pi))
    assert descriptor.period == pytest.approx(2 * math.pi)
    assert descriptor.reduction.projection.target.coordinates == ("q", "p")
    assert descriptor.surface is None


def test_hopf_file_carries_a_closed_surface(write):
    descriptor, _ = manifold_file_service.load(write(HOPF))
    assert descriptor.surface.closed
    assert descriptor.contact.report.passed


def test_missing_file(tmp_path):
    with pytest.raises(ManifoldFileError):
        manifold_file_service.read(tmp_path / "absent.toml")


def test_not_toml(write):
    with pytest.raises(ManifoldFileError):
        manifold_file_service.read(write("[chart\ncoords = 3"))


@pytest.mark.parametrize(
    "old, new",
    [
        ('t = "1"\nq = "-p"', ""),
        ('domain = [["-inf", "inf"], ["-inf", "inf"], [0, "2*pi"]]', 'domain = [["-inf", "inf"]]'),
        ('[section]\nmap = ["q", "p", "0"]', ""),
        ('map = ["q", "p"]\n', 'map = ["q"]\n'),
    ],
)
def test_schema_errors(write, old, new):
    assert old in CIRCLE_BUNDLE
    with pytest.raises(ManifoldFileError):
        manifold_file_service.read(write(CIRCLE_BUNDLE.replace(old, new)))


def test_surface_needs_a_projection(write):
    text = CIRCLE_BUNDLE.split("[projection]")[0] + "\n[surface]\nperiodic = [true, true]\n"
    with pytest.raises(ManifoldFileError):
        manifold_file_service.read(write(text))


def test_unknown_coordinate_in_the_form(write):
    document, _ = manifold_file_service.read(write(CIRCLE_BUNDLE.replace('q = "-p"', 'w = "-p"')))
    with pytest.raises(ManifoldFileError):
        manifold_file_service.form(document, "bad")


def test_non_positive_period(write):
    document, _ = manifold_file_service.read(write(CIRCLE_BUNDLE.replace('value = "2*pi"', 'value = "-1"')))
    with pytest.raises(ManifoldFileError):
        manifold_file_service.descriptor(document, "bad")


def test_non_contact_form(write):
    text = CIRCLE_BUNDLE.replace('q = "-p"', 'q = "0"')
    document, _ = manifold_file_service.read(write(text))
    with pytest.raises(NotContactError):
        manifold_file_service.descriptor(document, "flat")
