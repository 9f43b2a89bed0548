import math

import pytest

from services.catalog_service import (
    CatalogError,
    DescriptorVerificationError,
    UnknownExampleError,
    catalog_service,
    hopf_s3,
    load,
)


@pytest.mark.parametrize(
    "example_id, expected",
    [
        ("darboux-data", ("darboux_data", [])),
        ("torus_fixture(2, 3)", ("torus_fixture", ["2", "3"])),
        ("Hopf_S3", ("hopf_s3", [])),
        (" darboux( 2 ) ", ("darboux", ["2"])),
    ],
)
def test_parse_id(example_id, expected):
    assert catalog_service.parse_id(example_id) == expected


def test_loads_are_cached():
    assert load("darboux(2)") is load("darboux( 2 )")


@pytest.mark.parametrize(
    "example_id",
    ["darboux(1)", "darboux(2)", "darboux(3)", "darboux(4)", "darboux_data", "exact(liouville)", "exact(canonical)", "torus_fixture(3,5)"],
)
def test_builtin_examples_load(example_id):
    descriptor = load(example_id)
    assert descriptor.id
    assert descriptor.notes


def test_hopf_declarations_are_verified(hopf):
    assert set(hopf.verified) == {"known_reeb", "known_omega", "integrality", "period"}
    assert hopf.period == 2 * math.pi
    assert hopf.surface.closed


def test_punctured_hopf_skips_the_period_check():
    descriptor = load("punctured_hopf")
    assert set(descriptor.verified) == {"known_reeb"}
    assert descriptor.witnesses


def test_darboux_is_non_periodic(darboux1):
    assert math.isinf(darboux1.period)
    assert darboux1.chart.coordinates == ("z", "q1", "p1")


def test_torus_fixture_has_no_contact_form():
    descriptor = load("torus_fixture(2,3)")
    assert descriptor.contact is None
    assert descriptor.period == 3.0
    assert descriptor.flow_field is descriptor.vector_field


@pytest.mark.parametrize("example_id", ["darboux(5)", "darboux(0)", "darboux(x)", "exact(bogus)", "torus_fixture(2,4)"])
def test_bad_arguments(example_id):
    with pytest.raises(CatalogError):
        load(example_id)


@pytest.mark.parametrize("example_id", ["no_such_example", "hopf_s3(2)", "!!"])
def test_unknown_examples(example_id):
    with pytest.raises(UnknownExampleError):
        load(example_id)


def test_wrong_declared_period_fails_verification():
    descriptor = hopf_s3()
    descriptor.period = 3.0
    with pytest.raises(DescriptorVerificationError):
        catalog_service.verify(descriptor)
