import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from hypothesis import settings as hypothesis_settings  # noqa: E402

hypothesis_settings.register_profile("seeded", derandomize=True, max_examples=25, deadline=None)
hypothesis_settings.load_profile("seeded")


@pytest.fixture
def darboux1():
    from services.catalog_service import load

    return load("darboux(1)")


@pytest.fixture
def hopf():
    from services.catalog_service import load

    return load("hopf_s3")
