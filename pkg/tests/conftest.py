import pytest

from anyround import fenv
from anyround.fenv import AmbientMode


@pytest.fixture(autouse=True, scope="session")
def nearest_even_environment():
    """The suite assumes the default rounding mode on entry and leaves the
    environment as it found it; individual tests scope their own changes
    with with_mode."""
    fenv.set_mode(AmbientMode.RN)
    yield
    fenv.set_mode(AmbientMode.RN)
