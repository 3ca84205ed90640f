import os
import sys

import pytest

# Add the project src directory to PYTHONPATH for tests
CURRENT_DIR = os.path.dirname(__file__)
SRC_PATH = os.path.abspath(os.path.join(CURRENT_DIR, "..", "src"))
if SRC_PATH not in sys.path:
    sys.path.insert(0, SRC_PATH)

from crossalign.config import set_config  # noqa: E402


@pytest.fixture(autouse=True)
def reset_run_config():
    """`main()` installs the active RunConfig globally; no test sees another test's run."""
    yield
    set_config(None)
