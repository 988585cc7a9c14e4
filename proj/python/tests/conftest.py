import os
import shutil
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("POLYAMIX_CLI") or shutil.which("polyamix")
    if not path:
        build = Path(__file__).resolve().parents[2] / "build" / "polyamix"
        path = str(build) if build.exists() else None
    if not path:
        pytest.skip("polyamix executable not found")
    return path
