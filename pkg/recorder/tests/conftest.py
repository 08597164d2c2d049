import shutil
import subprocess

import pytest

TOPO = shutil.which("topo")

needs_topo = pytest.mark.skipif(TOPO is None,
                                reason="topo CLI not installed")


def run_topo(*argv):
    return subprocess.run([TOPO, *argv], capture_output=True, text=True)
