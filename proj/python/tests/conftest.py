import os
from pathlib import Path

import replayq

# ctest points this at the freshly built package; fail if another install shadows it
_expected = os.environ.get("REPLAYQ_EXPECTED_PKG")
if _expected:
    _got = Path(replayq.__file__).resolve().parent
    if _got != Path(_expected).resolve():
        raise RuntimeError(f"replayq imported from {_got}, expected {_expected}")
