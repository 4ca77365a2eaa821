"""Recursion-kernel backend selection.

The compiled extension is preferred; the pure-Python twin is used when the
extension is missing or when the environment variable DPDMON_PURE_PYTHON is
set to a truthy value.  Both implement the same functions with bitwise-equal
output.
"""

import os

from dpdmon import _recursions_py

_FORCE_PURE = os.environ.get("DPDMON_PURE_PYTHON", "0") in ("1", "true", "True")

if _FORCE_PURE:
    _rec = _recursions_py
    HAVE_COMPILED = False
else:
    try:
        from dpdmon import _recursions as _rec  # type: ignore[no-redef]

        HAVE_COMPILED = True
    except ImportError:
        _rec = _recursions_py
        HAVE_COMPILED = False

garch_path = _rec.garch_path
garch_simulate = _rec.garch_simulate
kahan_cumsum = _rec.kahan_cumsum


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "python"
