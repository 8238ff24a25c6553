import os
import sys
from pathlib import Path

# Prefer an installed package; otherwise pick the module up from the CMake
# build tree (build/python) or from HEBBES_PYTHON_PATH.
def _add_build_path():
    candidates = []
    env = os.environ.get("HEBBES_PYTHON_PATH")
    if env:
        candidates.append(Path(env))
    here = Path(__file__).resolve()
    candidates.append(here.parents[2] / "build" / "python")
    for cand in candidates:
        if (cand / "hebbes" / "__init__.py").exists():
            sys.path.insert(0, str(cand))
            return


try:
    import hebbes  # noqa: F401
except ImportError:
    _add_build_path()
