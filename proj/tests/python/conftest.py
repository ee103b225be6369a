import os
import sys
from pathlib import Path

# Build-tree layout: the compiled extension lives in the CMake build directory
# (exported by the test harness); the pure-python package lives in python/.
_module_dir = os.environ.get("LOSCHMIDT_PYMODULE_DIR")
if _module_dir:
    sys.path.insert(0, _module_dir)
sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "python"))
