"""Builds the optional compiled grid kernels.

The package works without the extension (a pure-Python fallback is selected
at import time); the build is therefore allowed to fail soft, e.g. on a
machine without a C compiler.  Set CHATNAV_REQUIRE_EXT=1 to turn a failed
extension build into a hard error.
"""

import os

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/chatnav/kernels/_grid.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    if os.environ.get("CHATNAV_REQUIRE_EXT"):
        raise
    print("Cython not available; building without compiled kernels")

setup(ext_modules=ext_modules)
