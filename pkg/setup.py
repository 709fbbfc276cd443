"""Build script: compiles the optional integrator extension.

The package works without the extension (a pure-Python loop is selected at
import time), so any build failure here downgrades to a warning instead of
aborting the install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext = Extension(
        "tddebif._core",
        sources=["src/tddebif/_core.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off: keep FMA contraction off so the compiled loop
        # reproduces the pure-Python fallback bit for bit.
        extra_compile_args=["-O2", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level=3)
except Exception as exc:  # noqa: BLE001 - degrade to pure python on any build issue
    sys.stderr.write(f"warning: building without compiled core ({exc})\n")

setup(ext_modules=ext_modules)
