"""Build script: compiles the fast-marching kernel extension when Cython and a
C toolchain are available, otherwise installs the pure-Python package only
(the solver falls back at import time)."""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "cisru_sim.nav._fmm_cy",
                ["src/cisru_sim/nav/_fmm_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    sys.stderr.write(f"cisru-sim: building without compiled kernel ({exc})\n")

setup(ext_modules=ext_modules)
