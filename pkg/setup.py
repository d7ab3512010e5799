"""Build script for the optional compiled kernels.

The package works without the extension (pure-Python fallback); building it
is strongly recommended for large corpora:

    pip install -e . --no-build-isolation

Set CITEMAP_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CITEMAP_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        # -O2 without -march/-ffast-math: the compiled kernels must be
        # bit-identical to the pure-Python fallback (IEEE double, no FMA
        # contraction), which the backend parity tests enforce.
        ext_modules = cythonize(
            [
                Extension(
                    "citemap._core._kernels",
                    sources=["src/citemap/_core/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    language="c++",
                    extra_compile_args=["-O2", "-std=c++11", "-ffp-contract=off"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "initializedcheck": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
