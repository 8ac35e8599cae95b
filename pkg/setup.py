"""Build script for the optional compiled kernel core.

The package works without the extension (a NumPy fallback is selected at
import time); the Cython core just makes the pixel kernels faster. Set
LEDVLC_NO_EXT=1 to skip building it.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("LEDVLC_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "ledvlc._kernels._core",
            sources=["src/ledvlc/_kernels/_core.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize(
            [ext],
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "language_level": "3",
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
