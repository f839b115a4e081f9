"""Build script for the optional compiled propagation kernel.

The package works without the extension (a NumPy fallback is selected at
import time); set MAPGATE_NO_EXT=1 to skip compilation entirely.
"""

import os

import numpy as np
from setuptools import setup

ext_modules = []
if not os.environ.get("MAPGATE_NO_EXT"):
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "mapgate._kernel",
                ["src/mapgate/_kernel.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
