"""Build script for the compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so the build degrades gracefully when Cython is unavailable.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "beamkit._kernels._core",
                ["src/beamkit/_kernels/_core.pyx"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
