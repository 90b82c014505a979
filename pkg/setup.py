"""Build script for the compiled attribution kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes exact enumeration at large player
counts much faster.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "ccshap._shapley_fast",
                sources=["src/ccshap/_shapley_fast.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
