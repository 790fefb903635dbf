"""Build script for the compiled stepping kernel.

Set ``TWOCH_NO_EXT=1`` to skip the extension; the package then runs on its
numpy kernel.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("TWOCH_NO_EXT"):
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "twoch._core",
                ["src/twoch/_core.pyx"],
                include_dirs=[np.get_include()],
                libraries=["fftw3", "m"],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
