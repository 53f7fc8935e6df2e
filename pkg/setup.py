"""Optional compiled kernels; the package falls back to numpy when the build is skipped."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("VISCSOL_NO_EXT", "") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        flags = ["-O2", "-ffp-contract=off", "-fno-fast-math"]
        ext_modules = cythonize(
            [
                Extension(
                    "viscsol._kernels",
                    ["src/viscsol/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=flags,
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
