"""Build hook for the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and the
pure-Python kernels are used instead.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("REIFLAB_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "reiflab._kernels",
                    ["src/reiflab/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
