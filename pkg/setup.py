"""Build script: compiles the optional fast-kernel extension.

The package works without the extension (a pure-numpy fallback is selected at
import time), so the extension is marked optional and build failures only warn.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "hjbpass._kernels",
        ["src/hjbpass/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
    for e in ext_modules:
        e.optional = True
except ImportError:
    # No Cython/numpy at build time: install pure-Python only.
    ext_modules = []

setup(ext_modules=ext_modules)
