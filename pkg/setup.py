"""Build script for the compiled coordinate-descent kernel.

The extension is optional at runtime: sumaug falls back to the pure-Python
kernel when the compiled module is absent (see sumaug/svm/__init__.py).
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "sumaug.svm._dcd",
        ["src/sumaug/svm/_dcd.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
