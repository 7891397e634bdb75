"""Build script: compiles the hot-kernel extension when Cython is available.

The package works without the extension (a numpy fallback is selected at
import time), so a missing compiler or Cython only costs speed.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "apunim._kernels",
                sources=["src/apunim/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
