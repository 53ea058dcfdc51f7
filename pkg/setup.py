"""Build script: compiles the optional IRLS kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a failed compile should not block installation from
source trees without a toolchain.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("blocklp._kernels", ["src/blocklp/_kernels.pyx"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
