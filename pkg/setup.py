"""Build script: compiles the optional CRF kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile downgrades to a pure-Python install
instead of aborting.
"""

import sys

from setuptools import setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError as exc:
        print(f"tcca: building without compiled kernels ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "tcca.crf._chain_cy",
        ["src/tcca/crf/_chain_cy.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=_extensions())
