"""Build script for the compiled kernel extension.

The extension is optional at runtime: spcbss.backend falls back to the
pure numpy twin (spcbss._kernels_py) when the compiled module is absent
or broken, so a failed build still yields a working package.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("spcbss._kernels", ["src/spcbss/_kernels.pyx"])],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    # no Cython available: install the pure-python package only
    ext_modules = []

setup(ext_modules=ext_modules)
