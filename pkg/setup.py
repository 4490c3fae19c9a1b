"""Build script.

The compiled expression kernel (kesym._kernel) is optional: if Cython is not
available, or the extension fails to compile, the package installs anyway and
falls back to the pure-Python virtual machine at import time.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("kesym._kernel", ["src/kesym/_kernel.pyx"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # noqa: BLE001 - any build-chain failure means "no extension"
    sys.stderr.write(f"kesym: skipping compiled kernel ({exc!r}); "
                     "pure-Python backend will be used\n")
    ext_modules = []

setup(ext_modules=ext_modules)
