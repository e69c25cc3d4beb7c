"""Build script: compiles the Cython stepping core when Cython is available.

The package works without the extension (a pure-Python twin is selected at
import time), so a failed extension build only costs speed, not correctness.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "chainstab._fastcore",
                ["src/chainstab/_fastcore.pyx"],
                extra_compile_args=["-O2"],
            )
        ],
        language_level=3,
    )
except ImportError:
    print("Cython not available; building chainstab without the compiled core")

setup(ext_modules=ext_modules)
