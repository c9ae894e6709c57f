"""Build script for the optional compiled codec kernels.

The package is fully functional without the extension; gripstream.protocol
falls back to the pure-Python kernels when the compiled module is missing.
Set GRIPSTREAM_PURE=1 to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("GRIPSTREAM_PURE"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "gripstream.protocol._codec",
                    ["src/gripstream/protocol/_codec.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
