"""Build script: compiles the optional walk-kernel extension.

The package works without the compiled extension (a pure-numpy fallback is
selected at import time), so any build failure here degrades gracefully to
a pure-Python install instead of aborting.
"""
import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "patchwalk._kernels._core",
        ["src/patchwalk/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


class optional_build_ext(build_ext):
    """Never let a missing compiler break the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken
            sys.stderr.write(
                "patchwalk: compiled kernels unavailable (%s); "
                "falling back to pure-Python kernels\n" % exc
            )

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            sys.stderr.write(
                "patchwalk: building %s failed (%s); "
                "falling back to pure-Python kernels\n" % (ext.name, exc)
            )


setup(
    ext_modules=_extensions() if not os.environ.get("PATCHWALK_NO_EXT") else [],
    cmdclass={"build_ext": optional_build_ext},
)
