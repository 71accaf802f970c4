"""Build hook for the optional compiled kernel module.

The package works without the extension (h2nmf._backend falls back to the
pure-NumPy kernels), so a missing Cython toolchain must not break installs.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "h2nmf._kernels",
                ["src/h2nmf/_kernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
