"""Build script for the compiled integration core.

The extension is an optional accelerator: the package imports and runs
without it (the pure-Python reference backend takes over), so a failed
extension build only costs speed, never correctness.

``-ffp-contract=off`` keeps the C arithmetic at one rounding per source
operation (no fused multiply-add contraction), so the compiled kernels
follow the reference backend's floating-point sequences exactly.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build environments without Cython
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "ringobs._core",
                ["src/ringobs/_core.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
