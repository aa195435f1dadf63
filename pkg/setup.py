"""Build the optional compiled trajectory kernel.

Without Cython or a C compiler the package installs pure-Python and
``tcilab.sim.kernel`` falls back to ``_kernel_py``.
"""
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "tcilab.sim._kernel",
                ["src/tcilab/sim/_kernel.pyx"],
                # no FMA contraction: results must match the Python twin bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
