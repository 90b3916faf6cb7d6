import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off keeps the compiled kernels bit-compatible with the pure
# Python twin (no fused multiply-add reassociation).
ext = Extension(
    "contlab._kernels._core",
    sources=["src/contlab/_kernels/_core.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O2", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level="3"))
