"""Build the optional compiled kernel; the package falls back to pure Python without it."""
import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "crlab.experiments._kernel",
    ["src/crlab/experiments/_kernel.pyx"],
    include_dirs=[numpy.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O2", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level=3))
