import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    # optional=True: a failed build falls back to the numpy kernel backend
    # instead of failing the install.
    ext = Extension(
        "steerank.kernels._ckern",
        sources=["src/steerank/kernels/_ckern.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
    extensions = cythonize([ext], language_level=3)

setup(ext_modules=extensions)
