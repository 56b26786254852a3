import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled stepping kernel is an accelerator; the package falls back to
# the NumPy implementation when the extension cannot be built.
extensions = [
    Extension(
        "surfsde._kernels._em",
        ["src/surfsde/_kernels/_em.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
]

setup(ext_modules=cythonize(extensions, language_level=3) if cythonize else [])
