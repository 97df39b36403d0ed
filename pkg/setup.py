"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a NumPy reference
backend is selected at import time), so the extension is marked optional
and any build failure is non-fatal.
"""

from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
    import numpy as np

    ext_modules = cythonize(
        [
            Extension(
                "qidlab.kernels._fast",
                ["src/qidlab/kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
