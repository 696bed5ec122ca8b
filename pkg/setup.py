"""Build hook for the optional compiled factor kernels.

The package is pure Python plus one Cython extension.  When Cython (and a C
compiler) are available the extension is built; otherwise installation
proceeds and the NumPy fallback is used at import time.

    python setup.py build_ext --inplace    # build the kernels in the tree
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/studymap/factors/_core.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
