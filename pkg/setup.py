"""Builds the optional Cython search kernel.

The package works without it: ``urbanroute._kernel`` falls back to the
pure-Python heap search when the extension is missing.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("URBANROUTE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "urbanroute._search_ext",
                    ["src/urbanroute/_search_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
