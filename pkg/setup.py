"""Build hook for the optional Cython motif-enumeration kernel.

The package works without the extension: ``infomotif.motifs`` falls back to a
pure-Python implementation when the compiled module is missing.  Set
``INFOMOTIF_NO_EXT=1`` to skip compilation entirely.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("INFOMOTIF_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "infomotif.motifs._enumerate",
                    ["src/infomotif/motifs/_enumerate.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
