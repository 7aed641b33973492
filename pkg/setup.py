import os

import numpy as np
from setuptools import Extension, setup

# BAYESTREE_NO_EXT=1 installs the pure-Python package only
if os.environ.get("BAYESTREE_NO_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "bayestree._kernel",
                ["src/bayestree/_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                language="c++",
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
