import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("NBESTKIT_NO_EXT") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "nbestkit._kernels._ckernels",
                ["src/nbestkit/_kernels/_ckernels.pyx"],
                language="c++",
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
