import os
import sys

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DELTASINK_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python install; kernels fall back at import
        cythonize = None
    if cythonize is not None:
        compile_args = ["-O3", "-fopenmp"]
        libraries = []
        if sys.platform.startswith("linux"):
            # lets gcc call glibc's vector exp in the history sums
            compile_args.append("-ffast-math")
            libraries = ["mvec", "m"]
        ext_modules = cythonize(
            [
                Extension(
                    "deltasink.kernels._ckernels",
                    ["src/deltasink/kernels/_ckernels.pyx"],
                    extra_compile_args=compile_args,
                    extra_link_args=["-fopenmp"],
                    libraries=libraries,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
