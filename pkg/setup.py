from setuptools import Extension, setup

# The compiled prox kernel is optional: without Cython (or a working C
# toolchain) the package installs pure-Python and elsd.structured falls
# back to the numpy kernel at import time.
try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "elsd._prox",
                ["src/elsd/_prox.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
