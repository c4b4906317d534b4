import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("UQP_NO_EXTENSION") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension("uqp._replay", ["src/uqp/_replay.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"])
    return cythonize([ext], language_level="3")


setup(ext_modules=_extensions())
