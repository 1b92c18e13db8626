import os

from setuptools import Extension, setup


def build_ext_modules():
    # The pure-numpy kernels are used when Cython or a compiler is missing.
    if os.environ.get("BCNN_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        name="bcnn._ckernels",
        sources=[os.path.join("src", "bcnn", "_ckernels.pyx")],
        include_dirs=[np.get_include()],
        # fp-contract=off keeps mul/add unfused so results match the
        # reference loop order bit for bit.
        extra_compile_args=["-O3", "-march=native", "-ffp-contract=off", "-fno-fast-math"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )


setup(ext_modules=build_ext_modules())
