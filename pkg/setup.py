import os
from setuptools import setup


def read(fname):
    with open(os.path.join(os.path.dirname(__file__), fname), encoding="utf-8") as handle:
        return handle.read()


from liblayoutforge import version

setup(
    name="layoutforge",
    version=version.VERSION,
    author="layoutforge developers",
    description=("Rule based document layout analysis, recognition and reconstruction"),
    license="GPL",
    keywords="ocr layout analysis bengali table detection",
    packages=["liblayoutforge"],
    package_data={"liblayoutforge": ["data/alphabet.csv"]},
    long_description=read("README.md"),
    long_description_content_type="text/markdown",
    python_requires=">=3.9",
    install_requires=[
        line.strip()
        for line in read("requirements.txt").splitlines()
        if line.strip() and not line.startswith("#")
    ],
    extras_require={"test": ["pytest"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Topic :: Scientific/Engineering :: Image Recognition",
        "Topic :: Text Processing",
    ],
    scripts=["layoutforge"],
)
