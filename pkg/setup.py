import setuptools

with open("README.rst", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="fracvis",
    version="0.1.0",
    description="A laboratory for fractal percolation and its visible parts",
    long_description=long_description,
    long_description_content_type="text/x-rst",
    packages=setuptools.find_packages(exclude=["tests"]),
    classifiers=[
        "Programming Language :: Python :: 3.9",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Development Status :: 4 - Beta",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "pandas>=1.5",
        "scipy>=1.7",
        "tqdm>=4.46.0",
    ],
    entry_points={"console_scripts": ["fracvis=fracvis.cli:main"]},
)
