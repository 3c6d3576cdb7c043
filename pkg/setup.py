"""Setup for the pairplan package."""

from pathlib import Path

import setuptools

with Path("README.md").open("r", encoding="utf-8") as fh:
    long_description = fh.read()

setuptools.setup(
    name="pairplan",
    version="0.1.0",
    description=(
        "Parallel imitation and reinforcement trajectory planning on a synthetic "
        "closed-loop driving simulator"
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    package_dir={"": "src"},
    packages=setuptools.find_packages(where="src"),
    python_requires=">=3.12",
    install_requires=[
        "numpy>=2.2.2",
        "pydantic>=2.10.6",
        "pandas>=2.2",
        "matplotlib>=3.9",
    ],
    entry_points={"console_scripts": ["pairplan = pairplan.cli:main"]},
)
