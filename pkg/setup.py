import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="biarmpy",
    version="0.1.0",
    description="Bimanual desk robot manipulation planning toolkit",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=["biarmpy"],
    python_requires=">=3.7",
    install_requires=[
        "numpy",
        "scipy",
        "matplotlib"],
    include_package_data=True,
    package_data={
        'biarmpy': ['data/*.json', 'data/*.robot']
    },
    entry_points={
        'console_scripts': ['biarmpy=biarmpy.cli:main']
    },
    classifiers=[
        "Programming Language :: Python :: 3.7",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "License :: OSI Approved :: GNU General Public License (GPL)",
        "Operating System :: OS Independent",
    ],
)
