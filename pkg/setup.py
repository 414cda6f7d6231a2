# -*- coding: utf-8 -*-

from setuptools import setup, find_packages

with open('README.rst') as f:
    readme = f.read()

setup(
    name='pyexlab',
    version='v0.3.0',
    description='Monte Carlo laboratory for excursion-set fluctuations of planar Gaussian fields',
    long_description=readme,
    license='MIT',
    packages=['pyexlab'],
    install_requires=[
        'numpy',
        'scipy',
        'pandas',
        'IPython',
        ],
    entry_points={
        'console_scripts': [
            'exlab = pyexlab.cli:main'
        ]
    },
    classifiers=[
        'Operating System :: Microsoft :: Windows',
        'Operating System :: MacOS',
        'Operating System :: POSIX :: Linux',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12',
        'Programming Language :: Python :: 3.13',
        'License :: OSI Approved :: MIT License',
        'Topic :: Scientific/Engineering :: Mathematics',
    ]
)
