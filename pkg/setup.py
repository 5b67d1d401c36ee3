#!/usr/bin/env python
# -*- coding: UTF-8 -*-
#
# ASFNet: lightweight crowd counting with adjacent feature fusion

"""ASFNet: lightweight crowd counting with adjacent feature fusion"""

from setuptools import setup, find_packages
import io
import re
from os import path

# --- get version ---
version = "unknown"
with open("asfnet/version.py") as f:
    match = re.search(r'^version = "([^"]+)"', f.read(), re.M)
    if match:
        version = match.group(1)
# --- /get version ---


here = path.abspath(path.dirname(__file__))

# Get the long description from the README file
with io.open(path.join(here, 'README.rst'), encoding='utf-8') as f:
    long_description = f.read()

setup(
    name='asfnet',
    version=version,
    description='Lightweight crowd counting with adjacent feature fusion',
    long_description=long_description,
    author='ASFNet contributors',
    license='Apache',
    classifiers=[
        'License :: OSI Approved :: Apache Software License',
        'Development Status :: 3 - Alpha',

        'Operating System :: OS Independent',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Image Recognition',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',

        'Programming Language :: Python :: 3.7',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
    ],
    platforms=['any'],
    keywords='crowd counting, density map, pruning, numpy',
    packages=find_packages(exclude=['contrib', 'docs', 'tests', 'examples']),
    python_requires='>=3.7',
    install_requires=['pandas>=0.24', 'numpy>=1.17',
                      'multitasking>=0.0.7'],
    extras_require={'fast': ['ujson>=1.35']},
    entry_points={
        'console_scripts': [
            'asfnet=asfnet.cli:main',
        ],
    },
)
