from setuptools import setup
import pathlib


here = pathlib.Path(__file__).parent.resolve()
long_description = (here / 'README.md').read_text(encoding='utf-8')
requirements = []
with open('requirements.txt') as f:
    requirements = f.read().splitlines()
with open('bnkf/__init__.py', 'r') as f:
    version = [line.split('=')[1].strip(" '\"") for line in f.read().splitlines() if line.startswith('__version__')][0]


setup(
    name='bnkf.py',
    version=version,
    description='Radar target tracking benchmark: Kalman filters against Bayesian-network/Kalman hybrids.',

    long_description=long_description,
    long_description_content_type='text/markdown',
    license='MIT',
    keywords='radar, tracking, kalman, ukf, ekf, bayesian neural network, benchmark',
    packages=[
        'bnkf',
        'bnkf.geom',
        'bnkf.filters',
        'bnkf.bnn',
        'bnkf.hybrid',
        'bnkf.simkit',
        'bnkf.evalkit',
        'bnkf.cli',
    ],
    python_requires='>=3.8, <4',
    install_requires=requirements,
    extras_require={
        'test': ['pytest>=7'],
        'docs': ['sphinx', 'sphinx_rtd_theme'],
    },
    entry_points={
        'console_scripts': ['bnkf = bnkf.cli.main:main'],
    },
    classifiers=[
        'License :: OSI Approved :: MIT License',
        'Intended Audience :: Science/Research',
        'Natural Language :: English',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering',
        'Topic :: Software Development :: Libraries :: Python Modules',
      ]
)
