from setuptools import setup, find_packages



def get_requires():
    reqs = []
    for line in open("requirements.txt", "r").readlines():
        reqs.append(line)
    return reqs

setup(
    name='outbreakpred',
    version="0.3.0",
    description='Early prediction of stochastic outbreak take-off on contact networks',
    #long_description="",
    #long_description_content_type="text/markdown",
    license='BSD',
    packages=find_packages(exclude=["tests", "tests.*"]),
    package_data={"outbreakpred": ["recipe_templates/*.json"]},
    entry_points={"console_scripts": ["outbreakpred=outbreakpred.cli:main"]},
    classifiers=[
        # Indicate who your project is intended for
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Information Analysis',

        'Programming Language :: Python :: 3',
        ],
    keywords='epidemics networks SIR outbreak prediction',
    install_requires=get_requires()
    )
