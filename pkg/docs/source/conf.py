# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.

import os
import sys
sys.path.insert(0, os.path.abspath('../..'))

# -- Project information -----------------------------------------------------

project = 'pyexlab'
copyright = '2026, pyexlab contributors'
author = 'pyexlab contributors'

version = ''
release = 'v0.3.0'

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
    'sphinx.ext.mathjax',
]

templates_path = ['../_templates']

source_suffix = '.rst'

master_doc = 'index'

language = 'en'

exclude_patterns = []

pygments_style = 'default'

# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'

html_theme_options = {}

htmlhelp_basename = 'pyexlabdoc'

# -- Options for LaTeX output ------------------------------------------------

latex_elements = {
    'papersize': 'letterpaper',
    'pointsize': '10pt',
    'preamble': '',
    'figure_align': 'htbp',
}

latex_documents = [
    (master_doc, 'pyexlab.tex', 'pyexlab Documentation',
     'pyexlab contributors', 'manual'),
]

man_pages = [
    (master_doc, 'pyexlab', 'pyexlab Documentation',
     [author], 1)
]

texinfo_documents = [
    (master_doc, 'pyexlab', 'pyexlab Documentation',
     author, 'pyexlab', 'Excursion-set fluctuation experiments for planar Gaussian fields.',
     'Miscellaneous'),
]
