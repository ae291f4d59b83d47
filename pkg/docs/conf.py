# Sphinx configuration for pmc-lab.
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys
sys.path.insert(0, os.path.abspath('../src'))
from recommonmark.transform import AutoStructify

from pmc import __version__

# -- Project information -----------------------------------------------------

project = 'pmc-lab'
copyright = '2026, pmc-lab developers'
author = 'pmc-lab developers'
release = __version__

# -- General configuration ---------------------------------------------------

needs_sphinx = '4.1.2'

# recommonmark renders the markdown changelog
extensions = ['sphinx.ext.autodoc', 'sphinx.ext.intersphinx', 'sphinx.ext.viewcode',
              'sphinx.ext.autosectionlabel', 'sphinx_rtd_theme', 'recommonmark']

autosectionlabel_prefix_document = True
autodoc_member_order = 'bysource'

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
source_suffix = ['.rst', '.md']

# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
pygments_style = "manni"

intersphinx_mapping = {'python': ('https://docs.python.org/3/', None),
                       'numpy': ('https://numpy.org/doc/stable/', None),
                       'pandas': ('https://pandas.pydata.org/docs/', None),
                       }


def setup(app):
    app.add_config_value('recommonmark_config', {
        'enable_math': False,
        'enable_inline_math': False,
        'enable_eval_rst': True,
    }, True)
    app.add_transform(AutoStructify)
