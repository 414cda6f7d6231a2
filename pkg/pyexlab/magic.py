# `%load_ext pyexlab.magic` - loads the exlab magic
from IPython.core.magic import (magics_class, line_cell_magic)
from .base_exlab_magic import BaseExlabMagic
import argparse

@magics_class
class ExlabMagic(BaseExlabMagic):

    @line_cell_magic
    def exlab(self, line, cell=None):
        """A Jupyter magic command to run pyexlab experiments.

        Can be used as both line and cell magic:
        - As a line magic: `%exlab KIND {JSON PARAMS}`
        - As a cell magic: `%%exlab KIND [OPTIONS]` followed by the JSON params in the next lines.

        :param line: The experiment kind, options and (line magic) parameters.
        :param cell: The JSON parameters when used as cell magic.
        :return: The experiment's main table as a named Pandas DataFrame (`exlab_df`).
        """
        is_cell_magic = cell is not None
        kind, _, rest = line.strip().partition(" ")

        if is_cell_magic:
            parser = argparse.ArgumentParser()
            parser.add_argument("--no-display", action="store_true", help="Suppress result display.")
            args = parser.parse_args(rest.split())
            params = self.get_rendered_params(cell)
        else:
            args = None
            params = self.get_rendered_params(rest)

        results = self.run_experiment(kind, params)
        self.shell.user_ns['exlab_df'] = results

        if is_cell_magic and args and not args.no_display:
            return results
        elif not is_cell_magic:
            return results

def load_ipython_extension(ipython):
    """Load the exlab magic in IPython."""
    ipython.register_magics(ExlabMagic)
