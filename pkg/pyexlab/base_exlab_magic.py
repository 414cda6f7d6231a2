from __future__ import print_function
from IPython.core.magic import (Magics)
from string import Template
import json

class BaseExlabMagic(Magics):
    """Base Jupyter magic extension enabling running pyexlab experiments.

    This extension allows users to run excursion-set experiments directly from
    Jupyter notebooks and inspect the results as Pandas DataFrames.
    """
    def __init__(self, shell):
        """Initialize the ExlabMagic class.

        :param shell: The IPython shell instance.
        """
        from . import ExLab
        super(BaseExlabMagic, self).__init__(shell)
        self.exlab_instance = ExLab(output='pandas')

    def get_rendered_params(self, data):
        """Substitute placeholders in a JSON parameter template with variables from the current namespace.

        :param data: JSON object text containing `$name` placeholders.
        :type data: str
        :return: The experiment parameters.
        :rtype: dict
        """
        t = Template(data)
        rendered = t.substitute(self.shell.user_ns).strip()
        return json.loads(rendered) if rendered else {}

    def run_experiment(self, kind, params):
        """Run an experiment in memory.

        :param kind: Experiment kind.
        :type kind: str
        :param params: Experiment config fields.
        :type params: dict
        :return: The experiment's main table.
        :rtype: pandas.DataFrame
        """
        return self.exlab_instance.execute(kind, **params)
