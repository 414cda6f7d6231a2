from .exlab import ExLab, RunManifest
from .config import ExperimentConfig
from .errors import ExlabError, ConfigError, ModelError, SynthesisError, GridFormatError, EstimationError
from .models import FieldModel, parse_model
from .synthesis import GridSpec, FieldSample, synthesize
from .topology import ConnectivityPolicy
from ._util import seed_split
from .magic import ExlabMagic
