from ._util import (
	_get_package_version,
	_get_platform,
	_get_debug_log_file,
	_attach_debug_handler,
	_canonical_json,
	_sha256_file,
	seed_split,
)
import json, os, asyncio, logging, math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
import numpy as np
import pandas as pd

from . import gridio, lab, models, synthesis, topology
from .config import ExperimentConfig
from .errors import ConfigError

logger = logging.getLogger(__name__)


def _synth_replicate(task, index, seed):
	model_id, grid = task
	return synthesis.synthesize(model_id, grid, seed, index)


def _jsonable(value):
	if isinstance(value, dict):
		return {str(k): _jsonable(v) for k, v in value.items()}
	if isinstance(value, (list, tuple)):
		return [_jsonable(v) for v in value]
	if isinstance(value, (np.bool_, bool)):
		return bool(value)
	if isinstance(value, (np.integer, int)):
		return int(value)
	if isinstance(value, (np.floating, float)):
		return None if not math.isfinite(value) else float(value)
	return value


@dataclass
class RunManifest:
	"""Record of one experiment run.

	Everything but ``started`` and ``finished`` is a pure function of the
	config, so two runs of one config list identical checksums.
	"""
	config_hash: str
	tool_version: str
	started: str
	finished: str
	seeds: list
	files: list = field(default_factory=list)
	out_dir: str = None

	def checksums(self):
		return {f["path"]: f["sha256"] for f in self.files}

	def to_dict(self):
		return {"config_hash": self.config_hash, "tool_version": self.tool_version, "started": self.started,
				"finished": self.finished, "seeds": self.seeds, "files": self.files}


@dataclass
class ExperimentResult:
	tables: dict
	summary: dict
	samples: list = field(default_factory=list)
	seeds: list = field(default_factory=list)

	@property
	def main_table(self):
		return next(iter(self.tables.values()))


class ExLab:
	"""A class representing an instance of the excursion-set fluctuation laboratory.

	:param workers: Number of worker processes used for replicates
		(defaults to `1`, running everything in the calling process)
	:type workers: int, optional
	:param output: Determines the format of the output of `execute`, options are 'dict', 'pandas', and 'csv'
		(defaults to `'dict'`)
	:type output: str, optional
	:param out_dir: Directory that `run` writes experiment artefacts under, unless the config names its own
		(defaults to `./exlab_runs/<kind>-<config hash prefix>`)
	:type out_dir: str, optional
	:param debug: Enable debug logging
		(defaults to `False`)
	:type debug: bool, optional
	:param debug_log_file: Path to debug log file
		(defaults to `~/.pyexlab/debug.log`, only available if debug is `True`)
	:type debug_log_file: str, optional

	--- Read-Only Attributes ---

	:param platform: The operating system platform
	:type platform: str, readonly
	:param package_version: The version number of the `pyexlab` Python package
	:type package_version: str, readonly
	"""

	def __init__(self,
				 workers=1,
				 output='dict',
				 out_dir=None,
				 debug=False,
				 debug_log_file=None):
		"""Constructor method
		"""
		# read only properties
		self.platform, this_os = _get_platform()
		self.package_version = _get_package_version("pyexlab")

		# Check and assign the output if it is allowed, else raise ValueError
		ALLOWED_OUTPUTS = {'dict', 'pandas', 'csv'}
		if output.lower() not in ALLOWED_OUTPUTS:
			raise ValueError(f"Invalid output. Expected one of {ALLOWED_OUTPUTS}, got {output}.")
		self.output = output.lower()

		if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
			raise ValueError(f"Invalid workers. Expected a positive integer, got {workers}.")
		self.workers = workers
		self.out_dir = out_dir

		self.debug = debug
		if debug:
			self.debug_log_file = _get_debug_log_file(debug_log_file)
			_attach_debug_handler(self.debug_log_file)

	def properties(self):
		"""Retrieves the properties of the ExLab instance.

		This method collects all the attributes of the ExLab instance and
		returns them in a dictionary format.

		:return: A dictionary containing the properties of the ExLab instance.
		:rtype: dict

		Example:
			::

				{
					"platform": "Linux x86_64 (Linux-6.5.0-x86_64-with-glibc2.35), Python 3.11.4",
					"workers": 4,
					...
				}
		"""
		props = {}
		for var in vars(self):
			props[var] = getattr(self, var)
		return props

	def _format(self, df):
		if self.output == 'pandas':
			return df
		elif self.output == 'csv':
			return df.to_csv(index=False)
		else:
			return df.to_dict(orient='records')

	def _compute(self, config, grid_path=None):
		"""Runs the experiment described by `config` in memory."""
		kind, seed, workers = config.kind, config.seed, self.workers
		model = models.parse_model(config.model) if config.model is not None else None

		if kind in ('synth', 'census'):
			if grid_path is not None:
				sample = gridio.read_grid(grid_path)
				samples = [sample]
				seeds = [sample.seed]
			else:
				n = config.n_samples or 1
				grid = lab.default_grid(model, config.R, config.h, config.margin)
				samples = lab.run_replicates(_synth_replicate, (model.id, grid), seed, n, workers)
				seeds = [s.seed for s in samples]
			tables = {}
			if kind == 'synth':
				tables['samples'] = pd.DataFrame([
					{'replicate': s.replicate, 'seed': s.seed, 'mean': s.values.mean(),
					 'variance': s.values.var(), 'min': s.values.min(), 'max': s.values.max()}
					for s in samples])
			if config.levels is not None:
				frames = []
				for s in samples:
					frame = topology.census_table(s, config.levels)
					frame.insert(0, 'replicate', s.replicate)
					frames.append(frame)
				tables['census'] = pd.concat(frames, ignore_index=True)
			summary = {'n_samples': len(samples)}
			return ExperimentResult(tables, summary, samples if kind == 'synth' else [], seeds)

		if kind == 'density':
			curve = lab.estimate_density_curve(model, config.R, config.levels, config.n_samples, seed,
											   config.h, config.margin, workers=workers)
			frame = curve.to_frame()
			summary = {'c_es_hat': frame['c_es_hat'].tolist(), 'c_ls_hat': frame['c_ls_hat'].tolist()}
			return ExperimentResult({'density': frame}, summary, seeds=self._replicate_seeds(seed, config.n_samples))

		if kind == 'identity':
			reports = lab.integral_identity_check(model, config.R, config.a, config.b, config.n_samples, seed,
												  config.h, workers=workers)
			frame = pd.DataFrame([r.to_dict() for r in reports])
			summary = {r.kind: {'difference': r.difference, 'allowance': r.allowance, 'passed': r.passed}
					   for r in reports}
			return ExperimentResult({'identity': frame}, summary, seeds=self._replicate_seeds(seed, config.n_samples))

		if kind == 'scaling':
			fit = lab.variance_scaling_fit(model, config.level, config.R_list, config.n_per_R, seed, config.h,
										   workers=workers)
			tables = {'scaling': fit.to_frame()}
			if config.levels is not None:
				tables['level_sweep'] = lab.level_sweep_exponents(model, config.levels, config.R_list,
																  config.n_per_R, seed, config.h, workers=workers)
			return ExperimentResult(tables, fit.summary(), seeds=self._ladder_seeds(seed, config))

		if kind == 'paired':
			report = lab.paired_level_experiment(model, config.level, config.a_rule, config.R_list,
												 config.n_per_R, seed, config.h, workers=workers)
			frame = report.to_frame()
			summary = {'rule': report.rule, 'ratio_spread': report.ratio_spread,
					   'min_pz_ratio': frame['pz_ratio'].min()}
			return ExperimentResult({'paired': frame}, summary, seeds=self._ladder_seeds(seed, config))

		if kind == 'rpw-trunc':
			grid = lab.default_grid(models.random_plane_wave(), config.R, config.h, config.margin)
			frame = synthesis.truncation_error_sweep(grid, config.N_list, config.n_samples, seed, config.N_ref)
			logs = np.log(frame['mean_error'].to_numpy())
			summary = {'slope': frame['slope'].iloc[0], 'total_log_decrease': logs[0] - logs[-1],
					   'strictly_decreasing': bool(np.all(np.diff(logs) < 0))}
			return ExperimentResult({'truncation': frame}, summary, seeds=self._replicate_seeds(seed, config.n_samples))

		# kl-bound
		rows = []
		for R in config.R_list:
			m = synthesis.rpw_truncation_order(R)
			s = abs(config.level / (config.level + config.a))
			d_kl, _ = lab.kl_tv_gaussian_scaled(3 * m, s)
			rows.append({'R': R, 'm': m, 's': s, 'd_kl': d_kl,
						 'tv_bound': lab.rpw_level_coupling_bound(config.level, config.a, R)})
		tables = {'kl_bound': pd.DataFrame(rows)}
		if config.s_list is not None:
			tables['kl_1d'] = pd.DataFrame([
				dict(zip(('s', 'd_kl', 'pinsker_tv'), (s,) + lab.kl_tv_gaussian_scaled(1, s)),
					 exact_tv=lab.tv_gaussian_scale_1d(s)) for s in config.s_list])
		return ExperimentResult(tables, {'tv_bound': tables['kl_bound']['tv_bound'].tolist()})

	@staticmethod
	def _replicate_seeds(seed, n):
		return [seed_split(seed, i) for i in range(n)]

	@staticmethod
	def _ladder_seeds(seed, config):
		return [[seed_split(seed_split(seed, j), i) for i in range(config.n_per_R)]
				for j in range(len(config.R_list))]

	def execute(self, kind, **params):
		"""Runs an experiment in memory and returns its main table.

		:param kind: Experiment kind, one of 'synth', 'census', 'density', 'identity', 'scaling',
			'paired', 'rpw-trunc' or 'kl-bound'.
		:type kind: str
		:param params: Experiment config fields (see `ExperimentConfig`).
		:return: The main result table in the configured output format.
		:rtype: list(dict), pandas.DataFrame or str (for `csv` output)

		Example:
			>>> from pyexlab import ExLab
			>>> exlab = ExLab(output='pandas')
			>>> exlab.execute('kl-bound', level=1.0, a=0.5, R_list=[10, 20])
		"""
		grid_path = params.pop('grid_path', None)
		config = ExperimentConfig.from_dict(dict(params, kind=kind))
		return self._format(self._compute(config, grid_path).main_table)

	def _resolve_out_dir(self, config):
		if config.out_dir is not None:
			return config.out_dir
		root = self.out_dir if self.out_dir is not None else 'exlab_runs'
		return os.path.join(root, f"{config.kind}-{config.config_hash[:12]}")

	def _record(self, manifest, out_dir, name):
		path = os.path.join(out_dir, name)
		entry = {'path': name, 'sha256': _sha256_file(path), 'bytes': os.path.getsize(path)}
		manifest.files.append(entry)
		logger.info("wrote %s sha256=%s", path, entry['sha256'])

	def run(self, config, grid_path=None):
		"""Runs an experiment and persists its artefacts.

		Writes `config.json` (canonical form), one CSV per result table, `summary.json`,
		EXLB1 grids for `synth`, and finally `manifest.json` listing every other file with
		its SHA-256 checksum.

		:param config: Experiment config, a path to a JSON config file, or a dict.
		:type config: ExperimentConfig, str or dict
		:param grid_path: EXLB1 grid analysed instead of fresh samples (`census` only).
		:type grid_path: str, optional
		:return: The run manifest.
		:rtype: RunManifest
		"""
		if isinstance(config, str):
			config = ExperimentConfig.from_file(config)
		elif isinstance(config, dict):
			config = ExperimentConfig.from_dict(config)
		if grid_path is not None and config.kind != 'census':
			raise ConfigError("A stored grid can only be analysed by the census experiment.")
		started = datetime.now(timezone.utc).isoformat()
		out_dir = self._resolve_out_dir(config)
		os.makedirs(out_dir, exist_ok=True)
		result = self._compute(config, grid_path)
		manifest = RunManifest(config.config_hash, self.package_version or 'unknown', started, None,
							   _jsonable(result.seeds), out_dir=out_dir)

		with open(os.path.join(out_dir, 'config.json'), 'w', encoding='utf-8') as f:
			f.write(config.canonical_json() + '\n')
		self._record(manifest, out_dir, 'config.json')
		for name, frame in result.tables.items():
			frame.to_csv(os.path.join(out_dir, f"{name}.csv"), index=False)
			self._record(manifest, out_dir, f"{name}.csv")
		for sample in result.samples:
			name = f"grid_{sample.replicate:04d}.exlb"
			gridio.write_grid(sample, os.path.join(out_dir, name))
			self._record(manifest, out_dir, name)
		summary = {'experiment': config.kind, 'config_hash': config.config_hash, 'seed': config.seed,
				   'metrics': _jsonable(result.summary)}
		with open(os.path.join(out_dir, 'summary.json'), 'w', encoding='utf-8') as f:
			f.write(json.dumps(summary, sort_keys=True, indent=2) + '\n')
		self._record(manifest, out_dir, 'summary.json')

		manifest.finished = datetime.now(timezone.utc).isoformat()
		with open(os.path.join(out_dir, 'manifest.json'), 'w', encoding='utf-8') as f:
			f.write(json.dumps(manifest.to_dict(), indent=2) + '\n')
		return manifest

	async def executeConfigsAsync(self, configs):
		"""Runs several experiments concurrently, one thread per config.

		Each config still uses the instance's replicate workers, and every run
		writes to its own output directory, so the artefacts are the same as
		those of sequential `run` calls.

		:param configs: Configs, config paths or config dicts.
		:type configs: list
		:return: The run manifests, in the order of `configs`.
		:rtype: list(RunManifest)

		Example:
			>>> import asyncio
			>>> from pyexlab import ExLab
			>>> exlab = ExLab()
			>>> manifests = asyncio.run(exlab.executeConfigsAsync(['density.json', 'identity.json']))
		"""
		async def main():
			with ThreadPoolExecutor() as executor:
				loop = asyncio.get_event_loop()
				futures = [loop.run_in_executor(executor, self.run, config) for config in configs]
				return await asyncio.gather(*futures)
		return await main()
