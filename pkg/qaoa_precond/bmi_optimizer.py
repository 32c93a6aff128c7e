# Need these for BMI
from bmipy import Bmi
import logging
from pathlib import Path

import numpy as np

from qaoa_precond import bench
from qaoa_precond import rng as rng_streams
from qaoa_precond.config import configure_logging, load_hyper_file, read_yaml
from qaoa_precond.errors import ConfigError
from qaoa_precond.optimizers import OptimizationRun, StopRule
from qaoa_precond.problems import brute_force, read_graph
from qaoa_precond.qaoa_sim import AnsatzConfig, Evaluator
from qaoa_precond.schemas import get_schema, resolve_hyper

logger = logging.getLogger(__name__)

#------------------------------------------------------------------------
# Keys of a run configuration file, with their defaults.
# problem_file and method have no default.
#------------------------------------------------------------------------
_run_config_defaults = {
    'problem_file':    None,
    'problem':         None,
    'method':          None,
    'hyper_file':      None,
    'hyper':           {},
    'p':               1,
    'shots':           None,
    'seed':            0,
    'restart':         0,
    'max_iterations':  None,
    'stop_mode':       'none',
    'rho':             0.03,
    'gradient_floor':  0.0,
    'final_shots':     0,
    'verbose':         0,
}


class bmi_QAOAOptimizer(Bmi):
    """
    One QAOA MaxCut optimization run behind the Basic Model Interface.

    Model time counts optimizer iterations: ``update()`` performs one
    iteration and ``update_until(t)`` iterates up to iteration ``t`` or until
    the stopping rule fires.  The parameter vector lives on a rank-1 grid
    (grid 1) of size 2p; every other variable is a scalar on grid 0.
    """

    def __init__(self):
        """Create a BMI optimizer that is ready for initialization."""
        super(bmi_QAOAOptimizer, self).__init__()
        self._name = "QAOA MaxCut optimizer"
        self._values = {}
        self._var_loc = "node"
        self._start_time = 0
        self._end_time = np.finfo("d").max
        self._time_units = "iteration"
        self._time_step_size = 1.0
        self.run = None
        self.cfg_bmi = None

    #----------------------------------------------
    # Required, static attributes of the model
    #----------------------------------------------
    _att_map = {
        'model_name':  'QAOA MaxCut optimizer',
        'version':     '1.0'}

    #---------------------------------------------
    # Input variable names
    #---------------------------------------------
    _input_var_names = ['optimizer__learning_rate']

    #---------------------------------------------
    # Output variable names
    #---------------------------------------------
    _output_var_names = ['maxcut__expected_cost',
                         'maxcut__best_expected_cost',
                         'optimizer__gradient_norm',
                         'optimizer__quantum_call_count',
                         'qaoa__angles']

    #------------------------------------------------------
    # Long variable name -> [internal name, units, grid id]
    #------------------------------------------------------
    _var_name_units_map = {
        'maxcut__expected_cost':          ['f_value', '1', 0],
        'maxcut__best_expected_cost':     ['best_f', '1', 0],
        'optimizer__gradient_norm':       ['grad_norm', '1', 0],
        'optimizer__quantum_call_count':  ['qcalls', '1', 0],
        'qaoa__angles':                   ['theta', 'rad', 1],
        'optimizer__learning_rate':       ['learning_rate', '1', 0],
    }

    #------------------------------------------------------------
    #------------------------------------------------------------
    # BMI: Model Control Functions
    #------------------------------------------------------------
    #------------------------------------------------------------

    #-------------------------------------------------------------------
    def initialize(self, bmi_cfg_file=None):
        if bmi_cfg_file is None:
            raise ConfigError("no configuration provided, nothing to do")
        self.cfg_bmi = self._parse_config(read_yaml(Path(bmi_cfg_file)))
        configure_logging(self.cfg_bmi['verbose'])

        self._var_name_map_long_first = {long_name: self._var_name_units_map[long_name][0]
                                         for long_name in self._var_name_units_map}
        self._var_units_map = {long_name: self._var_name_units_map[long_name][1]
                               for long_name in self._var_name_units_map}

        cfg = self.cfg_bmi
        graph = read_graph(cfg['problem_file'])
        method = cfg['method']
        problem = cfg['problem'] or Path(cfg['problem_file']).stem
        hyper = self.get_hyperparameters()
        truth = brute_force(graph)
        max_iterations = cfg['max_iterations']
        if max_iterations is None:
            max_iterations = get_schema(method).iteration_cap
        stop = StopRule(max_iterations=int(max_iterations), tolerance_mode=cfg['stop_mode'],
                        rho=float(cfg['rho']), reference=truth, gradient_floor=float(cfg['gradient_floor']))

        # ------------- Same streams as a benchmark run -----------------------#
        seed, restart, p = int(cfg['seed']), int(cfg['restart']), int(cfg['p'])
        evaluator = Evaluator(graph, AnsatzConfig(graph.n_vertices, p, cfg['shots']),
                              rng=rng_streams.stream(seed, rng_streams.SHOTS, problem, method, restart))
        self.truth = truth
        self.run = OptimizationRun(method, evaluator, bench.initial_theta(seed, problem, restart, p), hyper, stop,
                                   rng_streams.stream(seed, rng_streams.OPTIMIZER, problem, method, restart),
                                   seed, restart, problem)
        self._end_time = float(max_iterations)

        # -------------- Initialize all the variables --------------------------#
        for long_name, (short_name, _, grid) in self._var_name_units_map.items():
            size = 2 * p if grid == 1 else 1
            self._values[long_name] = np.zeros(size, dtype=np.float64)
        self._values['optimizer__learning_rate'][0] = self.run.optimizer.learning_rate
        self._values['optimizer__gradient_norm'][0] = np.nan
        self.t = self._start_time
        self._refresh_outputs()

    #------------------------------------------------------------
    def update(self):
        """Perform one optimizer iteration (nothing once the run has stopped)."""
        learning_rate = float(self._values['optimizer__learning_rate'][0])
        if learning_rate != self.run.optimizer.learning_rate:
            self.run.optimizer.set_learning_rate(learning_rate)
        entry = self.run.advance()
        if entry is not None:
            self.t = float(entry.iteration)
        self._refresh_outputs()

    #------------------------------------------------------------
    def update_until(self, then):
        """Iterate until model time ``then`` or until the run stops.
        Parameters
        ----------
        then : float
            Iteration count to reach.
        """
        while self.get_current_time() < then and not self.run.done:
            self.update()

    #------------------------------------------------------------
    def finalize(self):
        """Sample the final state when configured, then release the evaluator."""
        if self.run is None:
            return
        shots = int(self.cfg_bmi['final_shots'])
        if shots > 0 and self.run.record.trajectory:
            self.run.sample_final(shots, self.truth)
        self.run.oracle = None

    #------------------------------------------------------------
    #------------------------------------------------------------
    # Run: SETUP Functions
    #------------------------------------------------------------
    #------------------------------------------------------------
    def get_hyperparameters(self):
        """
        Schema defaults, overridden by ``hyper_file`` (which must then name
        every tunable) and by the inline ``hyper`` mapping.
        """
        cfg = self.cfg_bmi
        overrides = {}
        if cfg['hyper_file'] is not None:
            overrides.update(load_hyper_file(cfg['hyper_file']))
            resolve_hyper(cfg['method'], overrides, require_complete=True)
        overrides.update(cfg['hyper'] or {})
        return resolve_hyper(cfg['method'], overrides)

    def _refresh_outputs(self):
        record = self.run.record
        self._values['maxcut__expected_cost'][0] = record.final_f
        self._values['maxcut__best_expected_cost'][0] = record.best_f
        self._values['optimizer__quantum_call_count'][0] = self.run.qcalls
        self._values['qaoa__angles'][:] = record.final_theta
        if record.trajectory and record.trajectory[-1].grad_norm is not None:
            self._values['optimizer__gradient_norm'][0] = record.trajectory[-1].grad_norm

    @property
    def record(self):
        return self.run.record

    @property
    def done(self):
        return self.run.done

    #-------------------------------------------------------------------
    #-------------------------------------------------------------------
    # BMI: Model Information Functions
    #-------------------------------------------------------------------
    #-------------------------------------------------------------------
    def get_attribute(self, att_name):
        try:
            return self._att_map[att_name.lower()]
        except KeyError:
            raise KeyError(f"no attribute {att_name!r}") from None

    def get_input_var_names(self):
        return self._input_var_names

    def get_output_var_names(self):
        return self._output_var_names

    def get_component_name(self):
        """Name of the component."""
        return self._name

    def get_input_item_count(self):
        return len(self._input_var_names)

    def get_output_item_count(self):
        return len(self._output_var_names)

    def get_value(self, var_name: str, dest: np.ndarray) -> np.ndarray:
        """
        Copy values for the named variable into the provided destination array.

        Parameters
        ----------
        var_name : str
            Long variable name.
        dest : np.ndarray
            A numpy array into which to copy the variable values.
        Returns
        -------
        np.ndarray
            Copy of values.
        """
        dest[:] = self.get_value_ptr(var_name)
        return dest

    def get_value_ptr(self, var_name: str) -> np.ndarray:
        """Backing array of the named variable."""
        try:
            return self._values[var_name]
        except KeyError:
            raise KeyError(f"unknown variable {var_name!r}") from None

    def get_value_at_indices(self, var_name: str, dest: np.ndarray, indices: np.ndarray) -> np.ndarray:
        dest[:] = self.get_value_ptr(var_name)[np.asarray(indices)]
        return dest

    def set_value(self, var_name: str, values: np.ndarray):
        """Set model values.

        Only input variables can be set; the learning rate takes effect at
        the next ``update()``.
        """
        if var_name not in self._input_var_names:
            raise KeyError(f"{var_name!r} is not an input variable")
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if not np.all(values > 0):
            raise ConfigError(f"{var_name} must be positive, got {values}")
        self.get_value_ptr(var_name)[:] = values

    def set_value_at_indices(self, var_name: str, inds: np.ndarray, src: np.ndarray):
        if var_name not in self._input_var_names:
            raise KeyError(f"{var_name!r} is not an input variable")
        self.get_value_ptr(var_name)[np.asarray(inds)] = src

    def get_var_name(self, long_var_name):
        return self._var_name_map_long_first[long_var_name]

    def get_var_units(self, long_var_name):
        return self._var_units_map[long_var_name]

    def get_var_type(self, long_var_name):
        return self.get_value_ptr(long_var_name).dtype.name

    def get_var_grid(self, name):
        return self._var_name_units_map[name][2]

    def get_var_itemsize(self, name):
        return self.get_value_ptr(name).itemsize

    def get_var_nbytes(self, var_name):
        return self.get_value_ptr(var_name).nbytes

    def get_var_location(self, name):
        if name in (self._output_var_names + self._input_var_names):
            return self._var_loc

    def get_var_rank(self, long_var_name):
        return self.get_grid_rank(self.get_var_grid(long_var_name))

    def get_start_time(self):
        return self._start_time

    def get_end_time(self):
        return self._end_time

    def get_current_time(self):
        return self.t

    def get_time_step(self):
        return self._time_step_size

    def get_time_units(self):
        return self._time_units

    #-------------------------------------------------------------------
    # Grids: 0 is a scalar, 1 is the parameter vector
    #-------------------------------------------------------------------
    def get_grid_rank(self, grid_id):
        return 0 if grid_id == 0 else 1

    def get_grid_size(self, grid_id):
        return 1 if grid_id == 0 else self._values['qaoa__angles'].size

    def get_grid_type(self, grid_id=0):
        return 'scalar' if grid_id == 0 else 'vector'

    def get_grid_shape(self, grid_id, shape):
        if grid_id == 0:
            raise NotImplementedError("get_grid_shape")
        shape[:] = self.get_grid_size(grid_id)
        return shape

    def get_grid_edge_count(self, grid):
        raise NotImplementedError("get_grid_edge_count")

    def get_grid_edge_nodes(self, grid, edge_nodes):
        raise NotImplementedError("get_grid_edge_nodes")

    def get_grid_face_count(self, grid):
        raise NotImplementedError("get_grid_face_count")

    def get_grid_face_edges(self, grid, face_edges):
        raise NotImplementedError("get_grid_face_edges")

    def get_grid_face_nodes(self, grid, face_nodes):
        raise NotImplementedError("get_grid_face_nodes")

    def get_grid_node_count(self, grid):
        raise NotImplementedError("get_grid_node_count")

    def get_grid_nodes_per_face(self, grid, nodes_per_face):
        raise NotImplementedError("get_grid_nodes_per_face")

    def get_grid_origin(self, grid_id, origin):
        raise NotImplementedError("get_grid_origin")

    def get_grid_spacing(self, grid_id, spacing):
        raise NotImplementedError("get_grid_spacing")

    def get_grid_x(self, grid, x):
        raise NotImplementedError("get_grid_x")

    def get_grid_y(self, grid, y):
        raise NotImplementedError("get_grid_y")

    def get_grid_z(self, grid, z):
        raise NotImplementedError("get_grid_z")

    #-------------------------------------------------------------------
    def _parse_config(self, cfg):
        unknown = sorted(set(cfg) - set(_run_config_defaults))
        if unknown:
            raise ConfigError(f"unknown run configuration key {unknown[0]!r}; "
                              f"expected {sorted(_run_config_defaults)}")
        for key in ('problem_file', 'method'):
            if cfg.get(key) is None:
                raise ConfigError(f"missing run configuration key {key!r}")
        get_schema(cfg['method'])
        parsed = dict(_run_config_defaults)
        parsed.update(cfg)
        return parsed
