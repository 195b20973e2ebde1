"""Double-lambda quantum memory simulations: a five-mode Fock-space engine for
storage/release of light in a collective spin wave, and a 1D Maxwell-Bloch
solver for two probe fields in an EIT medium."""

from .analysis import entanglement_entropy, fidelity, reduce
from .config import ConfigError, ScenarioConfig, load_config, parse_config, serialize
from .controls import ControlSchedule, ScheduleBuilder, ScheduleError, Segment
from .dynamics import AdiabaticityError, ProtocolSpec, StepSizeError, evolve, run_protocol
from .ensemble import CouplingParams, build_hamiltonian, dark_state, mixing_angles
from .fock import CutoffError, FockSpace, LeakageError, build_space, cat_state, coherent_state
from .propagation import CFLError, ContinuumParams, FieldGrid
from .scenarios import RunSummary, run, sweep

__version__ = "0.1.0"
