"""Classical and two-photon Hong-Ou-Mandel dip simulation and analysis."""

from .correlator import (DipCurve, EnsembleRecord, analytic_classical_dip, analytic_visibility,
                         cross_correlation, dip_visibility, integrated_intensity)
from .errors import (ConfigError, DomainError, GridError, HomlabError, NormalizationError,
                     PreconditionError, SamplingError, ShapeError)
from .fit import FitResult, fit_classical, fit_quantum, r_squared
from .fock import (JsaModel, QuantumModelParams, TwoModeFockState, beam_splitter_fock,
                   derived_visibility, g_overlap, hom_coincidence, hom_coincidence_noisy)
from .signals import PhaseDistribution, PulseSpec, SampledSignal, TimeGrid, synthesize_pulse
from .splitter import MziConfig, SplitterSpec, mzi_classical, split
from .stats import ConfidenceInterval, SampleSummary, bootstrap_ci, min_samples
from .streams import Stream

__version__ = "0.1.0"
