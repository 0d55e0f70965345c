"""Defect-mediated control of Majorana zero modes: model certification,
passage synthesis, propagation and figure-level experiments."""

__version__ = "0.1.0"

from .config import RunConfig, config_digest, parse_config, serialize_config
from .dynamics import (Frame, HamiltonianModel, Trajectory,
                       build_control_hamiltonian, control_model,
                       effective_hamiltonian, frame_transform, propagate)
from .experiments import (AlgebraReport, BraidOperatorReport, ErrorSpec,
                          SweepResult, run_braiding, run_chiral,
                          run_error_sweep, verify_braid_algebra)
from .kitaev import (ChainParams, MajoranaCouplingMatrix, ZeroMode,
                     build_majorana_coupling, find_zero_modes)
from .synthesis import (ChiralParams, EffectiveSchedule, LabPulseSet,
                        PassageParams, braid_schedule, chiral_schedule,
                        lab_pulses_from_effective, linear_braid_profile,
                        scale_to_M_modes)
from .uqc import (AncillaryFrame, GlobalPhases, RotatedDecomposition,
                  check_passage, correction_margin, global_phase,
                  rotated_hamiltonian, second_order_infidelity)

__all__ = [name for name in dir() if not name.startswith("_")]
