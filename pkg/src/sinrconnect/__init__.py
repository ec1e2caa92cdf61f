"""Connectivity and aggregation scheduling under the SINR interference model.

Main entry points:

* :func:`run_init` builds a bi-directional spanning tree with a simulated
  distributed protocol (uniform power per round, geometric length classes).
* :func:`reschedule_mean` reschedules a tree's links under mean power.
* :func:`tree_via_capacity` rebuilds a tree whose aggregation schedule uses one
  slot per capacity selection, in ``mean`` or ``arbitrary`` power mode.
* :mod:`sinrconnect.oracle` gives exhaustive reference answers on small sets.
"""

from .analysis import sparsity, verify_bitree
from .capacity import CapacityParams, assign_power, distr_cap, tree_via_capacity
from .config import Config
from .generate import GeneratorSpec, generate
from .init_tree import InitParams, run_init
from .model import Instance, Link, ModelParams, PowerAssignment, affectance, is_feasible
from .scheduler import Schedule, SchedulerParams, reschedule_mean, verify_schedule
from .tree import BiTree, TreeLink

__version__ = "0.1.0"

__all__ = [
    "BiTree",
    "CapacityParams",
    "Config",
    "GeneratorSpec",
    "InitParams",
    "Instance",
    "Link",
    "ModelParams",
    "PowerAssignment",
    "Schedule",
    "SchedulerParams",
    "TreeLink",
    "affectance",
    "assign_power",
    "distr_cap",
    "generate",
    "is_feasible",
    "reschedule_mean",
    "run_init",
    "sparsity",
    "tree_via_capacity",
    "verify_bitree",
    "verify_schedule",
]
