"""Matching with vertical and horizontal reservations.

Generalized lexicographic choice rules for institutions, the cumulative
offer mechanism over (individual, institution, category) contracts, and
exhaustive property checks for both.
"""
from .choice import (GLChoice, VARIANTS, build_rules, completion_choose, custom_policy,
                     gl_choose, is_fair_violation, make_overall_rule)
from .com import (CopResult, StabilityVerdict, com_outcome, cumulative_offer_process,
                  eliminates_justified_envy, is_stable)
from .model import (Category, ChoiceConfig, Contract, FORMAT_VERSION, GENERAL, Individual,
                    Instance, Institution, Matching, SubChoiceKind, TransferKind, TransferPolicy,
                    ValidationError, expand_institution_ranking, instance_to_dict,
                    statutory_capacities, validate_instance)
from .subchoice import (SubChoiceInput, hierarchical_subchoice, max_horizontal_utilization,
                        merit_subchoice, meritorious_subchoice)

__all__ = [
    "Category", "ChoiceConfig", "Contract", "CopResult", "FORMAT_VERSION", "GENERAL", "GLChoice",
    "Individual", "Instance", "Institution", "Matching", "StabilityVerdict", "SubChoiceInput",
    "SubChoiceKind", "TransferKind", "TransferPolicy", "VARIANTS", "ValidationError",
    "build_rules", "com_outcome", "completion_choose", "cumulative_offer_process",
    "custom_policy", "eliminates_justified_envy", "expand_institution_ranking", "gl_choose",
    "hierarchical_subchoice", "instance_to_dict", "is_fair_violation", "is_stable",
    "make_overall_rule", "max_horizontal_utilization", "merit_subchoice",
    "meritorious_subchoice", "statutory_capacities", "validate_instance",
]
