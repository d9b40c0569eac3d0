"""Walk every transition rule through the same short trial history.

Each design sees the identical state after each cohort and proposes its
next dose; the printout makes the short-memory / long-memory contrast
tangible: the group walk reacts only to the last cohort, CCD to the
cumulative rate at the current dose, CRM to everything through the
posterior.
"""

import numpy as np

from dosefind import (
    CcdDesign, CcdRule, CrmDesign, GroupUdRule, GroupUpDownDesign,
    LogNormalPrior, PowerModel, Skeleton, empty_state,
)
from dosefind.crm import PRIOR_PRESETS, SKELETON_PRESETS

COHORTS = [(2, 2, 0), (3, 2, 0), (4, 2, 1), (4, 2, 1), (3, 2, 0), (4, 2, 2)]

designs = {
    "group walk (2,0,1)": GroupUpDownDesign(GroupUdRule(2, 0, 1)),
    "ccd +-0.1": CcdDesign(CcdRule(0.3, 0.1), cohort_size=2),
    "crm power/moderate": CrmDesign(
        PowerModel(Skeleton(SKELETON_PRESETS["six_level"])),
        PRIOR_PRESETS["moderate"], cohort_size=2),
}

print(f"{'cohort':>22}  " + "  ".join(f"{name:>20}" for name in designs))
state = empty_state(6, 0.3)
for level, size, dlts in COHORTS:
    state = state.with_cohort(level, size, dlts)
    row = [f"d{level} {dlts}/{size}".rjust(22)]
    for design in designs.values():
        action = design.next_action(state, np.random.default_rng(0))
        row.append(f"-> d{action.level}".rjust(20))
    print("  ".join(row))

print("\nfinal MTD picks:")
for name, design in designs.items():
    print(f"  {name:>22}: d{design.select_mtd(state)}")
