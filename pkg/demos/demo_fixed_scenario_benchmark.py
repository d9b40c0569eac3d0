"""Head-to-head MTD-selection benchmark on the six calibrated scenarios.

Runs CRM, CCD, and the group walk on the same common-random-number
streams (every design faces the same simulated patients), then prints the
fraction of runs selecting the true MTD at the half and full horizons.
Drop M for a quicker pass; 1000 runs per scenario takes a couple of
minutes in total.
"""

import sys

from dosefind.crm import PRIOR_PRESETS, SKELETON_PRESETS
from dosefind.scenarios import standard_scenarios
from dosefind.simulate import run_ensemble, summarize_ensemble

M = int(sys.argv[1]) if len(sys.argv) > 1 else 300

designs = {
    "crm": {"design": "crm", "skeleton": list(SKELETON_PRESETS["six_level"]),
            "prior": {"mu": -0.2, "sigma": 0.85}, "cohort_size": 2},
    "ccd": {"design": "ccd", "half_width": 0.1, "cohort_size": 2},
    "walk": {"design": "group_ud", "k": 2, "a": 0, "b": 1},
}

print(f"{M} runs per scenario, 16 cohorts of 2, start at d2\n")
print(f"{'scenario':<12}{'mtd':>4}" + "".join(
    f"{name + ' 8/16':>16}" for name in designs))
for name, scenario in standard_scenarios().items():
    cells = []
    for dcfg in designs.values():
        metrics = run_ensemble(dcfg, 0.3, [scenario], master_seed=20240801,
                               n_cohorts=16, start_level=2,
                               runs_per_scenario=M)
        report = summarize_ensemble(metrics, 16, 6)
        cells.append(f"{100 * report.success_half:5.1f}/"
                     f"{100 * report.success_full:4.1f}")
    print(f"{name:<12}{scenario.true_mtd:>4}" + "".join(
        f"{c:>16}" for c in cells))
