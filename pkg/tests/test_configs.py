import pytest

from dosefind.configs import ConfigError, default_start_level, design_from_config
from dosefind.designs import (
    CcdDesign,
    CrmDesign,
    GroupUpDownDesign,
    HybridDesign,
    KInARowDesign,
    RadDesign,
    ThreePlusThreeDesign,
)


def test_each_design_tag_parses():
    cases = [
        ({"design": "group_ud", "k": 2}, GroupUpDownDesign, 2),
        ({"design": "kinrow"}, KInARowDesign, 1),
        ({"design": "ccd", "half_width": 0.1, "cohort_size": 2}, CcdDesign, 2),
        ({"design": "three_plus_three"}, ThreePlusThreeDesign, 3),
        ({"design": "crm", "skeleton": [0.1, 0.3, 0.5],
          "prior": {"mu": 0.0, "sigma": 1.0}, "cohort_size": 2}, CrmDesign, 2),
        ({"design": "rad"}, RadDesign, 1),
        ({"design": "hybrid", "beta": 0.25,
          "base": {"design": "group_ud", "k": 2},
          "overlay": {"design": "ccd", "cohort_size": 2}}, HybridDesign, 2),
    ]
    for cfg, cls, cohort in cases:
        design = design_from_config(cfg, 0.3)
        assert isinstance(design, cls)
        assert design.cohort_size == cohort


def test_crm_chevret_model_config():
    design = design_from_config(
        {"design": "crm", "model": "chevret", "skeleton": [0.1, 0.3, 0.5],
         "prior": {"mu": 0.0, "sigma": 1.0}, "beta0": 0.5, "theta0": 2.0}, 0.3)
    assert design.model.beta0 == 0.5
    assert design.model.theta0 == 2.0


def test_ccd_rule_reads_trial_target():
    design = design_from_config({"design": "ccd", "half_width": 0.05}, 0.2)
    assert design.rule.target == 0.2


def test_config_errors():
    with pytest.raises(ConfigError):
        design_from_config({"design": "nope"}, 0.3)
    with pytest.raises(ConfigError):
        design_from_config({"design": "group_ud"}, 0.3)  # missing k
    with pytest.raises(ConfigError):
        design_from_config({"design": "crm", "skeleton": [0.5, 0.1],
                            "prior": {"mu": 0, "sigma": 1}}, 0.3)
    with pytest.raises(ConfigError):
        design_from_config({"design": "crm", "skeleton": [0.1, 0.5],
                            "prior": {"mu": 0}}, 0.3)  # missing sigma
    with pytest.raises(ConfigError):
        design_from_config({"design": "hybrid", "beta": 0.2,
                            "base": {"design": "ccd"},
                            "overlay": {"design": "ccd"}}, 0.3)
    with pytest.raises(ConfigError):
        design_from_config({"design": "crm", "model": "probit",
                            "skeleton": [0.1, 0.5],
                            "prior": {"mu": 0, "sigma": 1}}, 0.3)
    with pytest.raises(ConfigError):
        design_from_config("not-a-dict", 0.3)


def test_default_start_level():
    assert default_start_level(4) == 1
    assert default_start_level(6) == 2
    assert default_start_level(7) == 2
