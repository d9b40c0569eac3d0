"""JSON design configurations shared by the batch CLI and the trial service.

A design config is a tagged object: {"design": <name>, ...parameters}.
Supported designs and their parameters:

    group_ud          k, a (default 0), b (default 1)
    kinrow            k (default 2)
    ccd               half_width (default 0.1), cohort_size (default 1)
    three_plus_three  (no parameters)
    crm               skeleton, prior {mu, sigma}, model "power"|"chevret",
                      beta0 (default 0), theta0 (default 1),
                      step_constraint (default true), cohort_size (default 1)
    rad               cohort_size (default 1)
    hybrid            base (up-and-down config), overlay (crm or ccd config),
                      beta

The trial target rate is supplied alongside, not inside, the design config
(it belongs to the experiment, not the rule).
"""

from __future__ import annotations

from .crm import ChevretModel, LogNormalPrior, PowerModel, Skeleton
from .designs import (
    CcdDesign,
    CcdRule,
    CrmDesign,
    GroupUdRule,
    GroupUpDownDesign,
    HybridDesign,
    HybridRule,
    KInARowDesign,
    RadDesign,
    ThreePlusThreeDesign,
)


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required config field '{key}'")
    return cfg[key]


def design_from_config(cfg: dict, target: float):
    """Instantiate the design policy described by a config dict."""
    if not isinstance(cfg, dict):
        raise ConfigError("design config must be an object")
    name = _require(cfg, "design")
    try:
        if name == "group_ud":
            rule = GroupUdRule(k=int(_require(cfg, "k")), a=int(cfg.get("a", 0)),
                               b=int(cfg.get("b", 1)))
            return GroupUpDownDesign(rule)
        if name == "kinrow":
            return KInARowDesign(k=int(cfg.get("k", 2)))
        if name == "ccd":
            rule = CcdRule(target=target,
                           half_width=float(cfg.get("half_width", 0.1)))
            return CcdDesign(rule, cohort_size=int(cfg.get("cohort_size", 1)))
        if name == "three_plus_three":
            return ThreePlusThreeDesign()
        if name == "crm":
            skeleton = Skeleton(tuple(_require(cfg, "skeleton")))
            prior_cfg = _require(cfg, "prior")
            prior = LogNormalPrior(mu=float(_require(prior_cfg, "mu")),
                                   sigma=float(_require(prior_cfg, "sigma")))
            model_name = cfg.get("model", "power")
            if model_name == "power":
                model = PowerModel(skeleton)
            elif model_name == "chevret":
                model = ChevretModel(skeleton, beta0=float(cfg.get("beta0", 0.0)),
                                     theta0=float(cfg.get("theta0", 1.0)))
            else:
                raise ConfigError(f"unknown crm model '{model_name}'")
            return CrmDesign(model, prior,
                             step_constraint=bool(cfg.get("step_constraint", True)),
                             cohort_size=int(cfg.get("cohort_size", 1)))
        if name == "rad":
            return RadDesign(cohort_size=int(cfg.get("cohort_size", 1)))
        if name == "hybrid":
            base = design_from_config(_require(cfg, "base"), target)
            overlay = design_from_config(_require(cfg, "overlay"), target)
            if not isinstance(base, (GroupUpDownDesign, KInARowDesign)):
                raise ConfigError("hybrid base must be an up-and-down design")
            if not isinstance(overlay, (CrmDesign, CcdDesign)):
                raise ConfigError("hybrid overlay must be crm or ccd")
            return HybridDesign(base, overlay, HybridRule(float(_require(cfg, "beta"))))
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid '{name}' config: {exc}") from exc
    raise ConfigError(f"unknown design '{name}'")


def default_start_level(levels: int) -> int:
    """Second level on grids of five or more, lowest otherwise."""
    return 2 if levels >= 5 else 1
