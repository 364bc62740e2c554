"""Variance estimation for ranked set and judgment post-stratified samples using a concomitant."""

from rssvar.estimators import (
    EstimatorId,
    VarianceEstimate,
    concomitant_variance,
    var_concomitant,
    var_frey_feeman,
    var_jps_stratified,
    var_maceachern,
    var_rss_empirical,
)
from rssvar.kernreg import bandwidth_grid, cv_score, nw_estimate, select_bandwidth
from rssvar.montecarlo import Scenario, ScenarioResult, run_scenario, true_variance
from rssvar.sampling import (
    RankingModel,
    Sample,
    Scheme,
    TargetTransform,
    draw_ds_sample,
    draw_jps_sample,
    draw_rss_sample,
)

__version__ = "0.1.0"
