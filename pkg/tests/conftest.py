import warnings

import pytest
from hypothesis import HealthCheck, settings

from taxiq.model import ModelParams, StabilityWarning

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(autouse=True)
def _quiet_stability_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilityWarning)
        yield


def fig5a(**kw) -> ModelParams:
    base = dict(lam=3.0, mu1=4.0, mu2=5.5, alpha=2.0, capacity_n=20, k1=3, k2=5,
                reward_r=16.0, price_p=6.0, cost_cp=4.0, cost_ct=3.0, cost_cmp=3.0, cost_cmt=3.0)
    base.update(kw)
    return ModelParams(**base)


def fig6a(**kw) -> ModelParams:
    base = dict(lam=3.0, mu1=4.0, mu2=4.5, alpha=4.0, capacity_n=30, k1=3, k2=5,
                reward_r=20.0, price_p=6.0, cost_cp=4.0, cost_ct=3.0, cost_cmp=3.0, cost_cmt=3.0)
    base.update(kw)
    return ModelParams(**base)


fig8a = fig6a  # same caption values; lambda is the swept axis


def fig7(**kw) -> ModelParams:
    base = dict(lam=0.5, mu1=1.0, mu2=6.0, alpha=1.0, capacity_n=10, k1=1, k2=5,
                reward_r=15.0, price_p=6.0, cost_cp=3.0, cost_ct=1.0, cost_cmp=1.0, cost_cmt=1.0)
    base.update(kw)
    return ModelParams(**base)
