"""The finite-difference component registry."""

import numpy as np
import pytest

import vaecomm.gradcheck as gradcheck
from vaecomm.gradcheck import component_names, run_all, run_component
from vaecomm.tensor import from_op


def test_every_component_passes_at_reduced_trials():
    reports = run_all(trials=5, seed=3)
    assert len(reports) == len(component_names())
    for r in reports:
        assert r.passed, f"{r.name} failed with max rel err {r.max_rel_err}"
        assert r.max_rel_err < 1e-4
        assert r.trials == 5


def test_registry_covers_layers_and_losses():
    names = component_names()
    for required in ("conv1d_k1_input", "conv1d_k3_input", "batchnorm_train",
                     "batchnorm_eval", "gaussian_sampling_mu", "power_norm",
                     "elu", "relu", "softmax", "kl_mu", "binary_cross_entropy",
                     "beta_vae_loss"):
        assert required in names


def test_reports_are_deterministic():
    a = run_component("softmax", trials=4, seed=9)
    b = run_component("softmax", trials=4, seed=9)
    assert a == b


def test_unknown_component_is_rejected():
    with pytest.raises(KeyError, match="unknown component"):
        run_component("does_not_exist", trials=1)


def test_too_strict_tolerance_fails():
    report = run_component("beta_vae_loss", trials=3, rel_tol=1e-12, seed=0)
    assert not report.passed
    assert report.max_rel_err > 1e-12


def test_injected_broken_backward_is_caught(monkeypatch):
    def broken_builder(rng):
        x0 = rng.normal(size=(3,))
        def f(x):
            # deliberately wrong gradient: claims d/dx(x*x) = x
            return from_op(
                np.array(float((x.data * x.data).sum())),
                (x,),
                lambda g: (g * x.data,),
            )
        return f, x0

    monkeypatch.setattr(gradcheck, "REGISTRY",
                        gradcheck.REGISTRY + (("broken_square", broken_builder),))
    report = run_component("broken_square", trials=2, seed=1)
    assert not report.passed
    reports = run_all(trials=2, seed=1)
    failing = [r.name for r in reports if not r.passed]
    assert failing == ["broken_square"]
