import numpy as np
import pytest

from semstats.core import empirical_class_stats, zscore_apply, zscore_fit
from semstats.mapper import MapperBundle, MapperParams
from semstats.synth import SynthConfig, generate_world


def linear_mlp(A: np.ndarray) -> MapperParams:
    """Exact linear map s -> A s as a 2-layer ReLU net: relu(As) - relu(-As)."""
    out_dim, in_dim = A.shape
    eye = np.eye(out_dim)
    return MapperParams(
        W1=np.vstack([A, -A]),
        b1=np.zeros(2 * out_dim),
        W2=np.hstack([eye, -eye]),
        b2=np.zeros(out_dim),
    )


def least_squares_bundle(ds) -> MapperBundle:
    """Mappers fit by least squares on the base classes; no SGD involved.

    Gives strong (near-oracle) text predictions in worlds whose statistics
    are close to linear in the text embedding, which is exactly what the
    synthetic generator produces.
    """
    base = ds.split_classes("base")
    S = np.stack([c.text for c in base])
    stats = [empirical_class_stats(c.features) for c in base]
    means = np.stack([s.mean for s in stats])
    variances = np.stack([s.var_diag for s in stats])
    mu_std = zscore_fit(means)
    sigma_std = zscore_fit(variances)
    # affine fit: append a constant feature, then fold the intercept into b2
    S1 = np.hstack([S, np.ones((len(S), 1))])
    W_mu, *_ = np.linalg.lstsq(S1, zscore_apply(mu_std, means), rcond=None)
    W_sig, *_ = np.linalg.lstsq(S1, zscore_apply(sigma_std, variances), rcond=None)

    def with_intercept(W) -> MapperParams:
        p = linear_mlp(W[:-1].T)
        return MapperParams(W1=p.W1, b1=p.b1, W2=p.W2, b2=W[-1])

    return MapperBundle(
        mu_params=with_intercept(W_mu),
        sigma_params=with_intercept(W_sig),
        mu_std=mu_std,
        sigma_std=sigma_std,
    )


@pytest.fixture(scope="session")
def small_world():
    ds, truth = generate_world(
        SynthConfig(
            n_classes=40,
            n_base=20,
            n_val=8,
            n_test=12,
            feat_dim=12,
            text_dim=6,
            samples_per_class=60,
            seed=9,
        )
    )
    return ds, truth


@pytest.fixture(scope="session")
def small_bundle(small_world):
    ds, _ = small_world
    return least_squares_bundle(ds)
