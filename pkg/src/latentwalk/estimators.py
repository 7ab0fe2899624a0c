"""scikit-learn style wrappers around training, inversion and enhancement."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .gan import MlpParams, MlpSpec, TrainConfig, criticize, generate, train_wgan
from .inversion import InversionConfig, invert
from .pipeline import PipelineConfig, enhance_batch
from .proto import ProtoConfig
from .sigma import SigmaConfig
from .sphere import sample_prior


def _seed(random_state) -> int:
    if random_state is None:
        return 0
    if isinstance(random_state, (int, np.integer)):
        return int(random_state)
    raise ValueError("random_state must be an int or None; these estimators are deterministic by seed")


def _check_models(generator, critic):
    if not isinstance(generator, MlpParams) or not isinstance(critic, MlpParams):
        raise TypeError("generator and critic must be MlpParams")
    if generator.spec.out_dim != critic.spec.in_dim:
        raise ValueError("generator output width does not match critic input width")


class WGANSampler(BaseEstimator):
    """Toy Wasserstein GAN fitted to 2-D points; ``sample`` draws new points."""

    def __init__(self, latent_dim=16, hidden=(64, 64), critic_steps=5, batch_size=64, clip=0.05,
                 drift=1e-3, lr=1e-4, beta1=0.5, beta2=0.9, iterations=20000, random_state=None):
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.critic_steps = critic_steps
        self.batch_size = batch_size
        self.clip = clip
        self.drift = drift
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.iterations = iterations
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        d = X.shape[1]
        gen_spec = MlpSpec((self.latent_dim, *self.hidden, d))
        critic_spec = MlpSpec((d, *self.hidden, 1), minibatch_stddev=True)
        config = TrainConfig(self.critic_steps, self.batch_size, self.clip, self.drift, self.lr,
                             self.iterations, _seed(self.random_state), self.beta1, self.beta2)
        self.generator_, self.critic_, self.history_ = train_wgan(gen_spec, critic_spec, X, config)
        self.n_features_in_ = d
        return self

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "generator_")
        Z = sample_prior(n_samples, self.latent_dim, _seed(random_state))
        return generate(self.generator_, Z)

    def score_samples(self, X):
        """Critic scores for ``X`` evaluated as one batch."""
        check_is_fitted(self, "critic_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        return criticize(self.critic_, X).scores


class GeneratorInverter(TransformerMixin, BaseEstimator):
    """Maps samples to latents that the generator sends back to them."""

    def __init__(self, generator=None, critic=None, alpha=2.0, beta=1.0, lr=0.01, max_steps=3000,
                 candidates=1000, random_state=None):
        self.generator = generator
        self.critic = critic
        self.alpha = alpha
        self.beta = beta
        self.lr = lr
        self.max_steps = max_steps
        self.candidates = candidates
        self.random_state = random_state

    def fit(self, X=None, y=None):
        _check_models(self.generator, self.critic)
        self.config_ = InversionConfig(self.alpha, self.beta, self.lr, self.max_steps, self.candidates)
        self.n_features_in_ = self.generator.spec.out_dim
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, generator produces {self.n_features_in_}")
        res = invert(self.generator, self.critic, X, self.config_, _seed(self.random_state))
        self.losses_ = res.losses
        return res.z

    def inverse_transform(self, Z):
        check_is_fitted(self, "config_")
        return generate(self.generator, check_array(Z, dtype=np.float64))


class LatentEnhancer(TransformerMixin, BaseEstimator):
    """Moves prior latents toward their protoimages by optimized amounts.

    ``transform`` returns the adjusted latents; ``sigma_`` and ``protos_``
    hold the per-row coefficients and targets from the last call.
    """

    def __init__(self, generator=None, critic=None, lam=3.0, gamma=0.0, delta=0.0, proto_lr=0.1,
                 sigma_lr=0.01, sigma_init=0.7, sigma_bounds=(0.0, 1.0), batch_size=64,
                 mean_proto=False, random_state=None):
        self.generator = generator
        self.critic = critic
        self.lam = lam
        self.gamma = gamma
        self.delta = delta
        self.proto_lr = proto_lr
        self.sigma_lr = sigma_lr
        self.sigma_init = sigma_init
        self.sigma_bounds = sigma_bounds
        self.batch_size = batch_size
        self.mean_proto = mean_proto
        self.random_state = random_state

    def fit(self, X=None, y=None):
        _check_models(self.generator, self.critic)
        lower, upper = self.sigma_bounds
        self.config_ = PipelineConfig(
            InversionConfig(),
            ProtoConfig(lam=self.lam, gamma=self.gamma, delta=self.delta, lr=self.proto_lr),
            SigmaConfig(lr=self.sigma_lr, init=self.sigma_init, lower=lower, upper=upper),
            self.batch_size, self.mean_proto)
        self.n_features_in_ = self.generator.spec.in_dim
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        Z = check_array(X, dtype=np.float64, ensure_min_samples=2)
        if Z.shape[1] != self.n_features_in_:
            raise ValueError(f"latents have {Z.shape[1]} columns, generator expects {self.n_features_in_}")
        res = enhance_batch(self.generator, self.critic, Z, self.config_, _seed(self.random_state))
        self.sigma_, self.protos_, self.report_ = res.sigma, res.Zp, res.report
        return res.Z_hat
