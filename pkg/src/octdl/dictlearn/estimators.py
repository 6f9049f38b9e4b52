"""scikit-learn estimators wrapping the three learners.

Unlike the functional API (one sample per *column*), the estimators follow
scikit-learn's convention: ``X`` has shape ``(n_samples, n_features)``.
"""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .classify import RULES, default_rule, predict
from .structure import TrainConfig
from .training import train


class _DictionaryClassifier(ClassifierMixin, BaseEstimator):
    _algorithm = None

    def _config(self):
        return TrainConfig(
            lambda1=self.lambda1, lambda2=self.lambda2, eta=getattr(self, "eta", 0.0),
            gamma=self.gamma, w=getattr(self, "w", 0.5), n_atoms=self.n_atoms,
            n_shared=getattr(self, "n_shared", 0), outer_iters=self.max_iter, tol=self.tol,
            seed=self.random_state if self.random_state is not None else 0,
            code_iters=self.code_iters, dict_iters=self.dict_iters)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        if self.rule is not None and self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        self.classes_ = np.unique(y)
        self.model_ = train(self._algorithm, X.T, y, self._config())
        self.n_features_in_ = X.shape[1]
        self.dictionary_ = self.model_.dictionary
        self.objective_trace_ = np.asarray(self.model_.objective_trace)
        self.n_iter_ = len(self.model_.objective_trace)
        return self

    def class_scores(self, X):
        """Per-class scores, shape ``(n_samples, n_classes)``; lower is better."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        _, scores = predict(self.model_, X.T, self.rule or default_rule(self._algorithm))
        return scores

    def decision_function(self, X):
        return -self.class_scores(X)

    def predict(self, X):
        return self.classes_[np.argmin(self.class_scores(X), axis=1)]


class FDDLClassifier(_DictionaryClassifier):
    """Fisher discrimination dictionary learning classifier.

    Parameters
    ----------
    n_atoms : int
        Atoms per class sub-dictionary.
    lambda1, lambda2 : float
        Weights of the l1 penalty and the Fisher term.
    gamma : float
        Code penalty used by the ``gc``/``lc`` decision rules.
    rule : {'gc', 'lc', 'lrsdl'} or None
        Decision rule; ``None`` picks the global rule.
    """

    _algorithm = "fddl"

    def __init__(self, n_atoms=32, lambda1=0.01, lambda2=0.01, gamma=0.01, rule=None,
                 max_iter=50, tol=1e-5, code_iters=30, dict_iters=10, random_state=None):
        self.n_atoms = n_atoms
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.gamma = gamma
        self.rule = rule
        self.max_iter = max_iter
        self.tol = tol
        self.code_iters = code_iters
        self.dict_iters = dict_iters
        self.random_state = random_state


class COPARClassifier(_DictionaryClassifier):
    """Particularity (class) plus commonality (shared) dictionary classifier."""

    _algorithm = "copar"

    def __init__(self, n_atoms=32, n_shared=16, lambda1=0.01, lambda2=0.01, gamma=0.01,
                 rule=None, max_iter=50, tol=1e-5, code_iters=30, dict_iters=10,
                 random_state=None):
        self.n_atoms = n_atoms
        self.n_shared = n_shared
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.gamma = gamma
        self.rule = rule
        self.max_iter = max_iter
        self.tol = tol
        self.code_iters = code_iters
        self.dict_iters = dict_iters
        self.random_state = random_state


class LRSDLClassifier(_DictionaryClassifier):
    """Low-rank shared dictionary classifier; ``eta`` weights the nuclear norm of D_0."""

    _algorithm = "lrsdl"

    def __init__(self, n_atoms=32, n_shared=16, lambda1=0.01, lambda2=0.01, eta=0.1,
                 gamma=0.01, w=0.5, rule=None, max_iter=50, tol=1e-5, code_iters=30,
                 dict_iters=10, random_state=None):
        self.n_atoms = n_atoms
        self.n_shared = n_shared
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.eta = eta
        self.gamma = gamma
        self.w = w
        self.rule = rule
        self.max_iter = max_iter
        self.tol = tol
        self.code_iters = code_iters
        self.dict_iters = dict_iters
        self.random_state = random_state


ESTIMATORS = {"fddl": FDDLClassifier, "copar": COPARClassifier, "lrsdl": LRSDLClassifier}
