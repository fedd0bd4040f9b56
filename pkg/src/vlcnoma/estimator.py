"""scikit-learn style wrapper so the simulator composes with pipelines and grid searches.

``X`` is an ``(n_users, 3)`` array of receiver positions in metres.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .alloc import evaluate_fixed, optimize
from .config import ScenarioConfig, load_scenario
from .receiver import trace_channels
from .runner import build_access_points, build_noise, build_receiver, build_scene

OUTPUT_COLUMNS = ("dc_gain", "bandwidth_hz", "sinr", "rate_bps")


class VLCNomaSimulator(TransformerMixin, BaseEstimator):
    """Allocate NOMA users to access points and report their links.

    ``fit`` builds the discretized room for the scenario (the expensive,
    user-independent part), then traces and allocates the users in ``X``.
    ``transform`` re-runs tracing and allocation for new positions against
    the fitted room and returns one row of :data:`OUTPUT_COLUMNS` per user.
    """

    def __init__(self, scenario="paper_scenario", receiver="adr", noma_mode="literal", objective="sum-sinr",
                 max_order=2, inter_ap=False, threads=1):
        self.scenario = scenario
        self.receiver = receiver
        self.noma_mode = noma_mode
        self.objective = objective
        self.max_order = max_order
        self.inter_ap = inter_ap
        self.threads = threads

    def _config(self) -> ScenarioConfig:
        if isinstance(self.scenario, ScenarioConfig):
            return self.scenario
        return load_scenario(self.scenario)

    def _validate(self, X, reset):
        X = check_array(X, dtype=float, ensure_min_samples=1)
        if X.shape[1] != 3:
            raise ValueError(f"X must have 3 columns (x, y, z), got {X.shape[1]}")
        if reset:
            self.n_features_in_ = 3
        room = self.scene_.room
        for p in X:
            if not room.contains(p):
                raise ValueError(f"receiver position {tuple(p)} lies outside the room")
        return X

    def fit(self, X, y=None):
        if self.receiver not in ("adr", "wide"):
            raise ValueError(f"receiver must be 'adr' or 'wide', got {self.receiver!r}")
        cfg = self._config()
        self.config_ = cfg
        self.scene_ = build_scene(cfg)
        self.access_points_ = build_access_points(cfg)
        self.noise_ = build_noise(cfg)
        X = self._validate(X, reset=True)
        self.channels_, self.report_ = self._allocate(X)
        self.assignment_ = self.report_.assignment
        return self

    def _allocate(self, X, fixed=None):
        t = self.config_.tracing
        receivers = [build_receiver(self.config_, self.receiver, p, self.scene_.room) for p in X]
        ids = [f"U{i + 1}" for i in range(len(X))]
        channels = trace_channels(self.scene_, self.access_points_, receivers, ids, self.max_order, t.bin_width,
                                  t.scan_limit, t.pad_factor, self.threads)
        if fixed is not None:
            _, report = evaluate_fixed(fixed, channels, self.noise_, self.noma_mode, self.objective,
                                       self.access_points_, self.inter_ap)
        else:
            _, report = optimize(channels, self.noise_, self.noma_mode, self.objective, self.access_points_,
                                 self.inter_ap, self.config_.noma.enumeration_cap, self.threads)
        return channels, report

    def transform(self, X):
        check_is_fitted(self, "report_")
        X = self._validate(X, reset=False)
        _, report = self._allocate(X)
        return np.array([[l.dc_gain, l.bandwidth, l.sinr, l.rate] for l in report.links])

    def predict(self, X):
        """Per-user data rate in bit/s."""
        return self.transform(X)[:, 3]

    def score(self, X, y=None):
        """The allocation objective (sum SINR or sum rate) reached for ``X``."""
        out = self.transform(X)
        return float(out[:, 2].sum() if self.objective == "sum-sinr" else out[:, 3].sum())
