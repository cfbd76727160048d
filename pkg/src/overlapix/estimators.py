"""scikit-learn style front end.

:class:`EnvelopeEncoder` learns the bins from the union of the training
envelopes and turns envelopes into a 0/1 design matrix, much like a one-hot
encoder over reported ranges. :class:`OverlapAnalyzer` runs the whole
pipeline in ``fit`` and exposes the results as fitted attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bound import lower_bound_proxy
from .enumeration import (
    EnumerationConfig,
    enumerate_potentials,
    overlap_free_b2,
    parse_criterion,
    select_best,
)
from .exceptions import ValidationError
from .model import (
    Characteristic,
    EncodedSynthesis,
    ReportedRange,
    StudyEnvelope,
    build_global_domains,
    check_envelopes,
    encode,
    partition_domains,
)
from .potential import pairwise_matrix, potential
from .validation import (
    check_declarations,
    check_envelopes_input,
    check_min_studies,
    check_unit_fraction,
    resolve_members,
)

_MISSING = ("error", "full-range")


class EnvelopeEncoder(TransformerMixin, BaseEstimator):
    """Binary coverage encoding of reported ranges.

    Parameters
    ----------
    characteristics : list of Characteristic, str or dict, optional
        Declarations in column order. Inferred as categorical from the first
        study when omitted.
    partition : "singleton", int, "width=N" or dict
        Bin scheme, see :func:`overlapix.model.partition_domains`.
    missing : {"error", "full-range"}
        What to do with a study that does not report a characteristic.
    handle_unknown : {"error", "ignore"}
        Atoms unseen during ``fit`` in ``transform``.
    """

    def __init__(self, characteristics=None, partition="singleton", missing="error", handle_unknown="error"):
        self.characteristics = characteristics
        self.partition = partition
        self.missing = missing
        self.handle_unknown = handle_unknown

    def _complete(self, envs, decls, unions):
        out = []
        for env in envs:
            have = {r.characteristic: r for r in env.ranges}
            if len(have) == len(decls):
                out.append(env)
                continue
            ranges = tuple(have.get(c.id) or ReportedRange(c.id, unions[c.id]) for c in decls)
            out.append(StudyEnvelope(env.study_id, env.sample_size, ranges, env.effect, env.se, env.arms))
        return out

    def _prepare(self, X, decls=None):
        if self.missing not in _MISSING:
            raise ValidationError(f"missing must be one of {_MISSING}, got {self.missing!r}")
        allow = self.missing == "full-range"
        envs = check_envelopes_input(X, decls or self.characteristics, allow_missing=allow)
        if decls is None:
            decls = check_declarations(self.characteristics)
            if decls is None:
                decls = [Characteristic(k) for k in envs[0].characteristics] if envs else []
        if allow:
            unions = getattr(self, "_unions", None)
            if unions is None:
                unions = {c.id: frozenset().union(*(e.atoms(c.id) for e in envs if c.id in e.characteristics)) for c in decls}
            envs = self._complete(envs, decls, unions)
        check_envelopes(envs, decls)
        return envs, decls

    def fit(self, X, y=None):
        if hasattr(self, "_unions"):
            del self._unions
        envs, decls = self._prepare(X)
        check_min_studies(len(envs), 1)
        self.characteristics_ = tuple(decls)
        self.domains_ = tuple(build_global_domains(envs, decls))
        self.partition_ = partition_domains(self.domains_, self.partition)
        self.n_bins_ = self.partition_.bin_counts()
        self.n_features_out_ = sum(self.n_bins_)
        self._unions = {d.id: frozenset(d.atoms) for d in self.domains_}
        return self

    def encode(self, X) -> EncodedSynthesis:
        check_is_fitted(self, "partition_")
        envs, _ = self._prepare(X, list(self.characteristics_))
        return encode(envs, self.partition_, self.handle_unknown)

    def transform(self, X):
        """0/1 matrix of shape (n_studies, total bins), characteristic blocks in order."""
        enc = self.encode(X)
        out = np.zeros((enc.n_studies, self.n_features_out_), dtype=np.uint8)
        offset = 0
        for k, m in enumerate(self.n_bins_):
            for i in range(enc.n_studies):
                mask = enc.coverage[k][i]
                for l in range(m):
                    if mask >> l & 1:
                        out[i, offset + l] = 1
            offset += m
        return out

    def inverse_transform(self, Xt):
        """Decode rows back to ``{characteristic: atoms}`` (union of covered bins)."""
        check_is_fitted(self, "partition_")
        Xt = np.asarray(Xt)
        if Xt.ndim != 2 or Xt.shape[1] != self.n_features_out_:
            raise ValidationError(f"expected {self.n_features_out_} columns")
        rows = []
        for x in Xt:
            row, offset = {}, 0
            for k, m in enumerate(self.n_bins_):
                mask = sum(1 << l for l in range(m) if x[offset + l])
                row[self.domains_[k].id] = self.partition_.atoms_of_mask(k, mask)
                offset += m
            rows.append(row)
        return rows

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "partition_")
        names = [
            f"{d.id}={label}"
            for k, d in enumerate(self.domains_)
            for label in self.partition_.labels(k)
        ]
        return np.asarray(names, dtype=object)


class OverlapAnalyzer(BaseEstimator):
    """Overlap potential, overlap-free selection and the size bound in one fit.

    Fitted attributes
    -----------------
    encoder_, encoded_, study_ids_ : the encoding step
    pairwise_ : list of lists of Fraction, pair potentials
    ranking_ : Ranking or None, combinations by decreasing potential
    overlap_free_ : OverlapFreeFamily, maximal overlap-free combinations
    selection_ : Selection, the chosen overlap-free combination
    bound_ : BoundReport, lower-bound proxy of the deduplicated size
    """

    def __init__(
        self,
        characteristics=None,
        partition="singleton",
        missing="error",
        criterion="max-pooled-sample-size",
        min_studies=1,
        min_potential=0,
        top_k=None,
        max_subset_size=None,
        rank_combinations=True,
        n_jobs=1,
        time_budget=None,
    ):
        self.characteristics = characteristics
        self.partition = partition
        self.missing = missing
        self.criterion = criterion
        self.min_studies = min_studies
        self.min_potential = min_potential
        self.top_k = top_k
        self.max_subset_size = max_subset_size
        self.rank_combinations = rank_combinations
        self.n_jobs = n_jobs
        self.time_budget = time_budget

    def fit(self, X, y=None):
        parse_criterion(self.criterion)
        config = EnumerationConfig(
            check_unit_fraction(self.min_potential, "min_potential"), self.top_k, self.max_subset_size
        )
        self.encoder_ = EnvelopeEncoder(self.characteristics, self.partition, self.missing).fit(X)
        envs, _ = self.encoder_._prepare(X, list(self.encoder_.characteristics_))
        check_min_studies(len(envs))
        self.envelopes_ = tuple(envs)
        self.encoded_ = encode(envs, self.encoder_.partition_)
        self.study_ids_ = self.encoded_.study_ids
        self.pairwise_ = pairwise_matrix(self.encoded_)
        self.overlap_free_ = overlap_free_b2(self.encoded_, self.time_budget)
        self.selection_ = select_best(
            self.overlap_free_, envs, self.criterion, min_studies=self.min_studies
        )
        self.bound_ = lower_bound_proxy(
            self.encoded_, envs, best_overlap_free=self.selection_.pooled_size
        )
        self.ranking_ = (
            enumerate_potentials(self.encoded_, config, n_jobs=self.n_jobs, budget=self.time_budget)
            if self.rank_combinations
            else None
        )
        return self

    def fit_predict(self, X, y=None):
        """Boolean mask of the studies in the selected overlap-free combination."""
        self.fit(X)
        return self.selected_mask()

    def selected_mask(self):
        check_is_fitted(self, "selection_")
        chosen = set(self.selection_.subset.members)
        return np.array([i in chosen for i in range(len(self.study_ids_))], dtype=bool)

    def potential(self, members):
        """Report for a subset given by study ids or indices."""
        check_is_fitted(self, "encoded_")
        return potential(self.encoded_, resolve_members(members, self.study_ids_))
