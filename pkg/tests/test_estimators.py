import json
from fractions import Fraction as F

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import data_path
from overlapix import EnvelopeEncoder, OverlapAnalyzer
from overlapix.bound import ProxyBelowOverlapFreeWarning
from overlapix.exceptions import ValidationError


def _rows():
    return json.loads(data_path("toy4.json").read_text())


def test_encoder_on_dict_rows():
    doc = _rows()
    enc = EnvelopeEncoder(doc["characteristics"]).fit(doc["studies"])
    X = enc.transform(doc["studies"])
    assert X.dtype == np.uint8 and X.shape == (4, 7)
    assert X.tolist()[0] == [1, 1, 0, 0, 1, 1, 0]
    assert list(enc.get_feature_names_out())[:2] == ["location=area 1", "location=area 2"]
    back = enc.inverse_transform(X)
    assert back[3] == {"location": {"area 3", "area 4"}, "time": {"2023"}}


def test_encoder_params_and_clone(toy4):
    envs, chars = toy4
    enc = EnvelopeEncoder(chars, partition="width=2")
    assert enc.get_params()["partition"] == "width=2"
    c = clone(enc)
    assert c.get_params() == enc.get_params()
    assert c.fit_transform(envs).shape == (4, 6)
    with pytest.raises(NotFittedError):
        EnvelopeEncoder().transform(envs)


def test_encoder_unknown_atoms(toy4):
    envs, chars = toy4
    enc = EnvelopeEncoder(chars).fit(envs[:2])
    with pytest.raises(ValidationError):
        enc.transform(envs)
    enc.set_params(handle_unknown="ignore")
    assert enc.transform(envs)[3].tolist() == [0, 0, 1, 0, 0, 1]


def test_encoder_input_validation():
    with pytest.raises(ValidationError):
        EnvelopeEncoder().fit("toy4.json")
    with pytest.raises(ValidationError):
        EnvelopeEncoder().fit([])
    doc = _rows()
    with pytest.raises(ValidationError):
        EnvelopeEncoder(missing="impute").fit(doc["studies"])
    # without declarations every characteristic is categorical, so intervals are refused
    with pytest.raises(ValidationError, match="ordered"):
        EnvelopeEncoder().fit(doc["studies"])
    enc = EnvelopeEncoder(doc["characteristics"]).fit(doc["studies"])
    with pytest.raises(ValidationError):
        enc.inverse_transform(np.zeros((1, 3)))


def test_analyzer_pipeline(toy4):
    envs, chars = toy4
    with pytest.warns(ProxyBelowOverlapFreeWarning):
        a = OverlapAnalyzer(chars).fit(envs)
    assert a.study_ids_ == ("S1", "S2", "S3", "S4")
    assert a.pairwise_[1][2] == F(2, 3)
    assert a.selection_.pooled_size == 8
    assert a.bound_.lower_bound_proxy == F(109, 20)
    assert len(a.ranking_) == 7
    assert a.selected_mask().tolist() == [True, False, False, True]
    assert a.potential(["S2", "S3"]).overall == F(2, 3)
    assert a.potential([1, 2, 3]).overall == F(1, 4)
    with pytest.raises(ValidationError):
        a.potential(["S9"])


def test_analyzer_fit_predict_and_params(toy4):
    envs, chars = toy4
    a = OverlapAnalyzer(chars, rank_combinations=False, top_k=3)
    with pytest.warns(ProxyBelowOverlapFreeWarning):
        mask = a.fit_predict(envs)
    assert mask.tolist() == [True, False, False, True] and a.ranking_ is None
    assert clone(a).get_params()["top_k"] == 3


def test_analyzer_rejects_single_study(toy4):
    envs, chars = toy4
    with pytest.raises(ValidationError, match="need >= 2 studies"):
        OverlapAnalyzer(chars).fit(envs[:1])
