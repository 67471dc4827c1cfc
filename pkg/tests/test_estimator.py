import numpy as np
import pytest
from sklearn.base import clone
from sklearn.model_selection import cross_val_score
from sklearn.pipeline import make_pipeline

from smallcnn.estimator import CNNClassifier, ImageResizer, RandomZoom, check_images
from smallcnn.exceptions import InputError, ShapeError


def tiny(**kw):
    kw.setdefault("architecture", "reduced")
    kw.setdefault("epochs", 8)
    kw.setdefault("batch_size", 4)
    kw.setdefault("learning_rate", 0.01)
    return CNNClassifier(**kw)


@pytest.fixture(scope="module")
def xy(small_synthetic):
    return small_synthetic.images, small_synthetic.labels


def test_get_params_and_clone():
    clf = tiny(optimizer="rmsprop", random_state=3)
    params = clf.get_params()
    assert params["optimizer"] == "rmsprop" and params["random_state"] == 3
    cloned = clone(clf)
    assert cloned.get_params() == params
    clf.set_params(epochs=2)
    assert clf.epochs == 2


def test_fit_predict(xy):
    X, y = xy
    clf = tiny().fit(X, y, validation_data=(X[:4], y[:4]))
    proba = clf.predict_proba(X)
    assert proba.shape == (len(X), 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    pred = clf.predict(X)
    assert set(pred.tolist()) <= {0, 1}
    assert clf.score(X, y) >= 0.75
    assert len(clf.history_) == 8 and clf.history_.final.has_validation
    assert clf.confusion_matrix(X, y).total == len(X)


def test_predict_before_fit(xy):
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        tiny().predict(xy[0])


def test_fit_is_deterministic(xy):
    X, y = xy
    a = tiny(epochs=2).fit(X, y).predict_proba(X)
    b = tiny(epochs=2).fit(X, y).predict_proba(X)
    assert a.tobytes() == b.tobytes()


def test_input_validation(xy):
    X, y = xy
    with pytest.raises(InputError):
        tiny().fit(X, y[:-1])
    with pytest.raises(InputError):
        tiny().fit(X, np.full(len(X), 2))
    with pytest.raises(InputError):
        check_images(X * 2)
    with pytest.raises(ShapeError):
        check_images(np.zeros((3, 4)))
    assert check_images(np.zeros((2, 5, 5))).shape == (2, 5, 5, 1)
    clf = tiny(epochs=1).fit(X, y)
    with pytest.raises(ShapeError):
        clf.predict(np.zeros((1, 20, 20, 1)))


def test_pipeline_composition(small_synthetic):
    X = small_synthetic.images
    y = small_synthetic.labels
    pipe = make_pipeline(ImageResizer(size=(12, 12)), tiny(epochs=2))
    pipe.fit(X, y)
    assert pipe.predict(X).shape == (len(X),)
    scores = cross_val_score(make_pipeline(ImageResizer(size=(12, 12)), tiny(epochs=1)), X, y, cv=2)
    assert scores.shape == (2,)


def test_random_zoom_transformer(xy):
    X = xy[0][:3]
    t = RandomZoom(zoom_range=0.2, random_state=1).fit(X)
    a = t.transform(X)
    assert a.shape == X.shape and a.min() >= 0 and a.max() <= 1
    b = RandomZoom(zoom_range=0.2, random_state=1).fit(X).transform(X)
    assert a.tobytes() == b.tobytes()
    assert RandomZoom(zoom_range=0.0).fit(X).transform(X).tobytes() == X.tobytes()
