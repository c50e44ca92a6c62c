import numpy as np
import pytest

from evfuse.errors import ConsistencyError, DimensionError, DomainError
from evfuse.events import EventFrameTensor
from evfuse.sensing import HighResTensor, Observation, SensingCase, forward_intensity, make_problem

CASES = list(SensingCase)


def test_deblur_of_constant_video():
    obs = forward_intensity(np.full((7, 3, 4), 0.37), "deblur")
    assert np.allclose(obs.frames, 0.37, rtol=0, atol=1e-15)


def test_interpolation_slices(rng):
    H = rng.random((5, 3, 4))
    obs = forward_intensity(H, SensingCase.INTERPOLATION)
    assert np.array_equal(obs.frames[0], H[0]) and np.array_equal(obs.frames[1], H[-1])


def test_prediction_first_frame(rng):
    H = rng.random((3, 2, 2))
    assert np.array_equal(forward_intensity(H, "predict").frames[0], H[0])


def test_two_frame_deblur_is_mean(rng):
    A, B = rng.random((2, 4, 4))
    obs = forward_intensity(np.stack([A, B]), "deblur")
    assert np.allclose(obs.frames[0], (A + B) / 2, rtol=0, atol=1e-15)


@pytest.mark.parametrize("case", CASES)
def test_linearity(case, rng):
    H1, H2 = rng.random((2, 6, 3, 5))
    a, b = 0.7, -1.3
    lhs = forward_intensity(a * H1 + b * H2, case).frames
    rhs = a * forward_intensity(H1, case).frames + b * forward_intensity(H2, case).frames
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-14)


def test_case_aliases():
    assert SensingCase.parse("interpolate") is SensingCase.INTERPOLATION
    assert SensingCase.parse("predict") is SensingCase.PREDICTION
    assert SensingCase.parse("deblur") is SensingCase.DEBLUR
    with pytest.raises(ValueError):
        SensingCase.parse("zoom")


def test_observation_frame_count():
    with pytest.raises(DimensionError):
        Observation("interpolation", np.zeros((1, 2, 2)))
    with pytest.raises(DimensionError):
        Observation("deblur", np.zeros((2, 2, 2)))


def test_high_res_tensor_invariants():
    with pytest.raises(DomainError):
        HighResTensor(np.full((2, 2, 2), 1.5))
    with pytest.raises(ValueError):
        HighResTensor(np.zeros((1, 2, 2)))


class TestMakeProblem:
    def test_twenty_event_frames_give_21(self):
        obs = Observation("interpolation", np.zeros((2, 4, 4)))
        p = make_problem(obs, EventFrameTensor(np.zeros((20, 4, 4), np.int8)))
        assert p.d == 21 and p.shape == (21, 4, 4)
        assert make_problem(obs, EventFrameTensor(np.zeros((20, 4, 4), np.int8)), 21).d == 21

    def test_minimal_prediction(self):
        obs = Observation("prediction", np.zeros((1, 2, 3)))
        assert make_problem(obs, EventFrameTensor(np.zeros((1, 2, 3), np.int8)), 2).d == 2

    def test_frame_count_mismatch(self):
        obs = Observation("interpolation", np.zeros((2, 4, 4)))
        with pytest.raises(ConsistencyError):
            make_problem(obs, EventFrameTensor(np.zeros((8, 4, 4), np.int8)), 11)

    def test_stacked_counts_transitions(self):
        obs = Observation("deblur", np.zeros((1, 2, 2)))
        ev = EventFrameTensor(np.zeros((2, 2, 2)), "stacked", (3, 4))
        assert make_problem(obs, ev).d == 8
        with pytest.raises(ConsistencyError):
            make_problem(obs, ev, 3)

    def test_shape_mismatch(self):
        obs = Observation("prediction", np.zeros((1, 4, 4)))
        with pytest.raises(DimensionError):
            make_problem(obs, EventFrameTensor(np.zeros((1, 4, 5), np.int8)))

    def test_problem_is_immutable(self):
        obs = Observation("prediction", np.zeros((1, 2, 2)))
        p = make_problem(obs, EventFrameTensor(np.zeros((1, 2, 2), np.int8)))
        with pytest.raises(ValueError):
            p.event_values[0, 0, 0] = 1
        with pytest.raises(AttributeError):
            p.d = 5
