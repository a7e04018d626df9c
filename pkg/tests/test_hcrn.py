import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crnkit.diffcore import Initializer, Tensor
from crnkit.errors import ConfigurationError
from crnkit.hcrn import (
    HCRN,
    AnswerTask,
    AttentionReadout,
    ModelConfig,
    Preselect,
    TextualStream,
    TextualStreamConfig,
    VisualStream,
    VisualStreamConfig,
    argmax_lowest,
    longform_visual_forward,
    round_half_away,
    textual_preselect,
    visual_plan,
)
from crnkit.hcrn.decoders import CountDecoder, MultiChoiceDecoder, OpenEndedDecoder

D = 6


def stream(**kw):
    cfg = VisualStreamConfig(**{"d": D, **kw})
    return VisualStream(Initializer(0), cfg)


def inputs(rng, *shape):
    return Tensor(rng.normal(size=shape))


# -- clip level ---------------------------------------------------------------


@pytest.mark.parametrize("T,out", [(16, 12), (5, 1)])
def test_clip_encode_shrinks_by_four(T, out, rng):
    s = stream(N=5, T=T)
    V = inputs(rng, 2, 5, T, D)
    clips = s.clip_encode(V, inputs(rng, 2, 5, D), inputs(rng, 2, D))
    assert clips.shape == (2, 5, out, D)


def test_clip_stack_needs_five_frames():
    with pytest.raises(ConfigurationError, match="shrink the array by 4"):
        stream(N=5, T=4)


def test_clip_level_without_units_is_identity(rng):
    s = stream(N=5, T=7, clip_motion=False, clip_question=False)
    V = inputs(rng, 1, 5, 7, D)
    out = s.clip_encode(V, None, inputs(rng, 1, D))
    np.testing.assert_array_equal(out.data, V.data)


# -- video motion summary ----------------------------------------------------------


def test_motion_summary_single_step_equals_one_cell_step(rng):
    s = stream(N=5, T=5)
    m = inputs(rng, 1, D)
    cell = s.video_motion_lstm.cell
    h, _ = cell(m[0:1, :], cell.zero_state((1,), np.float64))
    np.testing.assert_allclose(s.video_motion_summary(m.reshape(1, 1, D)).data, h.data)


def test_motion_summary_zero_weights_give_zero(rng):
    s = stream(N=5, T=5)
    for p in s.video_motion_lstm.parameters():
        p.data[...] = 0.0
    out = s.video_motion_summary(inputs(rng, 5, D))
    np.testing.assert_array_equal(out.data, np.zeros(D))


# -- video level -------------------------------------------------------------------


@pytest.mark.parametrize("N,T,n_out", [(8, 16, 4), (5, 6, 1), (24, 5, 20)])
def test_video_encode_shapes(N, T, n_out, rng):
    s = stream(N=N, T=T)
    V = inputs(rng, 1, N, T, D)
    f = inputs(rng, 1, N, D)
    q = inputs(rng, 1, D)
    clips = s.clip_encode(V, f, q)
    O = s.video_encode(clips, s.video_motion_summary(s.proj_motion(f)), q)
    assert O.shape == (1, n_out, T - 4, D)


def test_video_stack_needs_five_clips():
    with pytest.raises(ConfigurationError):
        stream(N=4, T=8)


# -- three levels ------------------------------------------------------------------


def test_hyperclip_table_configuration(rng):
    cfg = VisualStreamConfig(levels=3, N=24, T=16, P=4, Q=6, d=4)
    plan = visual_plan(cfg)
    sub = [st for st in plan.stages if st.level == "subvideo"]
    top = [st for st in plan.stages if st.level == "top"]
    assert sub[-1].out_len * sub[-1].K == (6 - 4) * (16 - 4) == 24
    assert [s.role for s in top] == ["question"]
    assert (plan.final_n, plan.final_K) == (2, 24)
    s = VisualStream(Initializer(0), cfg)
    V, f, q = inputs(rng, 1, 24, 16, 4), inputs(rng, 1, 24, 4), inputs(rng, 1, 4)
    clips = s.clip_encode(V, f, q)
    O = s.hyperclip_encode(clips, f, q)
    assert O.shape == (1, 2, 24, 4)


def test_hyperclip_with_five_subvideos_keeps_full_stack():
    plan = visual_plan(VisualStreamConfig(levels=3, N=30, T=5, P=5, Q=6, d=4))
    assert [s.role for s in plan.stages if s.level == "top"] == ["motion", "question"]


def test_hyperclip_factorisation_checked():
    with pytest.raises(ConfigurationError):
        VisualStreamConfig(levels=3, N=24, T=16, P=5, Q=5)


# -- readout -----------------------------------------------------------------------


def test_readout_of_equal_rows_is_that_row(rng):
    r = AttentionReadout(Initializer(0), "r", D)
    row = rng.normal(size=D)
    O = Tensor(np.broadcast_to(row, (2, 3, 4, D)).copy())
    out = r(O, inputs(rng, 2, D))
    np.testing.assert_allclose(out.data, np.broadcast_to(row, (2, D)))


def test_readout_uniform_attention_is_mean(rng):
    r = AttentionReadout(Initializer(0), "r", D)
    r.W_score.W.data[...] = 0.0
    O = inputs(rng, 3, 4, D)
    out = r(O, inputs(rng, D))
    np.testing.assert_allclose(out.data, O.data.reshape(12, D).mean(axis=0))


def test_readout_weights_sum_to_one(rng):
    r = AttentionReadout(Initializer(0), "r", D, dual=True)
    g = r.weights(inputs(rng, 2, 5, D), inputs(rng, 2, D), inputs(rng, 2, D))
    np.testing.assert_allclose(g.data.sum(axis=-1), 1.0)


def test_attention_slots_n8_t16():
    assert visual_plan(VisualStreamConfig(N=8, T=16, d=64)).readout_slots == 48


@given(st.integers(5, 16), st.integers(5, 16))
def test_slot_count_theorem(N, T):
    assert visual_plan(VisualStreamConfig(N=N, T=T, d=4)).readout_slots == (N - 4) * (T - 4)


# -- long-form visual ----------------------------------------------------------------


def test_longform_shapes(rng):
    cfg = VisualStreamConfig(N=6, T=8, d=4, long_form=True)
    plan = visual_plan(cfg)
    clip = [s for s in plan.stages if s.level == "clip"]
    video = [s for s in plan.stages if s.level == "video"]
    assert [s.role for s in plan.stages] == ["question", "question"]
    assert clip[0].out_len == 6 and video[0].out_len == 4
    s = VisualStream(Initializer(0), cfg)
    out = longform_visual_forward(s, inputs(rng, 2, 6, 8, 4), inputs(rng, 2, 4))
    assert out.shape == (2, 4)


def test_longform_short_clip():
    plan = visual_plan(VisualStreamConfig(N=6, T=3, d=4, long_form=True))
    assert plan.stages[0].out_len == 1


def test_longform_warns_on_motion(rng):
    s = VisualStream(Initializer(0), VisualStreamConfig(N=6, T=8, d=4, long_form=True))
    with pytest.warns(UserWarning, match="ignores motion"):
        longform_visual_forward(s, inputs(rng, 1, 6, 8, 4), inputs(rng, 1, 4), motion=inputs(rng, 1, 6, 4))


def test_longform_without_question_units_pools_frames(rng):
    cfg = VisualStreamConfig(N=6, T=8, d=4, long_form=True, clip_question=False, video_question=False)
    s = VisualStream(Initializer(0), cfg)
    assert s.units == []
    assert s.plan.readout_slots == 48


# -- textual stream -------------------------------------------------------------------


def test_preselect_identity_layout(rng):
    p = Preselect(Initializer(0), "p", 3)
    p.W.W.data[...] = np.vstack([np.eye(3), np.zeros((3, 3))])
    U = inputs(rng, 4, 3)
    out = textual_preselect(U, Tensor(np.zeros(3)), p)
    np.testing.assert_allclose(out.data, U.data)


def test_preselect_one_row(rng):
    p = Preselect(Initializer(0), "p", 3)
    assert p(inputs(rng, 1, 3), inputs(rng, 3)).shape == (1, 3)


def test_preselect_hand_trace():
    p = Preselect(Initializer(0), "p", 2)
    p.W.W.data[...] = [[1.0, 0.0], [0.0, 2.0], [1.0, 1.0], [0.0, -1.0]]
    U = Tensor(np.array([[1.0, 2.0], [3.0, -1.0]]))
    q = Tensor(np.array([0.5, 2.0]))
    # [U, U*q] @ W, by hand
    expected = np.array([[1.5, 0.5], [4.5, 1.5]])
    np.testing.assert_allclose(p(U, q).data, expected)


def _text(M, S, d=4, **kw):
    return TextualStream(Initializer(0), TextualStreamConfig(M=M, max_len=S, d=d, **kw), S)


@pytest.mark.parametrize("M,outs", [(6, 4), (3, 1)])
def test_textual_crn_output_count(M, outs):
    assert _text(M, 24).crn.out_len == outs


def test_textual_needs_three_segments():
    with pytest.raises(ConfigurationError):
        TextualStreamConfig(M=2)


def test_textual_forward_shape(rng):
    t = _text(6, 24)
    assert t(inputs(rng, 2, 24, 4), inputs(rng, 2, 4)).shape == (2, 4)


# -- decoders ---------------------------------------------------------------------------


def test_open_ended_probabilities(rng):
    dec = OpenEndedDecoder(Initializer(0), "d", D, 7, streams=2)
    p = dec([inputs(rng, 3, D), inputs(rng, 3, D)], inputs(rng, 3, D))
    np.testing.assert_allclose(p.data.sum(axis=-1), 1.0)


@pytest.mark.parametrize("x,n", [(3.4, 3), (3.6, 4), (2.5, 3), (-2.5, -3), (0.49, 0)])
def test_round_half_away(x, n):
    assert round_half_away(x) == n


def test_ties_pick_lowest_index(rng):
    dec = MultiChoiceDecoder(Initializer(0), "d", D, streams=1)
    same = np.broadcast_to(rng.normal(size=D), (1, 4, D)).copy()
    q = Tensor(np.broadcast_to(rng.normal(size=D), (1, 4, D)).copy())
    s = dec([Tensor(same)], q, Tensor(same))
    assert argmax_lowest(s.data).tolist() == [0]


def test_count_decoder_predicts_integers(rng):
    dec = CountDecoder(Initializer(0), "d", D)
    out = dec([inputs(rng, 5, D)], inputs(rng, 5, D))
    assert out.shape == (5,) and dec.predict(out).dtype == np.int64


def test_decoder_rejects_missing_stream(rng):
    dec = OpenEndedDecoder(Initializer(0), "d", D, 3, streams=2)
    with pytest.raises(ConfigurationError):
        dec([inputs(rng, 1, D), None], inputs(rng, 1, D))


# -- whole model --------------------------------------------------------------------------


def _batch(rng, B=2, N=5, T=5, A=3, S=12, d=D):
    return {
        "question": rng.normal(size=(B, d)),
        "appearance": rng.normal(size=(B, N, T, d)),
        "motion": rng.normal(size=(B, N, d)),
        "choices": rng.normal(size=(B, A, d)),
        "subtitle": rng.normal(size=(B, S, d)),
        "labels": np.zeros(B, dtype=np.int64),
    }


def test_multi_choice_scores_permute_with_choices(rng):
    cfg = ModelConfig(task=AnswerTask(kind="multi-choice"), visual=VisualStreamConfig(N=5, T=6, d=D), d=D)
    model = HCRN(cfg)
    batch = _batch(rng, T=6, A=4)
    perm = np.array([2, 0, 3, 1])
    base = model(batch, seed=4).data
    shuffled = dict(batch, choices=batch["choices"][:, perm])
    np.testing.assert_allclose(model(shuffled, seed=4).data, base[:, perm], rtol=1e-12)


class CountingBatch(dict):
    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.reads = {}

    def __getitem__(self, key):
        self.reads[key] = self.reads.get(key, 0) + 1
        return super().__getitem__(key)

    def get(self, key, default=None):
        self.reads[key] = self.reads.get(key, 0) + 1
        return super().get(key, default)


def test_longform_never_reads_motion(rng):
    cfg = ModelConfig(
        task=AnswerTask(kind="multi-choice"),
        visual=VisualStreamConfig(N=6, T=8, d=D, long_form=True),
        textual=TextualStreamConfig(M=6, max_len=12, d=D),
        d=D,
    )
    batch = CountingBatch(_batch(rng, N=6, T=8))
    HCRN(cfg)(batch, seed=0)
    assert batch.reads.get("motion", 0) == 0
    assert batch.reads["appearance"] == 1


def test_ablation_equals_fresh_construction(rng):
    full = ModelConfig(task=AnswerTask(kind="count"), visual=VisualStreamConfig(N=6, T=6, d=D), d=D, seed=3)
    model = HCRN(full)
    ablated = model.ablate(clip_motion=False, video_motion=False)
    fresh = HCRN(
        ModelConfig(
            task=AnswerTask(kind="count"),
            visual=VisualStreamConfig(N=6, T=6, d=D, clip_motion=False, video_motion=False),
            d=D,
            seed=3,
        )
    )
    batch = _batch(rng, N=6, T=6)
    np.testing.assert_array_equal(ablated(batch, seed=5).data, fresh(batch, seed=5).data)
    assert not ablated.visual.cfg.uses_motion or ablated.visual.cfg.clip_motion is False


def test_ablate_rejects_unknown_toggle():
    model = HCRN(ModelConfig(task=AnswerTask(kind="count"), visual=VisualStreamConfig(N=5, T=5, d=D), d=D))
    with pytest.raises(ConfigurationError):
        model.ablate(no_such_flag=True)


def test_every_parameter_receives_gradient(rng):
    cfg = ModelConfig(task=AnswerTask(kind="open-ended", num_answers=3), visual=VisualStreamConfig(N=6, T=6, d=D), d=D)
    model = HCRN(cfg)
    batch = _batch(rng, N=6, T=6)
    model.loss(batch, seed=0).backward()
    missing = [n for n, p in model.named_parameters() if p.grad is None or not np.any(p.grad)]
    assert missing == []


@pytest.mark.parametrize("levels", [1, 1.5, 2, 3])
def test_hierarchy_variants_run(levels, rng):
    kw = {"P": 2, "Q": 5} if levels == 3 else {}
    N = 10 if levels == 3 else 6
    cfg = ModelConfig(task=AnswerTask(kind="count"), visual=VisualStreamConfig(levels=levels, N=N, T=6, d=D, **kw), d=D)
    out = HCRN(cfg)(_batch(rng, N=N, T=6), seed=0)
    assert out.shape == (2,) and np.all(np.isfinite(out.data))


def test_question_only_baseline(rng):
    cfg = ModelConfig(task=AnswerTask(kind="multi-choice"), d=D)
    model = HCRN(cfg)
    assert model.visual is None and model.textual is None
    assert model(_batch(rng), seed=0).shape == (2, 3)
