import hashlib
import re
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crnkit.data import (
    FeatureBundle,
    SyntheticTaskSpec,
    generate,
    load_feature_bundle,
    manifest_lines,
    oracle_labels,
    project_features,
    save_feature_bundle,
    segment_clips,
    segment_subtitles,
    truncate_or_pad,
)
from crnkit.diffcore import Tensor
from crnkit.errors import BundleFormatError, GenerationError, SegmentationError

# -- clip segmentation ------------------------------------------------------------


def brute_force_clips(L, N, T):
    out = []
    for i in range(N):
        anchor = int((2 * i + 1) * L // (2 * N))
        row = []
        for j in range(anchor - T // 2, anchor - T // 2 + T):
            row.append(0 if j < 0 else L - 1 if j >= L else j)
        out.append(row)
    return out


def test_exact_fit_is_identity():
    assert segment_clips(16, 1, 16).tolist() == [list(range(16))]


def test_short_video_repeats_edge_frames():
    assert segment_clips(4, 1, 8).tolist() == [[0, 0, 0, 1, 2, 3, 3, 3]]


def test_overlapping_clips():
    clips = segment_clips(64, 8, 16)
    for a, b in zip(clips[:-1], clips[1:]):
        assert len(set(a) & set(b)) == 8


@given(st.integers(1, 200), st.integers(1, 30), st.integers(1, 40))
def test_clips_match_window_oracle(L, N, T):
    clips = segment_clips(L, N, T)
    assert clips.shape == (N, T)
    assert clips.min() >= 0 and clips.max() < L
    assert clips.tolist() == brute_force_clips(L, N, T)
    assert np.all(np.diff(clips, axis=0) >= 0)


def test_clip_arguments_positive():
    with pytest.raises(SegmentationError):
        segment_clips(0, 1, 1)


# -- subtitle segmentation ------------------------------------------------------------


def test_subtitle_half_overlap():
    assert segment_subtitles(12, 6) == [(i, 2) for i in range(6)]


def test_subtitle_unit_spans():
    assert segment_subtitles(5, 5) == [(i, 1) for i in range(5)]


def test_subtitle_cap_length():
    spans = segment_subtitles(256, 6)
    assert [s for s, _ in spans] == [0, 21, 42, 63, 84, 105]
    assert {n for _, n in spans} == {42}


def test_subtitle_tail_is_pulled_back():
    # stride 2, length 4: the last start would be 10 and is pulled back to 8
    assert segment_subtitles(12, 3)[-1] == (4, 4)
    spans = segment_subtitles(9, 4)
    assert all(s + n <= 9 for s, n in spans)


@given(st.integers(1, 256).flatmap(lambda M: st.tuples(st.integers(M, 256), st.just(M))))
def test_subtitle_spans_in_range(SM):
    S, M = SM
    spans = segment_subtitles(S, M)
    assert len(spans) == M
    assert all(0 <= s and s + n <= S and n == S // M for s, n in spans)
    starts = [s for s, _ in spans]
    assert starts == sorted(starts)


def test_subtitle_needs_enough_tokens():
    with pytest.raises(SegmentationError):
        segment_subtitles(3, 4)


def test_truncate_or_pad():
    x = np.arange(6.0).reshape(3, 2)
    assert truncate_or_pad(x, 2).tolist() == [[0, 1], [2, 3]]
    padded = truncate_or_pad(x, 5)
    assert padded.shape == (5, 2) and not padded[3:].any()


# -- projection ----------------------------------------------------------------------


def test_projection_hand_multiply():
    W = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    out = project_features(np.array([[1.0, -1.0]]), W)
    assert out.data.tolist() == [[-2.0, -2.0]]


def test_projection_width_and_zero_map(rng):
    raw = rng.normal(size=(2, 3, 2048))
    assert project_features(raw, Tensor(np.zeros((2048, 512)))).shape == (2, 3, 512)
    assert not project_features(raw[..., :8], Tensor(np.zeros((8, 4)))).data.any()


def test_projection_shape_mismatch(rng):
    with pytest.raises(Exception):
        project_features(rng.normal(size=(2, 5)), Tensor(np.zeros((4, 3))))


# -- synthetic tasks -------------------------------------------------------------------

KINDS = ("count", "transition", "longform-choice")


@given(
    st.sampled_from(KINDS),
    st.integers(0, 2**16),
    st.integers(0, 3),
    st.sampled_from([0.0, 0.2, 1.0, 3.0]),
)
def test_oracle_recovers_every_label(kind, seed, task_seed, noise):
    spec = SyntheticTaskSpec(kind=kind, samples=12, N=4, T=4, d=12, motif_range=(0, 10), noise=noise, seed=seed, task_seed=task_seed, A=4, S=10)
    bundle = generate(spec)
    assert len(bundle) == 12
    np.testing.assert_array_equal(oracle_labels(bundle), bundle.labels.astype(np.int64))


def test_noiseless_count_nearest_motif():
    bundle = generate(SyntheticTaskSpec(kind="count", samples=20, noise=0.0))
    motif = bundle["motifs"][0]
    app = bundle["appearance"].reshape(20, -1, motif.size)
    hits = np.all(np.isclose(app, motif), axis=-1).sum(axis=1)
    np.testing.assert_array_equal(hits, bundle.labels)


def test_zero_count_has_no_motif():
    bundle = generate(SyntheticTaskSpec(kind="count", samples=8, motif_range=(0, 0), noise=0.5))
    assert not bundle.labels.any()
    proj = bundle["appearance"].astype(np.float64) @ bundle["motifs"][0].astype(np.float64)
    assert np.abs(proj).max() < 1e-5


def test_infeasible_motif_range():
    with pytest.raises(GenerationError):
        generate(SyntheticTaskSpec(kind="count", N=2, T=2, motif_range=(0, 5)))
    with pytest.raises(GenerationError):
        generate(SyntheticTaskSpec(kind="count", motif_range=(4, 2)))


def test_unknown_kind():
    with pytest.raises(GenerationError):
        SyntheticTaskSpec(kind="tally")


def test_task_seed_shared_across_splits():
    a = generate(SyntheticTaskSpec(kind="transition", samples=4, seed=0))
    b = generate(SyntheticTaskSpec(kind="transition", samples=4, seed=9))
    np.testing.assert_array_equal(a["motifs"], b["motifs"])
    assert not np.array_equal(a["appearance"], b["appearance"])


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.mark.parametrize("kind", KINDS)
def test_fixed_seed_gives_identical_bytes(kind, tmp_path):
    spec = SyntheticTaskSpec(kind=kind, samples=16, seed=3)
    save_feature_bundle(generate(spec), tmp_path / "a.bin")
    save_feature_bundle(generate(spec), tmp_path / "b.bin")
    assert _digest(tmp_path / "a.bin") == _digest(tmp_path / "b.bin")


# -- bundle format ------------------------------------------------------------------------


@given(st.sampled_from(KINDS), st.integers(0, 1000))
def test_round_trip_identity(tmp_path_factory, kind, seed):
    path = tmp_path_factory.mktemp("rt") / "b.bin"
    bundle = generate(SyntheticTaskSpec(kind=kind, samples=5, seed=seed, N=3, T=3, d=8, motif_range=(0, 4), A=3, S=6))
    save_feature_bundle(bundle, path)
    back = load_feature_bundle(path)
    assert back.task == bundle.task and back.meta == bundle.meta
    assert list(back.tensors) == list(bundle.tensors)
    for name, arr in bundle.tensors.items():
        assert back[name].dtype == np.float32
        assert back[name].tobytes() == arr.tobytes()


def test_manifest_layout(tmp_path):
    b = FeatureBundle({"x": np.ones((3,), np.float32), "labels": np.zeros(2, np.float32)}, task="count")
    path = tmp_path / "m.bin"
    save_feature_bundle(b, path)
    lines = manifest_lines(path)
    assert lines[0] == "#format crnkit-bundle 1"
    assert "#task count" in lines
    # 12 bytes for x, next tensor starts at the next multiple of 8
    assert lines[-2:] == ["x f32 3 0", "labels f32 2 16"]
    raw = path.read_bytes()
    (n,) = struct.unpack("<Q", raw[:8])
    assert (8 + n) % 8 == 0 or raw[8 + n : (8 + n + 7) // 8 * 8].strip(b"\0") == b""


def _written(tmp_path):
    path = tmp_path / "b.bin"
    save_feature_bundle(generate(SyntheticTaskSpec(samples=4, N=2, T=2, d=4, motif_range=(0, 2))), path)
    return path


def _rewrite_manifest(path, edit):
    raw = path.read_bytes()
    (n,) = struct.unpack("<Q", raw[:8])
    text = raw[8 : 8 + n].decode()
    payload_start = (8 + n + 7) // 8 * 8
    new = edit(text).encode()
    head = struct.pack("<Q", len(new)) + new
    head += b"\0" * (-len(head) % 8)
    path.write_bytes(head + raw[payload_start:])


def test_truncated_payload(tmp_path):
    path = _written(tmp_path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(BundleFormatError, match="labels"):
        load_feature_bundle(path)


def test_truncated_prefix(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"\x01\x02")
    with pytest.raises(BundleFormatError):
        load_feature_bundle(path)


def test_duplicate_names(tmp_path):
    path = _written(tmp_path)

    def dup(text):
        lines = text.rstrip("\n").split("\n")
        entry = [l for l in lines if l.startswith("motion ")][0]
        return "\n".join(lines + [entry]) + "\n"

    _rewrite_manifest(path, dup)
    with pytest.raises(BundleFormatError, match="motion"):
        load_feature_bundle(path)


@pytest.mark.parametrize(
    "edit",
    [
        lambda t: t.replace("#format crnkit-bundle 1\n", ""),
        lambda t: t.replace("labels f32", "labels f64"),
        lambda t: t.replace("labels f32 4", "labels f32 four"),
        lambda t: t + "stray\n",
    ],
    ids=["no-header", "dtype", "shape", "short-entry"],
)
def test_malformed_manifest(tmp_path, edit):
    path = _written(tmp_path)
    _rewrite_manifest(path, edit)
    with pytest.raises(BundleFormatError):
        load_feature_bundle(path)


def test_misaligned_offset(tmp_path):
    path = _written(tmp_path)
    _rewrite_manifest(path, lambda t: re.sub(r"^(appearance f32 \S+) 0$", r"\1 4", t, flags=re.M))
    with pytest.raises(BundleFormatError):
        load_feature_bundle(path)


def test_save_rejects_bad_names(tmp_path):
    with pytest.raises(BundleFormatError):
        save_feature_bundle(FeatureBundle({"a b": np.zeros(2, np.float32)}), tmp_path / "n.bin")
