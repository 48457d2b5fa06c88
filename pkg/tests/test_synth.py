import dataclasses

import numpy as np
import pytest

from strokeauth import (
    InvalidInputError,
    SynthConfig,
    export_dataset,
    generate_synthetic,
    preset_config,
)
from strokeauth.synth import (
    IDENTITY_DIM,
    N_CONTROL,
    NUISANCE_DIM,
    character_geometry,
    _warp_grid,
)

SMALL = SynthConfig(n_users=3, characters=("0", "7"), sessions=2, samples_per_cell=2,
                    points=32, seed=4)


class TestGeometry:
    def test_deterministic_and_seed_independent(self):
        a = character_geometry("5")
        b = character_geometry("5")
        np.testing.assert_array_equal(a.control, b.control)
        np.testing.assert_array_equal(a.identity_basis, b.identity_basis)

    def test_labels_differ(self):
        assert not np.allclose(
            character_geometry("0").control, character_geometry("1").control
        )

    def test_bases_orthonormal_and_disjoint(self):
        geom = character_geometry("3")
        stacked = np.hstack([geom.identity_basis, geom.nuisance_basis])
        gram = stacked.T @ stacked
        np.testing.assert_allclose(
            gram, np.eye(IDENTITY_DIM + NUISANCE_DIM), atol=1e-12
        )

    def test_control_points_bounded(self):
        for label in "0123456789":
            control = character_geometry(label).control
            assert control.shape == (N_CONTROL, 2)
            assert control.min() >= -0.2 - 1e-12
            assert control.max() <= 1.2 + 1e-12

    @pytest.mark.parametrize("name", ["easy", "moderate"])
    def test_preset_canvas_coordinates_positive(self, name):
        cfg = preset_config(name, n_users=4)
        ds, _ = generate_synthetic(cfg)
        for sample in ds.samples:
            for stroke in sample.strokes:
                assert np.asarray(stroke)[:, :2].min() > 0.0

    def test_heading_never_reverses(self):
        """Consecutive segment headings stay well clear of a 180° flip, the
        condition that keeps unwrapped angle channels on one branch."""
        for label in "0123456789":
            control = character_geometry(label).control
            seg = np.diff(control, axis=0)
            headings = np.arctan2(seg[:, 1], seg[:, 0])
            turns = np.abs(
                (np.diff(headings) + np.pi) % (2 * np.pi) - np.pi
            )
            assert turns.max() < np.radians(160)


class TestWarpGrid:
    def test_identity_at_zero_amplitude(self):
        grid = _warp_grid(33, 0.0, None, None)
        np.testing.assert_array_equal(grid, np.linspace(0, 1, 33))

    def test_monotone_and_normalized(self):
        rng = np.random.default_rng(0)
        for amplitude in (0.3, 1.0, 2.5):
            grid = _warp_grid(64, amplitude, rng.normal(size=3), rng.uniform(0, 7, 3))
            assert grid[0] == 0.0 and grid[-1] == 1.0
            assert np.all(np.diff(grid) > 0)


class TestDeterminism:
    def test_same_config_same_bytes(self, tmp_path):
        ds1, _ = generate_synthetic(SMALL)
        ds2, _ = generate_synthetic(SMALL)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        export_dataset(ds1, p1)
        export_dataset(ds2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_seed_changes_data(self):
        ds1, _ = generate_synthetic(SMALL)
        ds2, _ = generate_synthetic(dataclasses.replace(SMALL, seed=5))
        a = np.asarray(ds1.samples[0].strokes[0])
        b = np.asarray(ds2.samples[0].strokes[0])
        assert not np.array_equal(a, b)

    def test_scale_zero_keeps_other_draws_aligned(self):
        """Turning one noise scale off must not shift any other draw:
        the two datasets may differ only through that term's direct
        effect, which is zero for the first repetition of each cell when
        only nuisance differs and nuisance was already zero."""
        base = dataclasses.replace(SMALL, nuisance_noise=0.0, time_jitter=0.0)
        with_jitter = dataclasses.replace(base, time_jitter=0.4)
        ds_a, truth_a = generate_synthetic(base)
        ds_b, truth_b = generate_synthetic(with_jitter)
        # identical latent shapes: jitter only re-times the trajectory
        for key in truth_a.control_points:
            np.testing.assert_array_equal(
                truth_a.control_points[key], truth_b.control_points[key]
            )

    def test_cell_structure(self):
        ds, _ = generate_synthetic(SMALL)
        assert len(ds) == 3 * 2 * 2 * 2
        assert ds.users() == ["u000", "u001", "u002"]
        assert ds.labels() == ["0", "7"]
        for user in ds.users():
            assert ds.sessions_of(user) == [1, 2]


class TestTruth:
    def test_every_sample_has_latents(self):
        ds, truth = generate_synthetic(SMALL)
        assert set(truth.control_points) == {s.key for s in ds.samples}
        for key, control in truth.control_points.items():
            assert control.shape == (N_CONTROL, 2)

    def test_pair_distance_symmetry_and_zero(self):
        ds, truth = generate_synthetic(SMALL)
        k1, k2 = ds.samples[0].key, ds.samples[1].key
        assert truth.pair_distance(k1, k1) == 0.0
        assert truth.pair_distance(k1, k2) == truth.pair_distance(k2, k1)
        assert truth.pair_distance(k1, k2) > 0.0

    def test_genuine_latents_closer_than_impostor_on_average(self):
        cfg = SynthConfig(n_users=6, characters=("2",), sessions=2,
                          samples_per_cell=3, inter_user_spread=0.2,
                          intra_user_noise=0.02, session_drift=0.01,
                          points=32, seed=1)
        ds, truth = generate_synthetic(cfg)
        genuine, impostor = [], []
        samples = ds.samples
        for i, a in enumerate(samples):
            for b in samples[i + 1:]:
                d = truth.pair_distance(a.key, b.key)
                (genuine if a.user_id == b.user_id else impostor).append(d)
        assert np.mean(genuine) < np.mean(impostor) / 4


class TestNoiseSemantics:
    def test_noiseless_repetitions_are_exact_copies(self):
        cfg = SynthConfig(n_users=2, characters=("1",), sessions=2,
                          samples_per_cell=3, intra_user_noise=0.0,
                          session_drift=0.0, points=32, seed=3)
        ds, _ = generate_synthetic(cfg)
        for user in ds.users():
            reference = ds.get(user, "1", 1, 0)
            for session in (1, 2):
                for rep in range(3):
                    other = ds.get(user, "1", session, rep)
                    for sa, sb in zip(reference.strokes, other.strokes):
                        np.testing.assert_array_equal(np.asarray(sa), np.asarray(sb))

    def test_intra_noise_breaks_exactness(self):
        cfg = SynthConfig(n_users=1, characters=("1",), sessions=1,
                          samples_per_cell=2, intra_user_noise=0.05,
                          points=32, seed=3)
        ds, _ = generate_synthetic(cfg)
        a = np.asarray(ds.get("u000", "1", 1, 0).strokes[0])
        b = np.asarray(ds.get("u000", "1", 1, 1).strokes[0])
        assert not np.array_equal(a, b)

    def test_nuisance_moves_shape_but_not_identity(self):
        base = SynthConfig(n_users=2, characters=("4",), sessions=1,
                           samples_per_cell=2, intra_user_noise=0.0,
                           session_drift=0.0, nuisance_noise=0.0, points=32, seed=6)
        noisy = dataclasses.replace(base, nuisance_noise=0.1)
        _, truth_a = generate_synthetic(base)
        _, truth_b = generate_synthetic(noisy)
        for key_pair in truth_a.identity:
            np.testing.assert_array_equal(
                truth_a.identity[key_pair], truth_b.identity[key_pair]
            )
        moved = [
            not np.allclose(truth_a.control_points[k], truth_b.control_points[k])
            for k in truth_a.control_points
        ]
        assert all(moved)

    def test_tempo_jitter_varies_length_per_repetition(self):
        cfg = SynthConfig(n_users=2, characters=("1",), sessions=1,
                          samples_per_cell=6, tempo_jitter=0.3, points=32, seed=9)
        ds, _ = generate_synthetic(cfg)
        lengths = {s.point_count for s in ds.filter(user_id="u000")}
        assert len(lengths) > 1

    def test_orientation_jitter_spares_intrinsic_channels(self):
        # Rotating a rendition changes where it sits in the coordinate
        # frame but not how fast the pen moved along it.
        base = SynthConfig(n_users=2, characters=("1",), sessions=1,
                           samples_per_cell=3, points=32, seed=9)
        plain, _ = generate_synthetic(base)
        tilted, _ = generate_synthetic(dataclasses.replace(base, orientation_jitter=0.4))
        for ref, rot in zip(plain.samples, tilted.samples):
            a = np.asarray(ref.strokes[0])
            b = np.asarray(rot.strokes[0])
            assert not np.allclose(a[:, :2], b[:, :2])
            speed_a = np.linalg.norm(np.diff(a[:, :2], axis=0), axis=1)
            speed_b = np.linalg.norm(np.diff(b[:, :2], axis=0), axis=1)
            np.testing.assert_allclose(speed_a, speed_b, atol=1e-9)

    def test_two_stroke_labels_split_with_pen_up_gap(self):
        two = [label for label in "0123456789"
               if character_geometry(label).two_strokes]
        assert two, "alphabet should contain at least one two-stroke glyph"
        cfg = SynthConfig(n_users=1, characters=(two[0],), sessions=1,
                          samples_per_cell=1, points=32, seed=0)
        ds, _ = generate_synthetic(cfg)
        strokes = ds.samples[0].strokes
        assert len(strokes) == 2
        gap = np.asarray(strokes[1])[0, 2] - np.asarray(strokes[0])[-1, 2]
        assert gap > 50.0


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kw",
        [
            {"n_users": 0},
            {"characters": ()},
            {"characters": ("a", "a")},
            {"sessions": 0},
            {"samples_per_cell": 0},
            {"points": 8},
            {"rate_hz": 0.0},
            {"inter_user_spread": -0.1},
            {"tempo_jitter": -0.5},
            {"orientation_jitter": -0.2},
        ],
    )
    def test_bad_values_rejected(self, kw):
        with pytest.raises(InvalidInputError):
            SynthConfig(**kw)

    def test_presets_exist_and_override(self):
        easy = preset_config("easy")
        assert easy.inter_user_spread > easy.intra_user_noise
        tweaked = preset_config("easy", n_users=3)
        assert tweaked.n_users == 3
        with pytest.raises(InvalidInputError, match="unknown preset"):
            preset_config("impossible")


class TestPresetCalibration:
    def test_easy_preset_separates_under_alignment(self):
        """With identity spread far above within-user noise, the plain
        alignment scorer stays below 2% EER on every character of the
        easy preset — the calibration the training smoke test relies on."""
        from strokeauth.evalproto import ProtocolConfig, run_protocol
        from strokeauth.scorers import get_scorer

        cfg = preset_config("easy")
        ds, _ = generate_synthetic(cfg)
        report = run_protocol(
            ds, get_scorer("dtw"), ProtocolConfig(scorer="dtw", password=tuple(cfg.characters))
        )
        for label in cfg.characters:
            assert report.per_character[label]["eer"] < 0.02, label
