import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tagprobe import (
    AggregatedTable,
    FrameStore,
    NormStats,
    ProvenanceBlock,
    SplitAssignment,
    TagMatrix,
    aggregate_frames,
    compute_norm_stats,
    concat_tables,
    generate_synthetic,
    l2_normalize_frames,
    standardize_frames,
)
from tagprobe.errors import (
    AlignmentError,
    ArgumentError,
    GenerationError,
    ValidationError,
)


def store_of(frames, source="synthetic", ids=None):
    frames = [np.asarray(f, dtype=np.float32) for f in frames]
    ids = ids or [f"c{i}" for i in range(len(frames))]
    return FrameStore(tuple(ids), frames[0].shape[1], tuple(frames), source)


class TestFrameStoreValidation:
    def test_rejects_source_dims_mismatch(self):
        with pytest.raises(ValidationError, match="passt"):
            store_of([np.zeros((2, 512))], source="passt")

    def test_accepts_vggish_dims(self):
        s = store_of([np.zeros((3, 128))], source="vggish")
        assert s.dims == 128

    def test_rejects_non_finite(self):
        bad = np.zeros((2, 4), dtype=np.float32)
        bad[1, 2] = np.nan
        with pytest.raises(ValidationError, match="non-finite"):
            store_of([bad])

    def test_rejects_empty_clip(self):
        with pytest.raises(ValidationError, match="no frames"):
            store_of([np.zeros((0, 4))])

    def test_rejects_ragged_dims(self):
        with pytest.raises(ValidationError):
            FrameStore(("a", "b"), 4, (np.zeros((1, 4), np.float32), np.zeros((1, 3), np.float32)))


class TestAggregateFrames:
    def test_hand_computed_mean_and_population_std(self):
        # frames [[1,2],[3,4]]: means [2,3], population stds [1,1]
        table = aggregate_frames(store_of([[[1, 2], [3, 4]]]))
        np.testing.assert_allclose(table.rows[0], [2, 3, 1, 1])

    def test_single_frame_clip_has_zero_std(self):
        table = aggregate_frames(store_of([[[5, 7]]]))
        np.testing.assert_allclose(table.rows[0], [5, 7, 0, 0])

    def test_vggish_dims_double_to_256(self):
        rng = np.random.default_rng(0)
        table = aggregate_frames(store_of([rng.normal(size=(4, 128))], source="vggish"))
        assert table.dims == 256
        assert table.provenance == (ProvenanceBlock("vggish", 0, 256),)

    @given(
        num_frames=st.integers(1, 6),
        dims=st.integers(1, 5),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=40, deadline=None)
    def test_dims_double_and_frame_order_irrelevant(self, num_frames, dims, seed):
        rng = np.random.default_rng(seed)
        frames = rng.normal(size=(num_frames, dims)).astype(np.float32)
        table = aggregate_frames(store_of([frames]))
        assert table.dims == 2 * dims
        shuffled = frames[rng.permutation(num_frames)]
        table2 = aggregate_frames(store_of([shuffled]))
        np.testing.assert_allclose(table.rows, table2.rows, atol=1e-6)


class TestNormStats:
    def test_two_frames_mean_and_std(self):
        stats = compute_norm_stats(store_of([[[0.0]], [[2.0]]]), rows=[0, 1])
        np.testing.assert_allclose(stats.mean, [1.0])
        np.testing.assert_allclose(stats.std, [1.0])

    def test_identical_frames_zero_std(self):
        stats = compute_norm_stats(store_of([[[3.0, 3.0]], [[3.0, 3.0]]]), rows=[0, 1])
        np.testing.assert_allclose(stats.std, [0.0, 0.0])

    def test_empty_rows_rejected(self):
        with pytest.raises(ArgumentError):
            compute_norm_stats(store_of([[[1.0]]]), rows=[])

    def test_out_of_range_row_rejected(self):
        with pytest.raises(ArgumentError):
            compute_norm_stats(store_of([[[1.0]]]), rows=[3])


class TestStandardize:
    def test_centering_identity(self):
        store = store_of([[[1.0, 2.0], [1.0, 2.0]]])
        stats = NormStats(mean=[1.0, 2.0], std=[1.0, 1.0])
        out = standardize_frames(store, stats)
        np.testing.assert_array_equal(out.frames[0], np.zeros((2, 2), np.float32))

    def test_identity_transform(self):
        store = store_of([[[0.5, -1.5], [2.0, 0.25]]])
        out = standardize_frames(store, NormStats(mean=[0.0, 0.0], std=[1.0, 1.0]))
        assert out == store

    def test_direct_formula(self):
        out = standardize_frames(
            store_of([[[3.0]]]), NormStats(mean=[1.0], std=[2.0])
        )
        np.testing.assert_allclose(out.frames[0], [[1.0]])

    def test_dims_mismatch(self):
        with pytest.raises(ArgumentError):
            standardize_frames(store_of([[[1.0, 2.0]]]), NormStats(mean=[0.0], std=[1.0]))

    def test_zero_variance_dimension_is_clamped(self):
        store = store_of([[[4.0]], [[4.0]]])
        stats = compute_norm_stats(store, rows=[0, 1])
        out = standardize_frames(store, stats)
        assert np.isfinite(out.frames[0]).all()

    def test_restandardized_stats_are_zero_mean_unit_std(self):
        rng = np.random.default_rng(5)
        store = store_of([rng.normal(2.0, 3.0, size=(6, 4)) for _ in range(5)])
        stats = compute_norm_stats(store, rows=range(5))
        out = standardize_frames(store, stats)
        again = compute_norm_stats(out, rows=range(5))
        np.testing.assert_allclose(again.mean, 0.0, atol=1e-5)
        np.testing.assert_allclose(again.std, 1.0, atol=1e-5)

    def test_l2_normalization_unit_rows(self):
        rng = np.random.default_rng(6)
        store = store_of([rng.normal(size=(3, 4))])
        out = l2_normalize_frames(store)
        np.testing.assert_allclose(
            np.linalg.norm(out.frames[0].astype(np.float64), axis=1), 1.0, atol=1e-6
        )


def table_of(rows, source="synthetic", ids=None, blocks=None):
    rows = np.asarray(rows, dtype=np.float32)
    ids = ids or [f"c{i}" for i in range(rows.shape[0])]
    blocks = blocks or (ProvenanceBlock(source, 0, rows.shape[1]),)
    return AggregatedTable(tuple(ids), rows.shape[1], rows, tuple(blocks))


class TestConcatTables:
    def test_combined_2816(self):
        rng = np.random.default_rng(1)
        tables = [
            table_of(rng.normal(size=(2, 256)), source="vggish"),
            table_of(rng.normal(size=(2, 1024)), source="openl3"),
            table_of(rng.normal(size=(2, 1536)), source="passt"),
        ]
        combined = concat_tables(tables)
        assert combined.dims == 2816
        assert [b.to_json() for b in combined.provenance] == [
            ["vggish", 0, 256], ["openl3", 256, 1024], ["passt", 1280, 1536],
        ]

    def test_single_table_identity(self):
        t = table_of([[1.0, 2.0]])
        assert concat_tables([t]) == t

    def test_permuted_ids_rejected_with_position(self):
        a = table_of([[1.0, 2.0], [3.0, 4.0]], ids=["x", "y"])
        b = table_of([[1.0, 2.0], [3.0, 4.0]], ids=["y", "x"])
        with pytest.raises(AlignmentError, match="position 0"):
            concat_tables([a, b])

    def test_associativity(self):
        rng = np.random.default_rng(2)
        a = table_of(rng.normal(size=(3, 2)))
        b = table_of(rng.normal(size=(3, 4)))
        c = table_of(rng.normal(size=(3, 2)))
        assert concat_tables([concat_tables([a, b]), c]) == concat_tables([a, b, c])


class TestTagMatrix:
    def test_zero_positive_tag_rejected(self):
        labels = np.array([[1, 0], [1, 0]], dtype=np.uint8)
        with pytest.raises(ValidationError, match="zero positives"):
            TagMatrix(("a", "b"), ("t0", "t1"), labels)

    def test_non_binary_rejected(self):
        with pytest.raises(ValidationError, match="0/1"):
            TagMatrix(("a",), ("t0",), np.array([[2]], dtype=np.uint8))


class TestSplitAssignment:
    def test_overlap_rejected(self):
        s = SplitAssignment((0, 1), (1,), (2,))
        with pytest.raises(ValidationError, match="both"):
            s.validate(3)

    def test_empty_split_rejected(self):
        s = SplitAssignment((0,), (), (2,))
        with pytest.raises(ValidationError, match="empty"):
            s.validate(3)


class TestGenerateSynthetic:
    def test_deterministic_bytes(self):
        a = generate_synthetic(60, 4, 6, 2, 0.1, 42)
        b = generate_synthetic(60, 4, 6, 2, 0.1, 42)
        assert a[0] == b[0] and a[1] == b[1] and a[2] == b[2]

    def test_different_seed_differs(self):
        a = generate_synthetic(60, 4, 6, 2, 0.1, 42)
        b = generate_synthetic(60, 4, 6, 2, 0.1, 43)
        assert a[0] != b[0]

    def test_zero_noise_collapses_std_block(self):
        store, _, _ = generate_synthetic(60, 4, 6, 3, 0.0, 1)
        table = aggregate_frames(store)
        np.testing.assert_array_equal(table.rows[:, 6:], 0.0)

    def test_every_tag_positive_in_every_split(self):
        _, tags, split = generate_synthetic(120, 5, 8, 2, 0.1, 3)
        for rows in (split.train_rows, split.valid_rows, split.test_rows):
            assert tags.labels[list(rows)].sum(axis=0).min() >= 1

    def test_split_proportions(self):
        _, _, split = generate_synthetic(500, 10, 4, 2, 0.1, 0)
        assert len(split.train_rows) == 350
        assert len(split.valid_rows) == 50
        assert len(split.test_rows) == 100

    def test_infeasible_positivity_raises(self, caplog):
        # 10 valid clips x <=3 tags cannot cover 50 tags
        with caplog.at_level(logging.WARNING):
            with pytest.raises(GenerationError, match="increase num_clips"):
                generate_synthetic(100, 50, 4, 1, 0.1, 0)

    def test_bad_sizes_rejected(self):
        with pytest.raises(ArgumentError):
            generate_synthetic(0, 5, 4, 1, 0.1, 0)
        with pytest.raises(ArgumentError):
            generate_synthetic(100, 5, 4, 1, -0.5, 0)
