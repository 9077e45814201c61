import numpy as np
import pytest

from cmablab.bruteforce import exact_spread
from cmablab.core import ConfigurationError, IngestError, SeedSet
from cmablab.environments import im_spread
from cmablab.ingest import (
    GENRES_20,
    load_movies_csv,
    RatingsTable,
    build_movielens_instance,
    load_edge_graph,
    load_instance,
    load_ratings_table,
    movielens_attractions,
    save_instance,
)

WIDE = (0, 10_000)
EPOCH_WIDE = (0, 2_000_000_000)


def _genre(*names):
    vec = np.zeros(len(GENRES_20))
    for name in names:
        vec[GENRES_20.index(name)] = 1.0
    return vec


def _table(rows, genres):
    """rows of (user, movie, rating, timestamp)."""
    arr = np.asarray(rows, dtype=np.float64)
    return RatingsTable(arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64),
                        arr[:, 2], arr[:, 3].astype(np.int64), genres)


class TestRatingsParsing:
    def test_fixture_loads(self, data_dir):
        table = load_ratings_table(data_dir / "ratings.csv",
                                   data_dir / "movies.csv")
        assert len(table) > 1000
        assert all(v.any() for v in table.genres.values())

    def test_header_required(self, tmp_path):
        bad = tmp_path / "r.csv"
        bad.write_text("user,item,score,when\n1,2,3.0,4\n")
        with pytest.raises(IngestError):
            load_ratings_table(bad, bad)

    def test_bad_row_reports_line_number(self, tmp_path, data_dir):
        bad = tmp_path / "r.csv"
        bad.write_text("userId,movieId,rating,timestamp\n"
                       "1,2,4.0,100\n"
                       "1,2,high,100\n")
        with pytest.raises(IngestError, match=":3:"):
            load_ratings_table(bad, data_dir / "movies.csv")

    def test_unknown_genre_rejected(self, tmp_path):
        bad = tmp_path / "m.csv"
        bad.write_text("movieId,title,genres\n7,Some Movie,Polka\n")
        with pytest.raises(IngestError, match="unknown genre"):
            load_movies_csv(bad)

    def test_missing_genre_data(self):
        with pytest.raises(IngestError, match="missing genre"):
            _table([(1, 5, 4.0, 10)], {2: _genre("Drama")})

    def test_empty_genre_vector(self):
        with pytest.raises(IngestError, match="empty genre"):
            _table([(1, 5, 4.0, 10)], {5: np.zeros(len(GENRES_20))})


class TestAttractions:
    def test_single_genre_alignment(self):
        # a user who only rated one single-genre movie has exactly that
        # movie's taste, so the cosine is 1 and p = 0.2 * r / max r
        table = _table([(7, 1, 4.0, 10), (8, 2, 5.0, 10)],
                       {1: _genre("Action"), 2: _genre("Drama")})
        p, avg = movielens_attractions(table, WIDE, [1, 2], [7],
                                       noise_scale=0.0)
        assert avg.tolist() == [4.0, 5.0]
        assert p[0, 0] == pytest.approx(0.2 * 4.0 / 5.0)
        assert p[1, 0] == 0.0  # orthogonal genres

    def test_matches_independent_recomputation(self):
        genres = {1: _genre("Action"), 2: _genre("Action", "Comedy"),
                  3: _genre("Drama"), 4: _genre("Comedy", "Drama", "Romance"),
                  5: _genre("Sci-Fi")}
        rows = [(1, 1, 5.0, 10), (1, 2, 3.0, 11), (2, 2, 4.0, 12),
                (2, 3, 2.0, 13), (3, 3, 4.5, 14), (3, 4, 1.0, 15),
                (4, 5, 3.5, 16), (4, 1, 4.0, 17), (4, 4, 2.5, 18)]
        table = _table(rows, genres)
        movie_ids, user_ids = [1, 2, 3, 4, 5], [1, 2, 3, 4]
        p, _ = movielens_attractions(table, WIDE, movie_ids, user_ids,
                                     noise_scale=0.0)

        rated = {1: [1, 2], 2: [2, 3], 3: [3, 4], 4: [5, 1, 4]}
        avg = {1: 4.5, 2: 3.5, 3: 3.25, 4: 1.75, 5: 3.5}
        rmax = max(avg.values())
        want = np.empty((5, 4))
        for i, mid in enumerate(movie_ids):
            g = genres[mid] / np.linalg.norm(genres[mid])
            for j, uid in enumerate(user_ids):
                taste = np.mean([genres[m] for m in rated[uid]], axis=0)
                taste = taste / np.linalg.norm(taste)
                want[i, j] = 0.2 * float(g @ taste) * avg[mid] / rmax
        np.testing.assert_allclose(p, want, atol=1e-12)

    def test_noise_scale_interpretations_differ(self):
        table = _table([(1, 1, 4.0, 10), (2, 2, 3.0, 10)],
                       {1: _genre("Action"), 2: _genre("Drama")})
        args = (table, WIDE, [1, 2], [1, 2])
        base, _ = movielens_attractions(*args, noise_scale=0.0)
        as_var, _ = movielens_attractions(*args, noise_seed=3,
                                          noise_as="variance")
        as_std, _ = movielens_attractions(*args, noise_seed=3, noise_as="std")
        # same draws, but variance reading implies sigma sqrt(0.05) > 0.05
        assert np.abs(as_var - base).sum() > np.abs(as_std - base).sum()

    def test_attractions_stay_in_cap(self, data_dir):
        table = load_ratings_table(data_dir / "ratings.csv",
                                   data_dir / "movies.csv")
        inst, meta = build_movielens_instance(table, EPOCH_WIDE, V=30,
                                              w_cap=120, noise_seed=7)
        assert inst.p.shape == (30, 120)
        assert inst.p.min() >= 0.0 and inst.p.max() <= 0.2

    def test_validation(self):
        table = _table([(1, 1, 4.0, 10)], {1: _genre("Action")})
        with pytest.raises(ConfigurationError):
            movielens_attractions(table, WIDE, [1], [1], noise_as="gaussian")
        with pytest.raises(ConfigurationError):
            movielens_attractions(table, WIDE, [1], [1], noise_scale=-1.0)
        with pytest.raises(IngestError, match="window"):
            movielens_attractions(table, (10, 10), [1], [1])
        with pytest.raises(IngestError, match="no ratings"):
            movielens_attractions(table, (0, 5), [1], [1])


class TestBuildInstance:
    def _counted_table(self):
        genres = {m: _genre("Drama") for m in range(1, 10)}
        rows = []
        counts = {1: 5, 2: 4, 3: 3, 4: 2, 5: 2, 6: 1, 7: 1, 8: 1, 9: 1}
        user = 0
        for mid, c in counts.items():
            for _ in range(c):
                user += 1
                rows.append((user, mid, 4.0, 100))
        return _table(rows, genres)

    def test_v_thirds_selection(self):
        inst, meta = build_movielens_instance(self._counted_table(), WIDE,
                                              V=9, K=2, noise_seed=1)
        ids = meta["movie_ids"]
        assert ids[:3] == [1, 2, 3]  # most rated
        assert ids[3:6] == [6, 7, 8]  # fewest ratings, ties to low ids
        assert sorted(ids[6:]) == [4, 5, 9]  # leftovers fill the random slots
        assert meta["V"] == 9 and inst.p.shape[0] == 9

    def test_w_cap_is_deterministic(self):
        table = self._counted_table()
        a = build_movielens_instance(table, WIDE, V=9, w_cap=4, noise_seed=1)
        b = build_movielens_instance(table, WIDE, V=9, w_cap=4, noise_seed=1)
        assert a[1]["user_ids"] == b[1]["user_ids"]
        assert len(a[1]["user_ids"]) == 4
        assert a[1]["fingerprint"] == b[1]["fingerprint"]
        np.testing.assert_array_equal(a[0].p, b[0].p)

    def test_window_is_half_open(self):
        table = _table([(1, 1, 2.0, 10), (2, 1, 4.0, 20)],
                       {1: _genre("Action")})
        _, avg = movielens_attractions(table, (10, 20), [1], [1],
                                       noise_scale=0.0)
        assert avg[0] == 2.0  # the rating at t = 20 falls outside

    def test_validation(self):
        table = self._counted_table()
        with pytest.raises(ConfigurationError, match="multiple of 3"):
            build_movielens_instance(table, WIDE, V=10)
        with pytest.raises(IngestError, match="window"):
            build_movielens_instance(table, (5, 5), V=9)
        with pytest.raises(IngestError, match="need at least"):
            build_movielens_instance(table, WIDE, V=12)


class TestEdgeGraph:
    def test_undirected_triangle(self, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("# triangle\n0 1\n1 2\n0 2\n")
        graph, meta = load_edge_graph(f, directed=False)
        assert graph.n == 3 and graph.m == 6
        assert np.all(graph.p == 0.5)
        assert meta["directed"] is False

    def test_out_probabilities_sum_to_one(self, tmp_path, rng):
        lines = {(int(a), int(b)) for a, b in rng.integers(0, 30, (200, 2))
                 if a != b}
        f = tmp_path / "g.txt"
        f.write_text("\n".join(f"{a} {b}" for a, b in sorted(lines)))
        graph, _ = load_edge_graph(f)
        for v in range(graph.n):
            lo, hi = graph.out_ptr[v], graph.out_ptr[v + 1]
            if hi > lo:
                assert graph.p[lo:hi].sum() == pytest.approx(1.0, abs=1e-12)

    def test_single_and_quarter_probabilities(self, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("0 1\n1 2\n1 3\n1 4\n1 5\n")
        graph, _ = load_edge_graph(f)
        assert graph.p[0] == 1.0
        assert np.all(graph.p[1:] == 0.25)

    def test_self_loops_and_duplicates(self, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("1 1\n0 1\n0 1\n")
        graph, _ = load_edge_graph(f)
        assert graph.m == 1 and graph.p[0] == 1.0

    def test_node_ids_remapped_in_order(self, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("30 10\n10 20\n")
        graph, meta = load_edge_graph(f)
        assert meta["node_ids"] == [10, 20, 30]
        assert graph.n == 3
        # 30 -> 10 becomes 2 -> 0, 10 -> 20 becomes 0 -> 1
        assert (graph.src.tolist(), graph.dst.tolist()) == ([0, 2], [1, 0])

    def test_malformed_lines(self, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("0 1\nx y\n")
        with pytest.raises(IngestError, match=":2:"):
            load_edge_graph(f)
        f.write_text("0 1 2\n")
        with pytest.raises(IngestError, match="two node ids"):
            load_edge_graph(f)
        f.write_text("0 -1\n")
        with pytest.raises(IngestError, match="negative"):
            load_edge_graph(f)
        f.write_text("# nothing\n\n")
        with pytest.raises(IngestError, match="no usable edges"):
            load_edge_graph(f)

    def test_star_spread_closed_form(self, tmp_path, rng):
        f = tmp_path / "g.txt"
        f.write_text("\n".join(f"0 {v}" for v in range(1, 6)))
        graph, _ = load_edge_graph(f)
        hub = SeedSet(nodes=(0,))
        assert exact_spread(graph, hub) == pytest.approx(2.0, abs=1e-12)
        mc = im_spread(graph, hub, 20000, rng)
        assert abs(mc - 2.0) <= 3 * np.sqrt(5 * 0.2 * 0.8 / 20000)


class TestSaveLoad:
    def test_pmc_roundtrip(self, tmp_path, data_dir):
        table = load_ratings_table(data_dir / "ratings.csv",
                                   data_dir / "movies.csv")
        inst, meta = build_movielens_instance(table, EPOCH_WIDE, V=6,
                                              w_cap=8, noise_seed=7)
        out = tmp_path / "inst.npz"
        save_instance(out, "pmc", meta, p=inst.p)
        back, meta2 = load_instance(out)
        np.testing.assert_array_equal(back.p, inst.p)
        assert (back.K, back.p_star) == (inst.K, inst.p_star)
        assert meta2["fingerprint"] == meta["fingerprint"]

    def test_graph_roundtrip(self, tmp_path):
        g = tmp_path / "g.txt"
        g.write_text("0 1\n1 2\n2 0\n")
        graph, meta = load_edge_graph(g)
        out = tmp_path / "graph.npz"
        save_instance(out, "graph", meta, src=graph.src, dst=graph.dst,
                      p=graph.p)
        back, meta2 = load_instance(out)
        np.testing.assert_array_equal(back.src, graph.src)
        np.testing.assert_array_equal(back.p, graph.p)
        assert meta2["n"] == 3

    def test_tamper_detection(self, tmp_path):
        g = tmp_path / "g.txt"
        g.write_text("0 1\n")
        graph, meta = load_edge_graph(g)
        out = tmp_path / "graph.npz"
        meta["fingerprint"] = "0" * 64
        save_instance(out, "graph", meta, src=graph.src, dst=graph.dst,
                      p=graph.p)
        with pytest.raises(IngestError, match="fingerprint"):
            load_instance(out)

    def test_unknown_kind(self, tmp_path):
        out = tmp_path / "odd.npz"
        save_instance(out, "maze", {"fingerprint": ""})
        with pytest.raises(IngestError, match="unknown instance kind"):
            load_instance(out)
