"""Regenerate the committed ratings fixture.

Synthetic ratings table shaped like the usual movie-ratings exports: a
popularity head (three broadly watched, highly rated dramas), a mid tier,
and a long tail of obscure movies, rated by two user populations with
different genre tastes. Run from the repository root:

    python tests/data/make_movielens_fixture.py

The output is deterministic; the CSVs it writes are committed so tests never
regenerate them.
"""

from __future__ import annotations

import csv
import os

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
WINDOW_START = 1393632000  # 2014-03-01 UTC
WINDOW_END = 1425168000  # 2015-03-01 UTC

BLOCKBUSTERS = [1, 2, 3]
MID_DRAMA = list(range(4, 19))
MID_COMEDY = list(range(19, 34))
OBSCURE = list(range(34, 71))

N_USERS = 1200
TYPE_A_SHARE = 0.7  # drama-leaning users


def movie_rows():
    rows = []
    for mid in BLOCKBUSTERS:
        rows.append((mid, f"Blockbuster {mid}", "Drama"))
    for k, mid in enumerate(MID_DRAMA):
        genre = "Drama|Thriller" if k % 2 == 0 else "Drama|Crime"
        rows.append((mid, f"Mid Drama {mid}", genre))
    for k, mid in enumerate(MID_COMEDY):
        genre = "Comedy|Romance" if k % 2 == 0 else "Comedy"
        rows.append((mid, f"Mid Comedy {mid}", genre))
    for k, mid in enumerate(OBSCURE):
        genre = ["Horror", "Documentary", "Western", "Sci-Fi"][k % 4]
        rows.append((mid, f"Obscure {mid}", genre))
    return rows


def clip_rating(x: float) -> float:
    return float(np.clip(np.round(x * 2.0) / 2.0, 0.5, 5.0))


def main() -> None:
    rng = np.random.default_rng(41)
    ratings = []

    def stamp() -> int:
        return int(rng.integers(WINDOW_START, WINDOW_END))

    for uid in range(1, N_USERS + 1):
        type_a = rng.random() < TYPE_A_SHARE
        for mid in BLOCKBUSTERS:
            if rng.random() < (0.62 if type_a else 0.5):
                base = 4.8 if type_a else 3.6
                ratings.append((uid, mid, clip_rating(base + 0.3 * rng.standard_normal()), stamp()))
        for mid in MID_DRAMA:
            if rng.random() < (0.12 if type_a else 0.04):
                base = 3.4 if type_a else 2.8
                ratings.append((uid, mid, clip_rating(base + 0.5 * rng.standard_normal()), stamp()))
        for mid in MID_COMEDY:
            if rng.random() < (0.04 if type_a else 0.15):
                base = 2.9 if type_a else 3.4
                ratings.append((uid, mid, clip_rating(base + 0.5 * rng.standard_normal()), stamp()))

    # long tail: one to four raters per obscure movie, mediocre scores
    for mid in OBSCURE:
        for _ in range(int(rng.integers(1, 5))):
            uid = int(rng.integers(1, N_USERS + 1))
            ratings.append((uid, mid, clip_rating(2.2 + 0.6 * rng.standard_normal()), stamp()))

    # out-of-window rows that ingestion must drop
    for _ in range(400):
        uid = int(rng.integers(1, N_USERS + 1))
        mid = int(rng.integers(1, 71))
        early = rng.random() < 0.5
        ts = int(rng.integers(WINDOW_START - 10_000_000, WINDOW_START)) if early \
            else int(rng.integers(WINDOW_END, WINDOW_END + 10_000_000))
        ratings.append((uid, mid, clip_rating(3.0 + rng.standard_normal()), ts))

    ratings.sort(key=lambda r: (r[0], r[3], r[1]))
    with open(os.path.join(HERE, "ratings.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["userId", "movieId", "rating", "timestamp"])
        w.writerows(ratings)
    with open(os.path.join(HERE, "movies.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["movieId", "title", "genres"])
        w.writerows(movie_rows())
    print(f"wrote {len(ratings)} ratings for {N_USERS} users, 70 movies")


if __name__ == "__main__":
    main()
