"""Instance construction from external data files.

Two sources are supported: ratings tables in the usual userId/movieId/rating/
timestamp CSV layout with a per-movie pipe-separated genre column, and plain
whitespace edge lists with "#" comments. Both paths are deterministic given
the file bytes and the seeds, and both emit a content fingerprint that run
outputs record.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, IngestError
from .environments import InfluenceGraph, PmcInstance

GENRES_20 = (
    "Action", "Adventure", "Animation", "Children", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "IMAX",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
    "(no genres listed)",
)
_GENRE_INDEX = {g: k for k, g in enumerate(GENRES_20)}


def _open_text(path, **kwargs):
    # unreadable inputs are an ingestion failure, not a crash
    try:
        return open(path, encoding="utf-8", **kwargs)
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from None


@dataclass
class RatingsTable:
    """Parsed ratings plus the movie -> binary genre vector map."""

    user_ids: np.ndarray
    movie_ids: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray
    genres: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.user_ids.size
        if not (self.movie_ids.size == self.ratings.size == self.timestamps.size == n):
            raise IngestError("ratings columns have mismatched lengths")
        missing = set(np.unique(self.movie_ids).tolist()) - set(self.genres)
        if missing:
            raise IngestError(
                f"missing genre data for movie ids {sorted(missing)[:5]}")
        for mid, vec in self.genres.items():
            if vec.shape != (len(GENRES_20),) or not vec.any():
                raise IngestError(f"movie {mid} has an empty genre vector")

    def __len__(self) -> int:
        return int(self.user_ids.size)


def load_ratings_csv(path) -> tuple:
    """Parse a userId,movieId,rating,timestamp CSV; returns the four columns."""
    users: list[int] = []
    movies: list[int] = []
    ratings: list[float] = []
    stamps: list[int] = []
    with _open_text(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: empty ratings file")
        need = ["userId", "movieId", "rating", "timestamp"]
        cols = {name.strip(): k for k, name in enumerate(header)}
        if any(n not in cols for n in need):
            raise IngestError(f"{path}: header must contain {', '.join(need)}")
        sel = [cols[n] for n in need]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                users.append(int(row[sel[0]]))
                movies.append(int(row[sel[1]]))
                ratings.append(float(row[sel[2]]))
                stamps.append(int(row[sel[3]]))
            except (ValueError, IndexError) as exc:
                raise IngestError(f"{path}:{lineno}: bad ratings row: {exc}") from None
    if not users:
        raise IngestError(f"{path}: no ratings rows")
    return (np.asarray(users, dtype=np.int64), np.asarray(movies, dtype=np.int64),
            np.asarray(ratings, dtype=np.float64), np.asarray(stamps, dtype=np.int64))


def load_movies_csv(path) -> dict:
    """Parse a movieId,title,genres CSV into {movie_id: binary genre vector}."""
    out: dict[int, np.ndarray] = {}
    with _open_text(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: empty movies file")
        cols = {name.strip(): k for k, name in enumerate(header)}
        for need in ("movieId", "genres"):
            if need not in cols:
                raise IngestError(f"{path}: header must contain movieId and genres")
        mi, gi = cols["movieId"], cols["genres"]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                mid = int(row[mi])
                labels = row[gi].split("|")
            except (ValueError, IndexError) as exc:
                raise IngestError(f"{path}:{lineno}: bad movies row: {exc}") from None
            vec = np.zeros(len(GENRES_20))
            for lab in labels:
                lab = lab.strip()
                if not lab:
                    continue
                k = _GENRE_INDEX.get(lab)
                if k is None:
                    raise IngestError(f"{path}:{lineno}: unknown genre {lab!r}")
                vec[k] = 1.0
            if not vec.any():
                raise IngestError(f"{path}:{lineno}: movie {mid} lists no genres")
            out[mid] = vec
    if not out:
        raise IngestError(f"{path}: no movie rows")
    return out


def load_ratings_table(ratings_path, movies_path) -> RatingsTable:
    users, movies, ratings, stamps = load_ratings_csv(ratings_path)
    genres = load_movies_csv(movies_path)
    return RatingsTable(users, movies, ratings, stamps, genres)


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return mat / norms


def movielens_attractions(table: RatingsTable, window, movie_ids, user_ids,
                          noise_seed: int = 0, noise_scale: float = 0.05,
                          noise_as: str = "variance"):
    """Attraction matrix for explicit movie rows and user columns.

    A user's taste vector is the mean genre vector of everything they rated
    in the window plus folded-normal noise (one row of draws per user, in
    column order); attraction of movie i for user j is
    0.2 * cos(genre_i, taste_j) * avg_rating_i / max avg rating, with the
    average taken over the movie's in-window ratings and the max over the
    given movies. Returns (p, avg_ratings).
    """
    if noise_as not in ("variance", "std"):
        raise ConfigurationError(f"unknown noise_as {noise_as!r}")
    if noise_scale < 0.0:
        raise ConfigurationError("noise_scale must be non-negative")
    start, end = int(window[0]), int(window[1])
    if end <= start:
        raise IngestError("empty date window")
    mask = (table.timestamps >= start) & (table.timestamps < end)
    users = table.user_ids[mask]
    movies = table.movie_ids[mask]
    ratings = table.ratings[mask]

    movie_ids = np.asarray(movie_ids, dtype=np.int64)
    user_ids = np.asarray(user_ids, dtype=np.int64)
    avg = np.zeros(movie_ids.size)
    for k, mid in enumerate(movie_ids):
        sel = movies == mid
        if not sel.any():
            raise IngestError(f"movie {mid} has no ratings in the window")
        avg[k] = ratings[sel].mean()
    rmax = avg.max()
    if rmax <= 0.0:
        raise IngestError("all chosen movies have non-positive average ratings")

    g_hat = _unit_rows(np.stack([table.genres[int(m)] for m in movie_ids]))

    W = user_ids.size
    sigma = np.sqrt(noise_scale) if noise_as == "variance" else noise_scale
    noise_rng = np.random.default_rng(noise_seed)
    noise = np.abs(noise_rng.standard_normal((W, len(GENRES_20)))) * sigma
    u_mat = np.empty((W, len(GENRES_20)))
    for j, uid in enumerate(user_ids):
        rated = movies[users == uid]
        if rated.size == 0:
            raise IngestError(f"user {uid} has no ratings in the window")
        vecs = np.stack([table.genres[int(m)] for m in rated])
        u_mat[j] = vecs.mean(axis=0)
    u_hat = _unit_rows(u_mat + noise)

    p = 0.2 * (g_hat @ u_hat.T) * (avg / rmax)[:, None]
    np.clip(p, 0.0, 0.2, out=p)
    return p, avg


def build_movielens_instance(table: RatingsTable, window, V: int = 30,
                             w_cap=None, K: int = 3, p_star: float = 0.05,
                             noise_seed: int = 0, selection_seed=None,
                             noise_scale: float = 0.05,
                             noise_as: str = "variance"):
    """Attraction-probability instance from a ratings window.

    The movie set is V/3 most-rated + V/3 least-rated + V/3 random movies of
    the window (count ties go to the lowest movie id). Every user with at
    least one rating in the window stays; w_cap subsamples them uniformly
    with the selection seed. The window is half-open: start <= t < end.

    Returns (PmcInstance, meta dict with ids and a content fingerprint).
    """
    if V < 3 or V % 3 != 0:
        raise ConfigurationError("V must be a positive multiple of 3")
    start, end = int(window[0]), int(window[1])
    if end <= start:
        raise IngestError("empty date window")
    mask = (table.timestamps >= start) & (table.timestamps < end)
    if not mask.any():
        raise IngestError("no ratings fall inside the date window")
    users = table.user_ids[mask]
    movies = table.movie_ids[mask]

    mids, counts = np.unique(movies, return_counts=True)
    third = V // 3
    if mids.size < V:
        raise IngestError(f"window holds {mids.size} movies, need at least {V}")
    by_most = mids[np.lexsort((mids, -counts))]
    top = by_most[:third]
    remaining = np.setdiff1d(mids, top)
    rem_counts = counts[np.searchsorted(mids, remaining)]
    by_least = remaining[np.lexsort((remaining, rem_counts))]
    bottom = by_least[:third]
    remaining = np.setdiff1d(remaining, bottom)
    if remaining.size < third:
        raise IngestError("not enough movies left for the random tranche")
    sel_rng = np.random.default_rng(
        noise_seed if selection_seed is None else selection_seed)
    rand = remaining[np.sort(sel_rng.choice(remaining.size, size=third,
                                            replace=False))]
    chosen = np.concatenate([np.sort(top), np.sort(bottom), rand])

    uids = np.unique(users)
    if w_cap is not None and uids.size > int(w_cap):
        keep = np.sort(sel_rng.choice(uids.size, size=int(w_cap), replace=False))
        uids = uids[keep]

    p, _avg = movielens_attractions(table, window, chosen, uids, noise_seed,
                                    noise_scale, noise_as)
    inst = PmcInstance(p, K=K, p_star=p_star)
    payload = p.tobytes() + chosen.tobytes() + uids.tobytes()
    meta = {
        "movie_ids": [int(m) for m in chosen],
        "user_ids": [int(u) for u in uids],
        "V": int(chosen.size),
        "W": int(uids.size),
        "K": int(K),
        "p_star": float(p_star),
        "window": [start, end],
        "fingerprint": hashlib.sha256(payload).hexdigest(),
    }
    return inst, meta


def load_edge_graph(path, directed: bool = True):
    """Whitespace "src dst" edge list to an influence graph.

    Comment lines start with "#". Self-loops are dropped, duplicates are
    collapsed, undirected input expands each line into both directions, node
    ids are remapped to 0..n-1 in sorted order, and every surviving edge
    (i, j) gets probability 1/outdegree(i).

    Returns (InfluenceGraph, meta dict with the id map and a fingerprint).
    """
    pairs: list[tuple[int, int]] = []
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            tokens = text.split()
            if len(tokens) != 2:
                raise IngestError(f"{path}:{lineno}: expected two node ids")
            try:
                s, d = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise IngestError(f"{path}:{lineno}: non-integer node id") from None
            if s < 0 or d < 0:
                raise IngestError(f"{path}:{lineno}: negative node id")
            if s == d:
                continue
            pairs.append((s, d))
            if not directed:
                pairs.append((d, s))
    if not pairs:
        raise IngestError(f"{path}: no usable edges")
    arr = np.array(sorted(set(pairs)), dtype=np.int64)
    node_ids = np.unique(arr)
    src = np.searchsorted(node_ids, arr[:, 0])
    dst = np.searchsorted(node_ids, arr[:, 1])
    outdeg = np.bincount(src, minlength=node_ids.size)
    p = 1.0 / outdeg[src]
    graph = InfluenceGraph(node_ids.size, np.stack([src, dst], axis=1), p)
    payload = graph.src.tobytes() + graph.dst.tobytes() + graph.p.tobytes()
    meta = {
        "n": int(node_ids.size),
        "m": int(graph.m),
        "node_ids": [int(v) for v in node_ids],
        "directed": bool(directed),
        "fingerprint": hashlib.sha256(payload).hexdigest(),
    }
    return graph, meta


def save_instance(path, kind: str, meta: dict, **arrays) -> None:
    """Persist an ingested instance with its metadata and fingerprint."""
    np.savez(path, kind=np.array(kind), meta=np.array(json.dumps(meta)), **arrays)


def load_instance(path):
    """Load a saved instance; verifies the stored fingerprint still matches."""
    try:
        archive = np.load(path, allow_pickle=False)
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from None
    with archive as data:
        kind = str(data["kind"])
        meta = json.loads(str(data["meta"]))
        if kind == "pmc":
            p = data["p"]
            inst = PmcInstance(p, K=int(meta["K"]), p_star=float(meta["p_star"]))
            payload = p.tobytes() \
                + np.asarray(meta["movie_ids"], dtype=np.int64).tobytes() \
                + np.asarray(meta["user_ids"], dtype=np.int64).tobytes()
        elif kind == "graph":
            edges = np.stack([data["src"], data["dst"]], axis=1)
            inst = InfluenceGraph(int(meta["n"]), edges, data["p"])
            payload = inst.src.tobytes() + inst.dst.tobytes() + inst.p.tobytes()
        else:
            raise IngestError(f"{path}: unknown instance kind {kind!r}")
    if hashlib.sha256(payload).hexdigest() != meta.get("fingerprint"):
        raise IngestError(f"{path}: fingerprint mismatch, file was modified")
    return inst, meta
