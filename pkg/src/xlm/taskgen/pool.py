"""Task pools: deterministic pre-sampling, versioned binary persistence,
train/test holdout splits."""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from ..env.types import (
    Color,
    Game,
    GridWorld,
    HidingMask,
    ObjectSpec,
    PlayerRef,
    Predicate,
    ProductionRule,
    Relation,
    Shape,
    TemplateRef,
    Visibility,
    VisKind,
)
from .games import GameInfo, sample_game, structural_key
from .oracle import oracle_solve
from .params import GenParams, GenerationError
from .task import Task, materialize_objects
from .worlds import sample_world

MAGIC = b"XLM1"
FORMAT_VERSION = 1


@dataclass
class PoolEntry:
    game: Game
    info: GameInfo
    objects_by_world: dict = field(default_factory=dict)  # world index -> placed specs


@dataclass
class TaskPool:
    version: int
    seed: int
    params: GenParams
    worlds: list[GridWorld]
    games: list[Game]
    infos: list[GameInfo]
    trial_lengths: list[int]
    world_seeds: list[int]
    game_seeds: list[int]

    @property
    def n_worlds(self) -> int:
        return len(self.worlds)

    @property
    def n_games(self) -> int:
        return len(self.games)

    def task(self, world_idx: int, game_idx: int,
             co_player: Optional[str] = None) -> Task:
        world = self.worlds[world_idx]
        game = self.games[game_idx]
        placement_seed = (self.seed * 1_000_003 + world_idx * 8191 + game_idx)
        last = None
        for bump in range(8):  # some worlds are tight for some games
            try:
                objects = materialize_objects(world, game,
                                              placement_seed + bump * 10007,
                                              self.params)
                break
            except GenerationError as e:
                last = e
        else:
            raise GenerationError(
                f"world {world_idx} cannot host game {game_idx}: {last}")
        return Task(
            world_id=world_idx,
            game_id=game_idx,
            world=world,
            game=game,
            objects=objects,
            trial_length=self.trial_lengths[game_idx],
            co_player=co_player,
        )

    def iter_task_ids(self):
        for w in range(self.n_worlds):
            for g in range(self.n_games):
                yield (w, g)


def _derive_trial_length(rng_seed: int, params: GenParams) -> int:
    lo, hi = params.trial_length_range
    if lo == hi:
        return lo
    h = int.from_bytes(hashlib.sha256(f"T{rng_seed}".encode()).digest()[:4], "big")
    return lo + h % (hi - lo + 1)


def build_task(world_seed: int, game_seed: int,
               params: GenParams = GenParams(),
               require_solvable: bool = True,
               co_player: Optional[str] = None) -> tuple[Task, GameInfo]:
    """Assemble one task from seeds, resampling the game until the oracle
    accepts it (generation guarantee: train tasks are solvable)."""
    world = sample_world(world_seed, params)
    last_err = "no attempt"
    for bump in range(params.game_retries):
        game, info = sample_game(game_seed * 1031 + bump, params)
        trial_length = _derive_trial_length(game_seed * 1031 + bump, params)
        try:
            objects = materialize_objects(world, game, game_seed * 7 + bump, params)
        except GenerationError as e:
            last_err = str(e)
            continue
        task = Task(world_id=world_seed, game_id=game_seed, world=world,
                    game=game, objects=objects, trial_length=trial_length,
                    co_player=co_player)
        if not require_solvable:
            return task, info
        report = oracle_solve(task)
        if report.solvable:
            return task, info
        last_err = f"oracle: {report.verdict} {report.reason}"
    raise GenerationError(
        f"no solvable task for seeds ({world_seed}, {game_seed}): {last_err}")


def presample_pool(seed: int, n_worlds: int, n_games: int,
                   params: GenParams = GenParams(),
                   require_solvable: bool = True) -> TaskPool:
    worlds = []
    world_seeds = []
    for i in range(n_worlds):
        ws = seed * 100_000 + i
        worlds.append(sample_world(ws, params))
        world_seeds.append(ws)

    games: list[Game] = []
    infos: list[GameInfo] = []
    trial_lengths: list[int] = []
    game_seeds: list[int] = []
    seen_keys: set = set()
    gs = 0
    probe_world = worlds[0]
    while len(games) < n_games:
        gs += 1
        game_seed = seed * 1_000_000 + gs
        try:
            game, info = sample_game(game_seed, params)
        except GenerationError:
            continue
        key = structural_key(game)
        if key in seen_keys:
            continue
        trial_length = _derive_trial_length(game_seed, params)
        if require_solvable:
            try:
                objects = materialize_objects(probe_world, game, game_seed, params)
                task = Task(world_id=0, game_id=len(games), world=probe_world,
                            game=game, objects=objects, trial_length=trial_length)
                if not oracle_solve(task).solvable:
                    continue
            except GenerationError:
                continue
        seen_keys.add(key)
        games.append(game)
        infos.append(info)
        trial_lengths.append(trial_length)
        game_seeds.append(game_seed)
        if gs > 200 * n_games + 1000:
            raise GenerationError("duplicate rate too high to fill the pool")

    return TaskPool(version=FORMAT_VERSION, seed=seed, params=params,
                    worlds=worlds, games=games, infos=infos,
                    trial_lengths=trial_lengths, world_seeds=world_seeds,
                    game_seeds=game_seeds)


def split_holdout(pool: TaskPool, n_test: int, extra_world_seeds: int = 0
                  ) -> tuple[TaskPool, TaskPool]:
    """Split at game granularity: the last n_test games become the test set,
    played on freshly generated held-out worlds. Structural disjointness holds
    by the pool's construction (no duplicate goal+rule-multiset keys)."""
    if n_test >= pool.n_games:
        raise GenerationError("n_test must be smaller than the pool's game count")
    n_train = pool.n_games - n_test

    train = TaskPool(
        version=pool.version, seed=pool.seed, params=pool.params,
        worlds=pool.worlds, games=pool.games[:n_train],
        infos=pool.infos[:n_train], trial_lengths=pool.trial_lengths[:n_train],
        world_seeds=pool.world_seeds, game_seeds=pool.game_seeds[:n_train],
    )
    n_test_worlds = max(1, extra_world_seeds or pool.n_worlds // 4)
    test_worlds = []
    test_world_seeds = []
    for i in range(n_test_worlds):
        ws = pool.seed * 100_000 + 50_000 + i  # held-out world seed block
        test_worlds.append(sample_world(ws, pool.params))
        test_world_seeds.append(ws)
    test = TaskPool(
        version=pool.version, seed=pool.seed, params=pool.params,
        worlds=test_worlds, games=pool.games[n_train:],
        infos=pool.infos[n_train:], trial_lengths=pool.trial_lengths[n_train:],
        world_seeds=test_world_seeds, game_seeds=pool.game_seeds[n_train:],
    )
    return train, test


# -- binary persistence -------------------------------------------------------

def _w(buf: io.BytesIO, fmt: str, *vals) -> None:
    buf.write(struct.pack("<" + fmt, *vals))


def _encode_ref(buf: io.BytesIO, ref) -> None:
    if isinstance(ref, PlayerRef):
        _w(buf, "BBB", 1, ref.index, 0)
    else:
        _w(buf, "BBB", 2, int(ref.shape), int(ref.color))


def _encode_pred(buf: io.BytesIO, p: Predicate) -> None:
    _w(buf, "BB", int(p.relation), 1 if p.negated else 0)
    _encode_ref(buf, p.arg_a)
    _encode_ref(buf, p.arg_b)


def _encode_spec(buf: io.BytesIO, s: ObjectSpec) -> None:
    has_cell = s.cell is not None
    _w(buf, "BBBB", int(s.shape), int(s.color), 1 if s.frozen else 0,
       1 if has_cell else 0)
    if has_cell:
        _w(buf, "hh", s.cell[0], s.cell[1])


def _encode_world(world: GridWorld) -> bytes:
    buf = io.BytesIO()
    _w(buf, "HH", world.width, world.height)
    walls = sorted(world.walls)
    _w(buf, "I", len(walls))
    for x, y in walls:
        _w(buf, "hh", x, y)
    _w(buf, "H", len(world.spawn_points))
    for (x, y), slot in world.spawn_points:
        _w(buf, "hhB", x, y, slot)
    _w(buf, "H", len(world.initial_objects))
    for s in world.initial_objects:
        _encode_spec(buf, s)
    return buf.getvalue()


def _encode_game(game: Game, info: GameInfo, trial_length: int) -> bytes:
    buf = io.BytesIO()
    _w(buf, "H", trial_length)
    _w(buf, "B", len(game.goals))
    for g in game.goals:
        _encode_pred(buf, g)
    _w(buf, "B", len(game.rules))
    for r in game.rules:
        _encode_pred(buf, r.condition)
        _w(buf, "B", len(r.spawns))
        for s in r.spawns:
            _encode_spec(buf, s)
    _w(buf, "B", len(game.masks))
    for m in game.masks:
        _w(buf, "B", len(m.entries))
        for v in m.entries:
            _w(buf, "BB", int(v.kind), len(v.hidden_objects))
            for h in v.hidden_objects:
                _w(buf, "B", h)
            _w(buf, "b", -1 if v.hidden_predicate is None else v.hidden_predicate)
    _w(buf, "B", len(game.hidden_templates))
    for t in game.hidden_templates:
        _w(buf, "BB", int(t[0]), int(t[1]))
    _w(buf, "B", len(game.initial_objects))
    for s in game.initial_objects:
        _encode_spec(buf, s)
    meta = json.dumps({
        "chain_depth": info.chain_depth,
        "chain": list(info.chain_rule_indices),
        "dead_ends": list(info.dead_end_indices),
        "distractors": [list(t) for t in info.distractors],
        "hiding": info.hiding_mechanism,
    }).encode()
    _w(buf, "I", len(meta))
    buf.write(meta)
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize("<" + fmt)
        vals = struct.unpack_from("<" + fmt, self.data, self.pos)
        self.pos += size
        return vals if len(vals) > 1 else vals[0]

    def blob(self, n: int) -> bytes:
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


def _decode_ref(r: _Reader):
    kind, a, b = r.take("BBB")
    if kind == 1:
        return PlayerRef(a)
    return TemplateRef(Shape(a), Color(b))


def _decode_pred(r: _Reader) -> Predicate:
    rel, neg = r.take("BB")
    arg_a = _decode_ref(r)
    arg_b = _decode_ref(r)
    return Predicate(Relation(rel), arg_a, arg_b, negated=bool(neg))


def _decode_spec(r: _Reader) -> ObjectSpec:
    shape, color, frozen, has_cell = r.take("BBBB")
    cell = None
    if has_cell:
        x, y = r.take("hh")
        cell = (x, y)
    return ObjectSpec(Shape(shape), Color(color), cell, bool(frozen))


def _decode_world(data: bytes) -> GridWorld:
    r = _Reader(data)
    w, h = r.take("HH")
    n_walls = r.take("I")
    walls = frozenset((r.take("hh")) for _ in range(n_walls))
    n_spawns = r.take("H")
    spawns = []
    for _ in range(n_spawns):
        x, y, slot = r.take("hhB")
        spawns.append(((x, y), slot))
    n_objs = r.take("H")
    objs = tuple(_decode_spec(r) for _ in range(n_objs))
    return GridWorld(w, h, walls, tuple(spawns), objs)


def _decode_game(data: bytes) -> tuple[Game, GameInfo, int]:
    r = _Reader(data)
    trial_length = r.take("H")
    n_goals = r.take("B")
    goals = tuple(_decode_pred(r) for _ in range(n_goals))
    n_rules = r.take("B")
    rules = []
    for _ in range(n_rules):
        cond = _decode_pred(r)
        n_spawns = r.take("B")
        spawns = tuple(_decode_spec(r) for _ in range(n_spawns))
        rules.append(ProductionRule(cond, spawns))
    n_masks = r.take("B")
    masks = []
    for _ in range(n_masks):
        n_entries = r.take("B")
        entries = []
        for _ in range(n_entries):
            kind, n_hidden = r.take("BB")
            hidden = tuple(r.take("B") for _ in range(n_hidden))
            hp = r.take("b")
            entries.append(Visibility(VisKind(kind), hidden,
                                      None if hp < 0 else hp))
        masks.append(HidingMask(tuple(entries)))
    n_hidden_t = r.take("B")
    hidden_templates = []
    for _ in range(n_hidden_t):
        s, c = r.take("BB")
        hidden_templates.append((Shape(s), Color(c)))
    hidden_templates = tuple(hidden_templates)
    n_objs = r.take("B")
    initial = tuple(_decode_spec(r) for _ in range(n_objs))
    meta_len = r.take("I")
    meta = json.loads(r.blob(meta_len).decode())
    game = Game(goals=goals, rules=tuple(rules), masks=tuple(masks),
                initial_objects=initial, hidden_templates=hidden_templates)
    info = GameInfo(
        chain_depth=meta["chain_depth"],
        chain_rule_indices=tuple(meta["chain"]),
        dead_end_indices=tuple(meta["dead_ends"]),
        distractors=tuple(tuple(t) for t in meta["distractors"]),
        hiding_mechanism=meta["hiding"],
    )
    return game, info, trial_length


def save_pool(pool: TaskPool, path: str | Path) -> None:
    path = Path(path)
    buf = io.BytesIO()
    buf.write(MAGIC)
    _w(buf, "H", pool.version)
    _w(buf, "q", pool.seed)
    _w(buf, "II", pool.n_worlds, pool.n_games)
    params_json = json.dumps(pool.params.to_dict(), sort_keys=True).encode()
    digest = hashlib.sha256(params_json).digest()
    buf.write(digest)
    _w(buf, "I", len(params_json))
    buf.write(params_json)
    for i, world in enumerate(pool.worlds):
        blob = _encode_world(world)
        _w(buf, "qI", pool.world_seeds[i], len(blob))
        buf.write(blob)
    for i, game in enumerate(pool.games):
        blob = _encode_game(game, pool.infos[i], pool.trial_lengths[i])
        _w(buf, "qI", pool.game_seeds[i], len(blob))
        buf.write(blob)
    path.write_bytes(buf.getvalue())
    manifest = {
        "magic": MAGIC.decode(),
        "format_version": pool.version,
        "seed": pool.seed,
        "n_worlds": pool.n_worlds,
        "n_games": pool.n_games,
        "param_digest": digest.hex(),
        "params": pool.params.to_dict(),
    }
    path.with_suffix(path.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n")


def load_pool(path: str | Path) -> TaskPool:
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.blob(4) != MAGIC:
        raise ValueError("not a task pool file (bad magic)")
    version = r.take("H")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported pool format version {version}")
    seed = r.take("q")
    n_worlds, n_games = r.take("II")
    digest = r.blob(32)
    params_len = r.take("I")
    params_json = r.blob(params_len)
    if hashlib.sha256(params_json).digest() != digest:
        raise ValueError("parameter digest mismatch")
    params = GenParams.from_dict(json.loads(params_json.decode()))
    worlds, world_seeds = [], []
    for _ in range(n_worlds):
        ws, blob_len = r.take("qI")
        worlds.append(_decode_world(r.blob(blob_len)))
        world_seeds.append(ws)
    games, infos, trial_lengths, game_seeds = [], [], [], []
    for _ in range(n_games):
        gs, blob_len = r.take("qI")
        game, info, tl = _decode_game(r.blob(blob_len))
        games.append(game)
        infos.append(info)
        trial_lengths.append(tl)
        game_seeds.append(gs)
    return TaskPool(version=version, seed=seed, params=params, worlds=worlds,
                    games=games, infos=infos, trial_lengths=trial_lengths,
                    world_seeds=world_seeds, game_seeds=game_seeds)
