"""Numba-compiled variant of the exhaustive reachability search.

Valid only for tasks where every object template has at most one alive
instance along any trajectory (the agreement-profile generator guarantees
this: goal/chain/distractor templates are pairwise distinct and no rule can
refire). Under that invariant the state is exactly (player cell, facing,
held template, one cell per template), which packs into an int64.

Falls back to the object-level python search when the invariant cannot be
established. Verdicts are cross-checked against the python search in tests.
"""

from __future__ import annotations

import numpy as np

from numba import njit

from ..env.geometry import line_of_sight
from ..env.types import PlayerRef, Relation, TemplateRef
from .fullsearch import FullSearch, SearchLimit
from .task import Task

ABSENT = 127  # cell code for "no alive instance"
NO_HELD = 7


def _collect_templates(task: Task) -> list | None:
    tpls = []
    for s in task.objects:
        if s.template in tpls:
            return None
        tpls.append(s.template)
    for r in task.game.rules:
        for sp in r.spawns:
            if sp.template not in tpls:
                tpls.append(sp.template)
    for ref in (task.game.goals[0].arg_a, task.game.goals[0].arg_b):
        if isinstance(ref, TemplateRef) and ref.template not in tpls:
            tpls.append(ref.template)
    for r in task.game.rules:
        for t in r.condition.templates():
            if t not in tpls:
                tpls.append(t)
    if len(tpls) > 7:
        return None
    return tpls


def _spawn_template_overlap_possible(task: Task, tpls) -> bool:
    """True when a rule might spawn a template that is already alive, which
    would break the one-instance invariant."""
    initially = {s.template for s in task.objects}
    spawnable = set()
    for r in task.game.rules:
        for sp in r.spawns:
            if sp.template in spawnable or sp.template in initially:
                # Could coexist with an earlier instance unless the same rule
                # consumed it; be conservative.
                consumed = set(r.condition.templates())
                if sp.template not in consumed:
                    return True
            spawnable.add(sp.template)
    return False


def encode_task(task: Task):
    tpls = _collect_templates(task)
    if tpls is None or _spawn_template_overlap_possible(task, tpls):
        return None
    world = task.world
    W, H = world.width, world.height
    C = W * H
    if C > 63:
        return None
    n = len(tpls)
    t_index = {t: i for i, t in enumerate(tpls)}

    passable = np.zeros(C, dtype=np.bool_)
    for (x, y) in world.passable_cells:
        passable[y * W + x] = True
    los = np.zeros((C, C), dtype=np.bool_)
    cells = sorted(world.passable_cells)
    for a in cells:
        for b in cells:
            if line_of_sight(a, b, world.walls):
                los[a[1] * W + a[0], b[1] * W + b[0]] = True

    init_cell = np.full(8, ABSENT, dtype=np.int64)
    frozen = np.zeros(8, dtype=np.bool_)
    for s in task.objects:
        i = t_index[s.template]
        init_cell[i] = s.cell[1] * W + s.cell[0]
        frozen[i] = s.frozen

    def enc_ref(ref):
        if isinstance(ref, PlayerRef):
            return (0, 0)
        return (1, t_index[ref.template])

    R = len(task.game.rules)
    rule_rel = np.zeros(max(R, 1), dtype=np.int64)
    rule_neg = np.zeros(max(R, 1), dtype=np.bool_)
    rule_ak = np.zeros(max(R, 1), dtype=np.int64)
    rule_at = np.zeros(max(R, 1), dtype=np.int64)
    rule_bk = np.zeros(max(R, 1), dtype=np.int64)
    rule_bt = np.zeros(max(R, 1), dtype=np.int64)
    rule_ns = np.zeros(max(R, 1), dtype=np.int64)
    rule_spawn = np.zeros((max(R, 1), 4), dtype=np.int64)
    for ri, r in enumerate(task.game.rules):
        rule_rel[ri] = int(r.condition.relation)
        rule_neg[ri] = r.condition.negated
        rule_ak[ri], rule_at[ri] = enc_ref(r.condition.arg_a)
        rule_bk[ri], rule_bt[ri] = enc_ref(r.condition.arg_b)
        rule_ns[ri] = len(r.spawns)
        for si, sp in enumerate(r.spawns):
            rule_spawn[ri, si] = t_index[sp.template]

    goal = task.game.goals[0]
    goal_rel = int(goal.relation)
    goal_neg = goal.negated
    gak, gat = enc_ref(goal.arg_a)
    gbk, gbt = enc_ref(goal.arg_b)
    spawn = world.spawn_for(0)
    spawn_idx = spawn[1] * W + spawn[0]
    return (W, H, n, R, passable, los, init_cell, frozen,
            rule_rel, rule_neg, rule_ak, rule_at, rule_bk, rule_bt,
            rule_ns, rule_spawn, goal_rel, goal_neg, gak, gat, gbk, gbt,
            spawn_idx)


@njit(cache=True, inline="always")
def _cheb(W, a, b):
    ax, ay = a % W, a // W
    bx, by = b % W, b // W
    dx = ax - bx
    dy = ay - by
    if dx < 0:
        dx = -dx
    if dy < 0:
        dy = -dy
    return dx if dx > dy else dy


@njit(cache=True, inline="always")
def _manh(W, a, b):
    ax, ay = a % W, a // W
    bx, by = b % W, b // W
    dx = ax - bx
    dy = ay - by
    if dx < 0:
        dx = -dx
    if dy < 0:
        dy = -dy
    return dx + dy


@njit(cache=True, inline="always")
def _rel_ok(rel, W, los, a, b):
    if rel == 1:  # near
        return _cheb(W, a, b) <= 2
    if rel == 2:  # touching
        return _manh(W, a, b) == 1
    if rel == 4:  # see
        return los[a, b]
    return False


@njit(cache=True, inline="always")
def _rm_key(W, c):
    return (c // W) * 64 + (c % W)


@njit(cache=True)
def _binding(rel, ak, at, bk, bt, W, los, player, held, cells):
    """Returns (found, ia, ib): entity codes, -1 for player, tpl index else."""
    if rel == 3:  # hold
        if held == NO_HELD:
            return False, -1, -1
        if held == bt:
            return True, -1, held
        return False, -1, -1
    ca = player if ak == 0 else cells[at]
    cb = player if bk == 0 else cells[bt]
    if ak == 1 and ca == ABSENT:
        return False, -1, -1
    if bk == 1 and cb == ABSENT:
        return False, -1, -1
    if ak == 1 and bk == 1 and at == bt:
        return False, -1, -1  # one instance per template: no self-pair
    if _rel_ok(rel, W, los, ca, cb):
        return True, (-1 if ak == 0 else at), (-1 if bk == 0 else bt)
    return False, -1, -1


@njit(cache=True)
def _step(state, move, grab, drop, W, H, n, R, passable, los, frozen,
          rule_rel, rule_neg, rule_ak, rule_at, rule_bk, rule_bt,
          rule_ns, rule_spawn, goal_rel, goal_neg, gak, gat, gbk, gbt):
    # decode
    player = state & 63
    facing = (state >> 6) & 3
    held = (state >> 8) & 7
    cells = np.empty(7, dtype=np.int64)
    for i in range(7):
        cells[i] = (state >> (11 + 7 * i)) & 127

    C = W * H
    if move > 0:
        facing = move - 1
        px = player % W
        py = player // W
        if move == 1:
            py -= 1
        elif move == 2:
            px += 1
        elif move == 3:
            py += 1
        else:
            px -= 1
        ok = 0 <= px < W and 0 <= py < H
        if ok:
            target = py * W + px
            if not passable[target]:
                ok = False
            else:
                for i in range(n):
                    if frozen[i] and cells[i] == target:
                        ok = False
                        break
            if ok:
                player = target
                if held != NO_HELD:
                    cells[held] = target

    if drop and held != NO_HELD:
        px = player % W
        py = player // W
        for t in range(5):
            if t == 0:
                f = facing + 1
            else:
                f = t
            tx, ty = px, py
            if f == 1:
                ty -= 1
            elif f == 2:
                tx += 1
            elif f == 3:
                ty += 1
            else:
                tx -= 1
            if not (0 <= tx < W and 0 <= ty < H):
                continue
            tc = ty * W + tx
            if not passable[tc]:
                continue
            occupied = False
            for i in range(n):
                if i != held and cells[i] == tc:
                    occupied = True
                    break
            if not occupied:
                cells[held] = tc
                held = NO_HELD
                break

    if grab and held == NO_HELD:
        best = -1
        best_d = 99
        best_rm = 1 << 30
        for i in range(n):
            if frozen[i] or cells[i] == ABSENT:
                continue
            d = _cheb(W, cells[i], player)
            if d <= 1:
                rm = _rm_key(W, cells[i])
                if d < best_d or (d == best_d and rm < best_rm):
                    best = i
                    best_d = d
                    best_rm = rm
        if best >= 0:
            cells[best] = player
            held = best

    # fire rules (each at most once per tick, rescan from the top)
    fired_mask = 0
    progress = True
    while progress:
        progress = False
        for ri in range(R):
            if fired_mask & (1 << ri):
                continue
            found, ia, ib = _binding(rule_rel[ri], rule_ak[ri], rule_at[ri],
                                     rule_bk[ri], rule_bt[ri],
                                     W, los, player, held, cells)
            satisfied = found != rule_neg[ri]
            if not satisfied:
                continue
            # consume
            anchor = player
            n_consumed = 0
            c0 = -1
            c1 = -1
            if found:
                if ia >= 0:
                    anchor = cells[ia]
                elif ib >= 0:
                    anchor = cells[ib]
                if ia >= 0 and not frozen[ia]:
                    c0 = ia
                    n_consumed += 1
                if ib >= 0 and not frozen[ib]:
                    if n_consumed == 0:
                        c0 = ib
                    else:
                        c1 = ib
                    n_consumed += 1
            cc0 = cells[c0] if c0 >= 0 else -1
            cc1 = cells[c1] if c1 >= 0 else -1
            if c0 >= 0:
                cells[c0] = ABSENT
                if held == c0:
                    held = NO_HELD
            if c1 >= 0:
                cells[c1] = ABSENT
                if held == c1:
                    held = NO_HELD
            # spawn
            for si in range(rule_ns[ri]):
                tpl = rule_spawn[ri, si]
                target = -1
                want = cc0 if si == 0 else (cc1 if si == 1 else -1)
                if want >= 0:
                    free = passable[want]
                    if free:
                        for i in range(n):
                            if i != held and cells[i] == want:
                                free = False
                                break
                    if free:
                        target = want
                if target < 0:
                    best_key = 1 << 40
                    for c in range(C):
                        if not passable[c]:
                            continue
                        free = True
                        for i in range(n):
                            if i != held and cells[i] == c:
                                free = False
                                break
                        if not free:
                            continue
                        key = _cheb(W, c, anchor) * (1 << 20) + _rm_key(W, c)
                        if key < best_key:
                            best_key = key
                            target = c
                if target >= 0:
                    cells[tpl] = target  # invariant: tpl was absent
            fired_mask |= 1 << ri
            progress = True
            break

    # goal
    found, ia, ib = _binding(goal_rel, gak, gat, gbk, gbt,
                             W, los, player, held, cells)
    reward = found != goal_neg

    out = np.int64(player) | (np.int64(facing) << 6) | (np.int64(held) << 8)
    for i in range(7):
        out |= cells[i] << (11 + 7 * i)
    return out, reward


@njit(cache=True, inline="always")
def _table_probe(table, key):
    """Open-addressing insert; returns True when the key was new. Keys are
    shifted by +1 so 0 marks an empty slot."""
    mask = table.shape[0] - 1
    k = key + 1
    h = (key * np.int64(0x9E3779B97F4A7C15)) & mask
    while True:
        cur = table[h]
        if cur == 0:
            table[h] = k
            return True
        if cur == k:
            return False
        h = (h + 1) & mask


@njit(cache=True)
def _bfs(start_states, max_states, table_bits, W, H, n, R, passable, los,
         frozen, rule_rel, rule_neg, rule_ak, rule_at, rule_bk, rule_bt,
         rule_ns, rule_spawn, goal_rel, goal_neg, gak, gat, gbk, gbt):
    table = np.zeros(1 << table_bits, dtype=np.int64)
    queue = np.empty(max_states + 16, dtype=np.int64)
    head = 0
    tail = 0
    count = 0
    for s in start_states:
        if _table_probe(table, s):
            queue[tail] = s
            tail += 1
            count += 1
    while head < tail:
        state = queue[head]
        head += 1
        held_now = (state >> 8) & 7
        for move in range(5):
            for gd in range(3):
                if gd == 1 and held_now != NO_HELD:
                    continue  # grab with a full hand is a no-op
                if gd == 2 and held_now == NO_HELD:
                    continue  # drop with an empty hand is a no-op
                nxt, reward = _step(state, move, gd == 1, gd == 2, W, H, n, R,
                                    passable, los, frozen,
                                    rule_rel, rule_neg, rule_ak, rule_at,
                                    rule_bk, rule_bt, rule_ns, rule_spawn,
                                    goal_rel, goal_neg, gak, gat, gbk, gbt)
                if reward:
                    return 1
                if _table_probe(table, nxt):
                    count += 1
                    if count >= max_states:
                        return -1
                    queue[tail] = nxt
                    tail += 1
    return 0


def goal_reachable_fast(task: Task, max_states: int = 6_000_000):
    """True/False via the packed numba search; falls back to the python
    object-level search when the task breaks the packing invariants."""
    enc = encode_task(task)
    if enc is None:
        return FullSearch(task, max_states=max_states).goal_reachable()
    (W, H, n, R, passable, los, init_cell, frozen,
     rule_rel, rule_neg, rule_ak, rule_at, rule_bk, rule_bt,
     rule_ns, rule_spawn, goal_rel, goal_neg, gak, gat, gbk, gbt,
     spawn_idx) = enc
    starts = []
    for facing in range(4):
        s = np.int64(spawn_idx) | (np.int64(facing) << 6) | (np.int64(NO_HELD) << 8)
        for i in range(7):
            s |= np.int64(init_cell[i] if i < 8 else ABSENT) << (11 + 7 * i)
        starts.append(s)
    table_bits = max(16, int(np.ceil(np.log2(max_states * 2 + 2))))
    res = _bfs(np.array(starts, dtype=np.int64), max_states, table_bits,
               W, H, n, R, passable, los, frozen[:8], rule_rel, rule_neg,
               rule_ak, rule_at, rule_bk, rule_bt, rule_ns, rule_spawn,
               goal_rel, goal_neg, gak, gat, gbk, gbt)
    if res < 0:
        raise SearchLimit(f"exceeded {max_states} states")
    return bool(res)
