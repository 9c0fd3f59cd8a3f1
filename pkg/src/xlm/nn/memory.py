"""Memory cores: recurrent, recurrent+episodic attention, cached-activation
causal attention, and its stride-subsampled long-horizon variant.

All variants expose the same contract:

    state = initial_state(batch)
    outputs, state = forward(embeddings [T, B, D], state)

State is carried across trial boundaries and replaced by initial_state at
episode boundaries. Incremental (T=1) evaluation and whole-sequence evaluation
produce the same outputs; the equivalence is part of the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from .config import MemoryConfig, MemoryVariant


class GRUCell(nn.Module):
    """Plain gated recurrent cell (explicit so state handling stays ours)."""

    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.lin_zr = nn.Linear(input_size + hidden_size, 2 * hidden_size)
        self.lin_n = nn.Linear(input_size + hidden_size, hidden_size)
        self.hidden_size = hidden_size

    def forward(self, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        zr = torch.sigmoid(self.lin_zr(torch.cat([x, h], dim=-1)))
        z, r = zr.chunk(2, dim=-1)
        n = torch.tanh(self.lin_n(torch.cat([x, r * h], dim=-1)))
        return (1 - z) * h + z * n


class LSTMCell(nn.Module):
    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.lin = nn.Linear(input_size + hidden_size, 4 * hidden_size)
        self.hidden_size = hidden_size

    def forward(self, x, hc):
        h, c = hc
        i, f, g, o = self.lin(torch.cat([x, h], dim=-1)).chunk(4, dim=-1)
        c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h = torch.sigmoid(o) * torch.tanh(c)
        return h, (h, c)


class GatedFeedForward(nn.Module):
    """GEGLU feedforward: value path gated by a gelu-activated gate path."""

    def __init__(self, d_model: int, ffw: int):
        super().__init__()
        self.gate = nn.Linear(d_model, ffw)
        self.value = nn.Linear(d_model, ffw)
        self.out = nn.Linear(ffw, d_model)

    def forward(self, x):
        return self.out(torch.nn.functional.gelu(self.gate(x)) * self.value(x))


class CachedAttentionBlock(nn.Module):
    """Pre-normalised causal attention over a rolling cache of layer inputs.

    The relative position signal is a learned per-head bias over clamped key
    distances 0..max_offset.
    """

    def __init__(self, cfg: MemoryConfig, max_offset: int):
        super().__init__()
        d, h, k = cfg.d_model, cfg.heads, cfg.key_size
        self.heads, self.key_size = h, k
        self.value_size = cfg.value_size
        self.ln_attn = nn.LayerNorm(d)
        self.ln_ffw = nn.LayerNorm(d)
        self.q = nn.Linear(d, h * k)
        self.k = nn.Linear(d, h * k)
        self.v = nn.Linear(d, h * cfg.value_size)
        self.proj = nn.Linear(h * cfg.value_size, d)
        self.ffw = GatedFeedForward(d, cfg.ffw_size)
        self.rel_bias = nn.Parameter(torch.zeros(h, max_offset + 1))
        self.max_offset = max_offset

    def attend(self, x: torch.Tensor, keys_in: torch.Tensor,
               distances: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """x [T,B,D] queries; keys_in [S,B,D] pre-norm inputs to attend over;
        distances [T,S] integer query-key offsets; mask [T,S] True=visible."""
        T, B, D = x.shape
        S = keys_in.shape[0]
        xq = self.ln_attn(x)
        xk = self.ln_attn(keys_in)
        q = self.q(xq).view(T, B, self.heads, self.key_size)
        k = self.k(xk).view(S, B, self.heads, self.key_size)
        v = self.v(xk).view(S, B, self.heads, self.value_size)
        logits = torch.einsum("tbhk,sbhk->bhts", q, k) / math.sqrt(self.key_size)
        bias = self.rel_bias[:, distances.clamp(0, self.max_offset)]  # [h,T,S]
        logits = logits + bias.unsqueeze(0)
        logits = logits.masked_fill(~mask.view(1, 1, T, S), float("-inf"))
        attn = torch.softmax(logits, dim=-1)
        out = torch.einsum("bhts,sbhv->tbhv", attn, v).reshape(T, B, -1)
        x = x + self.proj(out)
        x = x + self.ffw(self.ln_ffw(x))
        return x


@dataclass
class TxlState:
    caches: list  # per layer: [S, B, D] cached inputs (S <= cache_len)
    steps: int    # global step count within the episode


class TxlMemory(nn.Module):
    def __init__(self, cfg: MemoryConfig):
        super().__init__()
        self.cfg = cfg
        self.skip = cfg.variant == MemoryVariant.TXL_SKIP
        self.stride = cfg.skip_stride if self.skip else 1
        max_offset = cfg.cache_len * self.stride + 1
        self.blocks = nn.ModuleList(
            CachedAttentionBlock(cfg, max_offset) for _ in range(cfg.blocks)
        )
        if self.skip:
            self.pre = GRUCell(cfg.d_model, cfg.d_model)
        self.ln_out = nn.LayerNorm(cfg.d_model)

    def initial_state(self, batch: int, device=None, dtype=None) -> TxlState:
        p = next(self.parameters())
        device = device or p.device
        dtype = dtype or p.dtype
        empty = torch.zeros(0, batch, self.cfg.d_model, device=device, dtype=dtype)
        caches = [empty for _ in self.blocks]
        if self.skip:
            caches = caches + [torch.zeros(batch, self.cfg.d_model,
                                           device=device, dtype=dtype)]
        return TxlState(caches=caches, steps=0)

    def forward(self, emb: torch.Tensor, state: TxlState):
        T, B, D = emb.shape
        cfg = self.cfg
        start = state.steps
        x = emb
        pre_h = None
        if self.skip:
            pre_h = state.caches[-1]
            outs = []
            for t in range(T):
                pre_h = self.pre(emb[t], pre_h)
                outs.append(pre_h)
            x = torch.stack(outs, dim=0)

        # Which window positions enter the cache (and are attendable).
        device = emb.device
        global_pos = torch.arange(start, start + T, device=device)
        kept = (global_pos % self.stride == 0) if self.stride > 1 \
            else torch.ones(T, dtype=torch.bool, device=device)

        new_caches = []
        for li, block in enumerate(self.blocks):
            cache = state.caches[li]
            S = cache.shape[0]
            # Cached entries hold global positions of kept steps before start.
            if self.stride > 1:
                first_kept = ((start + self.stride - 1) // self.stride) * self.stride
                cache_pos = torch.arange(S, 0, -1, device=device) * -self.stride \
                    + first_kept
            else:
                cache_pos = torch.arange(start - S, start, device=device)
            keys_in = torch.cat([cache, x], dim=0)
            key_pos = torch.cat([cache_pos, global_pos])
            q_pos = global_pos.view(T, 1)
            dist = q_pos - key_pos.view(1, -1)
            kept_keys = torch.cat(
                [torch.ones(S, dtype=torch.bool, device=device), kept])
            visible = (dist >= 0) & (dist <= cfg.cache_len * self.stride) \
                & (kept_keys.view(1, -1) | (dist == 0))
            y = block.attend(x, keys_in, dist, visible)
            kept_x = x[kept] if self.stride > 1 else x
            new_cache = torch.cat([cache, kept_x.detach()], dim=0)[-cfg.cache_len:]
            new_caches.append(new_cache)
            x = y
        out = self.ln_out(x)
        if self.skip:
            new_caches.append(pre_h.detach() if pre_h is not None else state.caches[-1])
        return out, TxlState(caches=new_caches, steps=start + T)


@dataclass
class RnnState:
    h: torch.Tensor                      # [B, D]
    mem: Optional[torch.Tensor] = None   # [slots, B, D] episodic ring
    written: int = 0
    steps: int = 0


class RnnMemory(nn.Module):
    def __init__(self, cfg: MemoryConfig):
        super().__init__()
        self.cfg = cfg
        self.attending = cfg.variant == MemoryVariant.RNN_ATTENTION
        in_size = cfg.d_model * (2 if self.attending else 1)
        self.cell = GRUCell(in_size, cfg.d_model)
        self.stack = nn.ModuleList(
            GRUCell(cfg.d_model, cfg.d_model) for _ in range(cfg.blocks - 1)
        )
        if self.attending:
            d, h, k = cfg.d_model, cfg.heads, cfg.key_size
            self.heads, self.key_size = h, k
            self.q = nn.Linear(d, h * k)
            self.k = nn.Linear(d, h * k)
            self.v = nn.Linear(d, h * cfg.value_size)
            self.proj = nn.Linear(h * cfg.value_size, d)
        self.ln_out = nn.LayerNorm(cfg.d_model)

    def initial_state(self, batch: int, device=None, dtype=None) -> list[RnnState]:
        p = next(self.parameters())
        device = device or p.device
        dtype = dtype or p.dtype
        states = []
        n_layers = 1 + len(self.stack)
        for li in range(n_layers):
            mem = None
            if self.attending and li == 0:
                mem = torch.zeros(self.cfg.episodic_slots, batch,
                                  self.cfg.d_model, device=device, dtype=dtype)
            states.append(RnnState(
                h=torch.zeros(batch, self.cfg.d_model, device=device, dtype=dtype),
                mem=mem))
        return states

    def _attend(self, h: torch.Tensor, mem: torch.Tensor,
                written: int) -> torch.Tensor:
        B = h.shape[0]
        q = self.q(h).view(B, self.heads, self.key_size)
        keys = self.k(mem).view(-1, B, self.heads, self.key_size)
        vals = self.v(mem).view(-1, B, self.heads, self.cfg.value_size)
        logits = torch.einsum("bhk,sbhk->bhs", q, keys) / math.sqrt(self.key_size)
        if written < mem.shape[0]:
            mask = torch.zeros(mem.shape[0], dtype=torch.bool, device=h.device)
            mask[:written] = True
            if written == 0:
                return torch.zeros_like(h)
            logits = logits.masked_fill(~mask.view(1, 1, -1), float("-inf"))
        attn = torch.softmax(logits, dim=-1)
        out = torch.einsum("bhs,sbhv->bhv", attn, vals).reshape(B, -1)
        return self.proj(out)

    def forward(self, emb: torch.Tensor, states: list[RnnState]):
        T, B, D = emb.shape
        s0 = states[0]
        h = s0.h
        mem = s0.mem
        written = s0.written
        steps = s0.steps
        hs_upper = [s.h for s in states[1:]]
        outs = []
        for t in range(T):
            x = emb[t]
            if self.attending:
                attn_out = self._attend(h, mem, written)
                x = torch.cat([x, attn_out], dim=-1)
            h = self.cell(x, h)
            y = h
            for li, cell in enumerate(self.stack):
                hs_upper[li] = cell(y, hs_upper[li])
                y = hs_upper[li]
            if self.attending and steps % self.cfg.episodic_stride == 0:
                slot = written % self.cfg.episodic_slots
                mem = torch.cat([mem[:slot], h.detach().unsqueeze(0),
                                 mem[slot + 1:]], dim=0)
                written += 1
            steps += 1
            outs.append(y)
        out = self.ln_out(torch.stack(outs, dim=0))
        new_states = [RnnState(h=h, mem=mem, written=written, steps=steps)]
        new_states += [RnnState(h=hu) for hu in hs_upper]
        return out, new_states


def build_memory(cfg: MemoryConfig) -> nn.Module:
    if cfg.variant in (MemoryVariant.TXL, MemoryVariant.TXL_SKIP):
        return TxlMemory(cfg)
    return RnnMemory(cfg)
