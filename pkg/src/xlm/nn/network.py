"""Full policy/value/model network and its checkpoint format."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .config import NetConfig
from .encoder import FlatObs, TimestepEncoder
from .heads import ModelUnroll, PolicyHead, ValueHead, bins_to_scalar
from .memory import build_memory

CHECKPOINT_VERSION = 1


@dataclass
class ModelPredictions:
    """Predictions for one segment: direct heads at depth 0 plus the
    action-conditional unroll at depths 1..I (rewards at 0..I)."""

    policy0: list[torch.Tensor]          # per group [T, B, n]
    value0: torch.Tensor                 # [T, B, bins]
    policy_i: list[list[torch.Tensor]]   # [i-1][group] -> [T, B, n] for i>=1
    value_i: list[torch.Tensor]          # [i-1] -> [T, B, bins]
    reward_i: list[torch.Tensor]         # [i] -> [T, B, bins], i = 0..I
    memory_out: torch.Tensor = None      # [T, B, D] memory-core outputs


class AgentNetwork(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = TimestepEncoder(cfg.encoder, cfg.memory.d_model)
        self.memory = build_memory(cfg.memory)
        self.policy_head = PolicyHead(cfg.memory.d_model, cfg.head_width,
                                      cfg.action_groups)
        self.value_head = ValueHead(cfg.memory.d_model, cfg.head_width,
                                    cfg.value_bins)
        self.model = ModelUnroll(cfg)

    # -- parameter accounting -------------------------------------------------

    def parameter_counts(self) -> dict[str, int]:
        memory_core = sum(p.numel() for p in self.memory.parameters())
        total = sum(p.numel() for p in self.parameters())
        return {"memory_core": memory_core, "total": total}

    # -- acting ---------------------------------------------------------------

    def initial_state(self, batch: int):
        return self.memory.initial_state(batch)

    @torch.no_grad()
    def act(self, obs: FlatObs, state):
        """One incremental step: per-group logits, decoded value, new state."""
        emb = self.encoder(obs).unsqueeze(0)          # [1, B, D]
        out, state = self.memory(emb, state)
        h = out[0]
        logits = self.policy_head(h)
        value = bins_to_scalar(self.value_head(h), self.cfg)
        return logits, value, state

    @torch.no_grad()
    def act_with_model(self, obs: FlatObs, state):
        """Acting step that also returns the depth-1 model predictions needed
        by the curriculum fitness metrics (v1, pi1 after the chosen action are
        computed by the caller via model_step)."""
        emb = self.encoder(obs).unsqueeze(0)
        out, state = self.memory(emb, state)
        h = out[0]
        logits = self.policy_head(h)
        value_bins = self.value_head(h)
        return logits, value_bins, h, state

    @torch.no_grad()
    def model_step(self, memory_out: torch.Tensor, actions: torch.Tensor):
        """Depth-1 predictions after `actions` [B, groups]."""
        st = self.model.init_state(memory_out)
        st = self.model.step(st, actions)
        heads = self.model.heads(st)
        return heads

    # -- training forward ------------------------------------------------------

    def forward_segment(self, obs: FlatObs, actions: torch.Tensor, state,
                        unroll: Optional[int] = None
                        ) -> tuple[ModelPredictions, object]:
        """obs carries [T*B] flattened leading dims with T known from actions:
        actions [T, B, groups]. The unroll reuses the segment's own future
        actions; depths crossing the segment end repeat the last action (the
        loss masks those positions out).
        """
        I = unroll if unroll is not None else self.cfg.model_unroll
        T, B, G = actions.shape
        emb = self.encoder(obs)
        emb = emb.view(T, B, -1)
        out, state = self.memory(emb, state)

        policy0 = self.policy_head(out)
        value0 = self.value_head(out)

        st = self.model.init_state(out)              # states over [T, B]
        policy_i: list[list[torch.Tensor]] = []
        value_i: list[torch.Tensor] = []
        reward_i: list[torch.Tensor] = []
        for i in range(I + 1):
            # action a_{t+i} for every t, clamped at the segment end
            idx = torch.arange(T) + i
            idx = idx.clamp(max=T - 1)
            a = actions[idx]                         # [T, B, G]
            st = self.model.step(st, a)
            heads = self.model.heads(st)
            reward_i.append(heads["reward"])         # r_hat_i
            if i + 1 <= I:
                policy_i.append(heads["policy"])     # pi_hat_{i+1}
                value_i.append(heads["value"])       # v_hat_{i+1}
        preds = ModelPredictions(policy0=policy0, value0=value0,
                                 policy_i=policy_i, value_i=value_i,
                                 reward_i=reward_i, memory_out=out)
        return preds, state

    # -- checkpoints ------------------------------------------------------------

    def save_checkpoint(self, path, extra: Optional[dict] = None) -> None:
        spans = {}
        buf = io.BytesIO()
        arrays = {}
        for name, p in self.state_dict().items():
            a = p.detach().cpu().numpy()
            spans[name] = {"shape": list(a.shape), "dtype": str(a.dtype)}
            arrays[name] = a
        np.savez(buf, **arrays)
        payload = {
            "version": CHECKPOINT_VERSION,
            "config": self.cfg.to_dict(),
            "spans": spans,
            "extra": extra or {},
        }
        with open(path, "wb") as f:
            header = json.dumps(payload).encode()
            f.write(len(header).to_bytes(8, "little"))
            f.write(header)
            f.write(buf.getvalue())

    @staticmethod
    def load_checkpoint(path) -> tuple["AgentNetwork", dict]:
        with open(path, "rb") as f:
            n = int.from_bytes(f.read(8), "little")
            payload = json.loads(f.read(n).decode())
            blob = f.read()
        if payload["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {payload['version']}")
        cfg = NetConfig.from_dict(payload["config"])
        net = AgentNetwork(cfg)
        arrays = np.load(io.BytesIO(blob))
        state = {}
        for name, meta in payload["spans"].items():
            a = arrays[name]
            if list(a.shape) != meta["shape"]:
                raise ValueError(f"span {name} shape mismatch")
            state[name] = torch.as_tensor(a)
        net.load_state_dict(state)
        return net, payload["extra"]
