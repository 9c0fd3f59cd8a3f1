"""Memory equivalence, causality, resets, heads, encoder, checkpoints."""

import numpy as np
import pytest
import torch

from xlm.env.observe import build_observation
from xlm.nn import AgentNetwork, MemoryConfig, MemoryVariant, NetConfig, bins_to_scalar, scalar_to_two_hot
from xlm.nn.encoder import FlatObs
from xlm.nn.memory import build_memory
from xlm.taskgen.params import AGREEMENT_PARAMS
from xlm.taskgen.pool import build_task

VARIANTS = [MemoryVariant.RNN, MemoryVariant.RNN_ATTENTION,
            MemoryVariant.TXL, MemoryVariant.TXL_SKIP]


def mem_cfg(variant, **kw):
    base = dict(variant=variant, d_model=32, blocks=2, heads=2, key_size=8,
                value_size=8, ffw_size=64, cache_len=8, episodic_slots=6,
                episodic_stride=2, skip_stride=4)
    base.update(kw)
    return MemoryConfig(**base)


@pytest.mark.parametrize("variant", VARIANTS)
def test_incremental_equals_batched(variant):
    torch.manual_seed(0)
    cfg = mem_cfg(variant)
    mem = build_memory(cfg)
    T, B = 37, 3
    emb = torch.randn(T, B, cfg.d_model)

    out_batch, state_batch = mem(emb, mem.initial_state(B))

    state = mem.initial_state(B)
    outs = []
    for t in range(T):
        o, state = mem(emb[t:t + 1], state)
        outs.append(o[0])
    out_steps = torch.stack(outs, dim=0)
    diff = (out_batch - out_steps).abs().max().item()
    assert diff < 1e-5, diff


@pytest.mark.parametrize("variant", VARIANTS)
def test_mixed_chunk_equivalence(variant):
    torch.manual_seed(1)
    cfg = mem_cfg(variant)
    mem = build_memory(cfg)
    T, B = 24, 2
    emb = torch.randn(T, B, cfg.d_model)
    out_batch, _ = mem(emb, mem.initial_state(B))
    state = mem.initial_state(B)
    outs = []
    for lo, hi in ((0, 5), (5, 6), (6, 17), (17, 24)):
        o, state = mem(emb[lo:hi], state)
        outs.append(o)
    out_chunks = torch.cat(outs, dim=0)
    assert (out_batch - out_chunks).abs().max().item() < 1e-5


@pytest.mark.parametrize("variant", VARIANTS)
def test_causal_no_future_leak(variant):
    torch.manual_seed(2)
    cfg = mem_cfg(variant)
    mem = build_memory(cfg)
    T, B = 12, 1
    emb = torch.randn(T, B, cfg.d_model)
    out1, _ = mem(emb, mem.initial_state(B))
    emb2 = emb.clone()
    emb2[8] += torch.randn_like(emb2[8]) * 3.0  # perturb step 8
    out2, _ = mem(emb2, mem.initial_state(B))
    assert torch.allclose(out1[:8], out2[:8], atol=1e-7)
    assert not torch.allclose(out1[8:], out2[8:], atol=1e-4)


@pytest.mark.parametrize("variant", VARIANTS)
def test_episode_reset_erases_history(variant):
    torch.manual_seed(3)
    cfg = mem_cfg(variant)
    mem = build_memory(cfg)
    B = 2
    hist_a = torch.randn(9, B, cfg.d_model)
    hist_b = torch.randn(4, B, cfg.d_model) * 3
    probe = torch.randn(5, B, cfg.d_model)
    _, state_a = mem(hist_a, mem.initial_state(B))
    _, state_b = mem(hist_b, mem.initial_state(B))
    out_a, _ = mem(probe, mem.initial_state(B))
    out_b, _ = mem(probe, mem.initial_state(B))
    assert torch.equal(out_a, out_b)  # fresh state forgets everything, bitwise


def test_txl_effective_horizon_constant():
    cfg = mem_cfg(MemoryVariant.TXL, cache_len=300, blocks=6)
    assert cfg.effective_horizon == 1800
    cfg2 = mem_cfg(MemoryVariant.TXL_SKIP, cache_len=300, blocks=6, skip_stride=4)
    assert cfg2.effective_horizon == 7200


def net_cfg(variant=MemoryVariant.TXL, **kw):
    return NetConfig(memory=mem_cfg(variant, **kw))


def sample_obs():
    task, _ = build_task(3, 903, AGREEMENT_PARAMS, require_solvable=False)
    sim = task.simulator(k=3, seed=0)
    return build_observation(sim, 0, None, 0.0), sim


def test_policy_groups_normalised():
    torch.manual_seed(0)
    net = AgentNetwork(net_cfg())
    obs, _ = sample_obs()
    fo = FlatObs.from_observations([obs] * 4)
    logits, value, _ = net.act(fo, net.initial_state(4))
    for l in logits:
        p = torch.softmax(l, dim=-1)
        assert torch.allclose(p.sum(-1), torch.ones(4), atol=1e-6)


def test_value_bin_decode_properties():
    cfg = net_cfg()
    one_hot = torch.full((cfg.value_bins,), -40.0)
    one_hot[17] = 40.0
    centers = torch.linspace(cfg.value_min, cfg.value_max, cfg.value_bins)
    decoded = bins_to_scalar(one_hot, cfg)
    assert abs(decoded.item() - centers[17].item()) < 1e-4
    uniform = torch.zeros(cfg.value_bins)
    assert abs(bins_to_scalar(uniform, cfg).item()) < 1e-6  # symmetric support


def test_two_hot_roundtrip():
    cfg = net_cfg()
    xs = torch.tensor([0.0, 1.0, -7.3, 49.9, -50.0, 13.37])
    th = scalar_to_two_hot(xs, cfg)
    centers = torch.linspace(cfg.value_min, cfg.value_max, cfg.value_bins)
    back = th @ centers
    assert torch.allclose(back, xs, atol=1e-5)
    assert torch.allclose(th.sum(-1), torch.ones(6), atol=1e-6)


def test_hidden_rule_identity_does_not_change_embedding():
    from xlm.env.types import (Color, HidingMask, ObjectSpec, Predicate,
                               ProductionRule, Relation, Shape, TemplateRef,
                               Visibility, VisKind)
    from xlm.env.sim import Simulator
    from xlm.env.types import EpisodeConfig, Game, GridWorld

    torch.manual_seed(0)
    net = AgentNetwork(net_cfg())
    world = GridWorld(7, 7, frozenset(), (((3, 3), 0),))
    vis = Visibility(kind=VisKind.FULLY_HIDDEN)
    YS = TemplateRef(Shape.SPHERE, Color.YELLOW)
    BC = TemplateRef(Shape.CUBE, Color.BLACK)
    PC = TemplateRef(Shape.CUBE, Color.PURPLE)

    def game_with(rule):
        return Game(goals=(Predicate(Relation.NEAR, YS, BC),), rules=(rule,),
                    masks=(HidingMask((vis,)),),
                    initial_objects=(ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),))

    g1 = game_with(ProductionRule(Predicate(Relation.NEAR, YS, BC),
                                  (ObjectSpec(Shape.CUBE, Color.PURPLE),)))
    g2 = game_with(ProductionRule(Predicate(Relation.TOUCHING, PC, BC),
                                  (ObjectSpec(Shape.PYRAMID, Color.YELLOW),
                                   ObjectSpec(Shape.SPHERE, Color.BLACK))))
    embs = []
    for g in (g1, g2):
        sim = Simulator(world, g, EpisodeConfig(k=1, trial_length=5, seed=0))
        obs = build_observation(sim, 0, None, 0.0)
        fo = FlatObs.from_observations([obs])
        embs.append(net.encoder(fo))
    assert torch.equal(embs[0], embs[1])


def test_zero_observation_embeds_to_bias_pathway():
    torch.manual_seed(0)
    net = AgentNetwork(net_cfg())
    obs, _ = sample_obs()
    fo = FlatObs.from_observations([obs])
    zero = FlatObs(view=torch.zeros_like(fo.view),
                   scalars=torch.zeros_like(fo.scalars),
                   goal=torch.zeros_like(fo.goal),
                   rules=torch.zeros_like(fo.rules))
    out1 = net.encoder(zero)
    out2 = net.encoder(zero)
    assert torch.equal(out1, out2)
    assert out1.abs().sum() > 0  # bias pathway is non-trivial


def test_encoder_gradients_match_finite_differences():
    torch.manual_seed(4)
    net = AgentNetwork(net_cfg()).double()
    obs, _ = sample_obs()
    fo = FlatObs.from_observations([obs])
    fo = FlatObs(fo.view.double(), fo.scalars.double(), fo.goal, fo.rules)

    def loss_fn():
        return net.encoder(fo).square().sum()

    loss = loss_fn()
    loss.backward()
    param = net.encoder.view_proj.weight
    grad = param.grad.clone()
    eps = 1e-6
    for idx in [(0, 3), (5, 17), (12, 80)]:
        with torch.no_grad():
            param[idx] += eps
            up = loss_fn().item()
            param[idx] -= 2 * eps
            down = loss_fn().item()
            param[idx] += eps
        fd = (up - down) / (2 * eps)
        rel = abs(fd - grad[idx].item()) / max(1e-8, abs(fd))
        assert rel < 1e-4, (idx, fd, grad[idx].item())


def test_checkpoint_roundtrip(tmp_path):
    torch.manual_seed(5)
    net = AgentNetwork(net_cfg())
    path = tmp_path / "net.ckpt"
    net.save_checkpoint(path, extra={"frames": 123})
    net2, extra = AgentNetwork.load_checkpoint(path)
    assert extra == {"frames": 123}
    obs, _ = sample_obs()
    fo = FlatObs.from_observations([obs])
    l1, v1, _ = net.act(fo, net.initial_state(1))
    l2, v2, _ = net2.act(fo, net2.initial_state(1))
    for a, b in zip(l1, l2):
        assert torch.equal(a, b)
    assert torch.equal(v1, v2)


def test_parameter_counts_distinguish_memory_core():
    net = AgentNetwork(net_cfg())
    counts = net.parameter_counts()
    assert 0 < counts["memory_core"] < counts["total"]
