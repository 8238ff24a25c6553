import json
import math

import numpy as np
import pytest

hb = pytest.importorskip("hebbes")


def test_hebbian_delta():
    rule = hb.HebbRule(eta=0.5, a=1.0, b=2.0, c=3.0, d=4.0)
    assert hb.hebbian_delta(rule, 0.5, -1.0) == pytest.approx(0.75)
    zero = hb.HebbRule(eta=0.0, a=9.0, b=9.0, c=9.0, d=9.0)
    assert hb.hebbian_delta(zero, 0.3, 0.7) == 0.0


def test_plastic_network_forward_and_step():
    topo = hb.Topology([4, 8, 1])
    assert topo.synapse_count() == 40
    net = hb.init_weights(topo, seed=42)
    obs = np.array([0.1, -0.2, 0.3, -0.4])
    out = net.forward(obs)
    assert out.shape == (1,)
    assert -1.0 <= out[0] <= 1.0

    model = hb.GenotypeModel.per_synapse(40, 5, 0.1)
    model.init_mu_gaussian(1.0, 7)
    geno = model.sample(3)
    rules = hb.materialize(geno, topo)
    net.hebbian_step(rules)
    assert np.max(np.abs(net.flat_weights())) <= 3.0

    same = hb.init_weights(topo, seed=42)
    assert np.array_equal(same.flat_weights(), hb.init_weights(topo, seed=42).flat_weights())


def test_genotype_model_math():
    assert hb.rho_to_components(1024, 128) == 8
    model = hb.GenotypeModel.shared_gmm(6, 2, 5, 0.1)
    model.init_mu_gaussian(0.5, 11)
    g = model.sample(5)
    lp = model.log_prob(g)
    assert math.isfinite(lp)

    grad = model.grad_log_prob(g)
    assert grad.mu.shape == (2, 5)
    assert grad.lambda_.shape == (6, 2)
    # logit gradient rows sum to zero
    assert np.max(np.abs(grad.lambda_.sum(axis=1))) < 1e-10

    r = model.responsibilities(g.h)
    assert np.allclose(r.sum(axis=1), 1.0, atol=1e-12)


def test_gradcheck_oracle():
    report = hb.check_model_gradients(hb.ModelKind.SharedGmm, 20, 1)
    assert report.trials == 20
    assert report.max_rel_error < 1e-4


def test_environment_episode():
    spec = hb.make_variation(hb.TaskId.CartPoleVar, 2)
    assert spec.params.friction_mult == 2.0
    env = hb.Environment(spec)
    obs = env.reset(9)
    assert obs.shape == (4,)
    total = 0.0
    for _ in range(10):
        obs, reward, done, aborted = env.step(np.array([0.1]))
        assert not aborted
        total += reward
        if done:
            break
    assert total > 0.0

    meta = hb.make_meta_task(hb.TaskId.CartPoleVar, 5)
    assert [s.variation_id for s in meta.train_specs] == [1, 2, 3, 4]
    assert meta.test_spec.variation_id == 5


def test_es_operations():
    cfg = hb.EsConfig()
    cfg.learning_rate = 1.0
    cfg.decay = 0.9931
    assert hb.current_lr(cfg, 100) == pytest.approx(0.5, rel=1e-3)
    shaped = hb.shape_fitness([1.0, 2.0, 3.0], hb.Shaping.CenteredRanks)
    assert shaped == [-0.5, 0.0, 0.5]


def test_train_and_evaluate_roundtrip(tmp_path):
    config = {
        "task": "cartpole-var",
        "held_out_id": 5,
        "model": "per-synapse",
        "topology": [4, 4, 1],
        "generations": 3,
        "eval_episodes": 5,
        "seed": 123,
        "es": {"population_size": 8, "learning_rate": 0.2},
    }
    out = tmp_path / "run"
    done, generation, ckpt = hb.train_from_json(json.dumps(config), str(out), 2)
    assert done and generation == 3
    assert (out / "history.jsonl").exists()
    assert (out / "config.resolved.json").exists()

    result = json.loads(hb.evaluate_from_json(json.dumps(config), ckpt, str(out), 2))
    assert len(result["cells"]) == 5
    held = [c for c in result["cells"] if c["held_out"]]
    assert len(held) == 1 and held[0]["variation_id"] == 5
    for cell in result["cells"]:
        assert len(cell["fitness"]) == 5


def test_verify_gradients_json():
    out = json.loads(hb.verify_gradients(trials=10, seed=2))
    assert out["overall_pass"] is True
    assert len(out["kinds"]) == 5
