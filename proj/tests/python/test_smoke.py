import numpy as np
import pytest

import protolp


@pytest.fixture(scope="module")
def store():
    return protolp.synth_generate(8, 6, 3.0, 0.4, pool_per_class=40, seed=3)


def test_store_and_preprocess(store, tmp_path):
    assert len(store) == 320 and store.dim == 6 and store.n_classes == 8
    normed = protolp.preprocess(store, "l2")
    np.testing.assert_allclose(np.linalg.norm(normed.features, axis=1), 1.0, atol=1e-12)

    path = tmp_path / "store.plpf"
    protolp.write_features(store, path)
    back = protolp.load_features(path)
    # Stored as float32 on disk.
    np.testing.assert_array_equal(back.features, store.features.astype(np.float32))
    assert back.labels == store.labels


def test_episode_and_solver(store):
    ep = protolp.sample_episode(store, index=2, ways=5, shots=1, queries=75, seed=7)
    assert ep.support_x.shape == (5, 6) and ep.query_x.shape == (75, 6)
    out = protolp.run(ep)
    assert len(out["predictions"]) == 75
    assert len(out["loss"]) == 20
    # Query block is Sinkhorn-projected: rows sum to one, columns to 15.
    q = out["soft_labels"][5:]
    np.testing.assert_allclose(q.sum(axis=1), 1.0, atol=1e-5)
    np.testing.assert_allclose(q.sum(axis=0), 15.0, atol=1e-4)
    acc = np.mean(np.array(out["predictions"]) == np.array(ep.truth_query_y))
    assert acc > 0.8


def test_building_blocks(store):
    ep = protolp.sample_episode(store, ways=3, shots=2, queries=9, seed=1)
    x = np.vstack([ep.support_x, ep.query_x])
    protos = np.stack([ep.support_x[np.array(ep.support_y) == k].mean(axis=0) for k in range(3)])
    z = protolp.soft_assign(x, protos, ep.support_y)
    np.testing.assert_allclose(z.sum(axis=1), 1.0)

    w, mass = protolp.prototype_graph(z)
    np.testing.assert_allclose(w, z @ np.diag(1.0 / z.sum(axis=0)) @ z.T, atol=1e-12)
    np.testing.assert_allclose(mass, z.sum(axis=0))

    a = protolp.solve_projection(z, ep.support_y, lam=0.0, ridge=0.0)
    assert a.shape == (3, 3)
    y = protolp.nonparam_propagate(z, ep.support_y, lam=0.5)
    assert y.shape == (15, 3)

    scaled, iters, converged = protolp.sinkhorn(np.ones((6, 3)), np.ones(6), np.full(3, 2.0))
    assert converged
    np.testing.assert_allclose(scaled, np.full((6, 3), 1.0 / 3.0))


def test_baselines(store):
    ep = protolp.sample_episode(store, seed=5)
    assert len(protolp.ncm_predict(ep)) == 75
    protos, preds = protolp.soft_kmeans(ep, n_iter=2)
    assert protos.shape == (5, 6) and len(preds) == 75
    assert len(protolp.classical_lp(ep, lam=1.0)) == 75
    mean, ci = protolp.aggregate_stats([1.0, 1.0, 1.0])
    assert mean == 1.0 and ci == 0.0


def test_run_benchmark():
    rep = protolp.run_benchmark("protolp", synth=(10, 8, 3.0, 0.5, 30), episodes=6, seed=2,
                                parallel=2)
    assert len(rep["per_episode"]) == 6
    assert len(rep["loss_curve_mean"]) == 20
    assert 0.0 <= rep["mean_accuracy"] <= 100.0
    again = protolp.run_benchmark("protolp", synth=(10, 8, 3.0, 0.5, 30), episodes=6, seed=2)
    assert again["per_episode"] == rep["per_episode"]


def test_errors(store):
    with pytest.raises(protolp.Error, match="config"):
        protolp.run_benchmark("tim", synth=(10, 8, 3.0, 0.5))
    with pytest.raises(protolp.Error, match="sampling"):
        protolp.sample_episode(store, ways=20)
    with pytest.raises(protolp.Error):
        protolp.load_features("/nonexistent/store.plpf")
